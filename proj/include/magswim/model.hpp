#pragma once

#include <istream>
#include <stdexcept>
#include <string>

#include "magswim/types.hpp"

namespace magswim {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 6x6 drag matrix as read from file (force/torque rows, linear/angular columns).
struct DragMatrix {
  Mat6 entries = Mat6::Identity();
  /// max |D - D^T| of the raw input, kept for diagnostics.
  double asymmetry = 0.0;
};

/// Swimmer data in body components. Immutable once built.
struct SwimmerModel {
  Mat6 mobility;  // symmetrized inverse drag
  Mat3 m22;       // rotational mobility block
  Vec3 m;         // unit magnetic moment
  Mat3 p;         // m22 * [m x]
};

/// Singular structure of P. beta0 = m spans the kernel; eta0 spans the
/// left kernel. Both triples are right-handed.
struct PSpectrum {
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  Vec3 beta0, beta1, beta2;
  Vec3 eta0, eta1, eta2;
  double iota = 0.0;  // angle between beta0 and eta0, in [0, pi/2)
  double zeta = 0.0;  // in [0, 2 pi)

  /// Sign convention used for (beta1, beta2); carried into output metadata.
  static constexpr const char* sign_convention =
      "beta1: largest-magnitude component positive; beta2 = beta0 x beta1; eta_i = P beta_i / sigma_i";

  const Vec3& beta(int i) const { return i == 0 ? beta0 : (i == 1 ? beta1 : beta2); }
  const Vec3& eta(int i) const { return i == 0 ? eta0 : (i == 1 ? eta1 : eta2); }
  double sigma(int i) const { return i == 0 ? 0.0 : (i == 1 ? sigma1 : sigma2); }
};

/// Reads 36 numbers in row-major order. Lines starting with '#' are comments.
DragMatrix load_drag_matrix(std::istream& source);
DragMatrix load_drag_matrix_file(const std::string& path);
DragMatrix drag_from_matrix(const Mat6& d);

SwimmerModel build_model(const DragMatrix& drag, const Vec3& moment);

/// Model with m22 = scale * identity; P = scale * [m x].
SwimmerModel isotropic_model(const Vec3& moment = Vec3::UnitZ(), double scale = 1.0);

PSpectrum compute_spectrum(const SwimmerModel& model);

/// Magnetic moment of the bundled helical swimmer.
Vec3 helix_moment();

/// Drag matrix of the bundled helical swimmer.
Mat6 helix_drag();

/// Stable digest of the model numbers, printed into output headers.
std::string model_hash(const SwimmerModel& model);

}  // namespace magswim
