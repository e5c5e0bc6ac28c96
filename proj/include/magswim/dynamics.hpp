#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "magswim/model.hpp"
#include "magswim/types.hpp"

namespace magswim {

/// Mason number and conical angle.
struct Parameters {
  double a = 1.0;
  double psi = std::numbers::pi / 4.0;

  /// sign(cos psi); +1 on the (degenerate) psi = pi/2 line.
  int varsigma() const { return std::cos(psi) < 0.0 ? -1 : 1; }
  /// Frame-based quantities (e1, e2) are undetermined when sin psi vanishes.
  bool frames_available() const { return std::abs(std::sin(psi)) > 1e-12; }
  /// Magnetic field in magnetic-frame components.
  Vec3 field_magnetic() const { return {std::sin(psi), 0.0, std::cos(psi)}; }
};

void validate(const Parameters& params);

/// Lab basis expressed in body components.
struct FrameState {
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitY();
  Vec3 e3 = Vec3::UnitZ();

  Mat3 matrix() const {
    Mat3 r;
    r << e1, e2, e3;
    return r;
  }
  VecX to_vector() const;
  static FrameState from_vector(const VecX& y);
  static FrameState from_matrix(const Mat3& columns);
};

/// Rotation axis and field, both in body components.
struct EBState {
  Vec3 e3 = Vec3::UnitZ();
  Vec3 b = Vec3::UnitZ();

  VecX to_vector() const;
  static EBState from_vector(const VecX& y);
};

/// Field in body components at time t for the given lab frame.
Vec3 field_lab(double t, const FrameState& state, const Parameters& params);

/// d e_i / dt = -(P B) x e_i with B rotating about e3.
FrameState rhs_frames(double t, const FrameState& state, const Parameters& params,
                      const SwimmerModel& model);

/// Autonomous pair: e3' = -(P B) x e3, B' = (a e3 - P B) x B.
EBState rhs_eB(const EBState& state, const Parameters& params, const SwimmerModel& model);

/// Rotation matrix of a (not necessarily unit) quaternion (q1, q2, q3, q4),
/// scalar part last. Body components of magnetic-frame vectors: v_body = Q v_mag.
template <typename Derived>
Matrix3<typename Derived::Scalar> quat_to_rotation(const Eigen::MatrixBase<Derived>& q) {
  using Scalar = typename Derived::Scalar;
  const Scalar n2 = q.squaredNorm();
  if (n2 == Scalar(0)) throw std::invalid_argument("quat_to_rotation: zero quaternion");
  const Scalar q1 = q(0), q2 = q(1), q3 = q(2), q4 = q(3);
  Matrix3<Scalar> r;
  r << q1 * q1 - q2 * q2 - q3 * q3 + q4 * q4, Scalar(2) * (q1 * q2 - q3 * q4),
      Scalar(2) * (q1 * q3 + q2 * q4),
      Scalar(2) * (q1 * q2 + q3 * q4), -q1 * q1 + q2 * q2 - q3 * q3 + q4 * q4,
      Scalar(2) * (q2 * q3 - q1 * q4),
      Scalar(2) * (q1 * q3 - q2 * q4), Scalar(2) * (q2 * q3 + q1 * q4),
      -q1 * q1 - q2 * q2 + q3 * q3 + q4 * q4;
  return r / n2;
}

/// 3x4 matrix F(q); F(q) q = 0 for every q.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 4> quaternion_f(const Eigen::MatrixBase<Derived>& q) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, 3, 4> f;
  f << q(3), -q(2), q(1), -q(0),
       q(2), q(3), -q(0), -q(1),
       -q(1), q(0), q(3), -q(2);
  return f;
}

/// Angular velocity u = a Q e3 - P Q b of the magnetic frame relative to the body.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Vector3<Scalar> frame_velocity(const Eigen::MatrixBase<Derived>& q, const Scalar& a,
                               const Scalar& psi, const Mat3& p) {
  using std::cos;
  using std::sin;
  const Matrix3<Scalar> rot = quat_to_rotation(q);
  const Vector3<Scalar> b(sin(psi), Scalar(0), cos(psi));
  return a * rot.col(2) - p.cast<Scalar>() * (rot * b);
}

/// Norm-preserving quaternion flow q' = F(q)^T u / 2.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Vector4<Scalar> rhs_quaternion(const Eigen::MatrixBase<Derived>& q, const Scalar& a,
                               const Scalar& psi, const Mat3& p) {
  return Scalar(0.5) * quaternion_f(q).transpose() * frame_velocity(q, a, psi, p);
}

/// Quaternion flow with the norm-restoring term -(|q|^2 - 1) q / 2.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Vector4<Scalar> rhs_quaternion_corrected(const Eigen::MatrixBase<Derived>& q, const Scalar& a,
                                         const Scalar& psi, const Mat3& p) {
  const Scalar n2 = q.squaredNorm();
  return rhs_quaternion(q, a, psi, p) - Scalar(0.5) * (n2 - Scalar(1)) * q;
}

inline Vec4 rhs_quaternion_corrected(const Vec4& q, const Parameters& params,
                                     const SwimmerModel& model) {
  return rhs_quaternion_corrected(q, params.a, params.psi, model.p);
}

/// Hamilton product with scalar part last; quat_to_rotation(p * q) = Q(p) Q(q).
Vec4 quaternion_multiply(const Vec4& lhs, const Vec4& rhs);

/// Unit quaternion of a rotation matrix, scalar part made nonnegative.
Vec4 quaternion_from_rotation(const Mat3& rot);

/// Lab frame (body components) at time t from the magnetic-frame orientation q.
FrameState frames_from_quaternion(const Vec4& q, double t, const Parameters& params);
/// Inverse of frames_from_quaternion.
Vec4 quaternion_from_frames(const FrameState& frames, double t, const Parameters& params);
EBState eb_from_quaternion(const Vec4& q, const Parameters& params);

/// Distance on orientations that identifies q and -q.
inline double orientation_distance(const Vec4& q, const Vec4& p) {
  return std::min((q - p).norm(), (q + p).norm());
}

}  // namespace magswim
