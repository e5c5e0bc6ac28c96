#pragma once

#include <array>
#include <string>
#include <vector>

#include "magswim/dynamics.hpp"
#include "magswim/integrator.hpp"
#include "magswim/model.hpp"

namespace magswim {

class RegimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Small Mason number

struct LowAPrediction {
  enum class Regime { equilibrium, periodic, boundary };
  enum class Direction { none, clockwise, anticlockwise };

  Regime regime = Regime::periodic;
  double lambda_stable = 0.0;    // equilibrium regime only
  double lambda_unstable = 0.0;  // equilibrium regime only
  double period_T = 0.0;         // rescaled time T = a t; infinite on the boundary
  double period_t = 0.0;         // physical time
  Direction direction = Direction::none;
};

std::string to_string(LowAPrediction::Regime regime);
std::string to_string(LowAPrediction::Direction direction);

/// Right-hand side of the reduced angle equation dlambda/dT.
double lowa_lambda_rate(const PSpectrum& sp, double psi, double lambda);

LowAPrediction lowa_predict(const PSpectrum& sp, const Parameters& params);

struct LowAFlow {
  std::vector<double> T;
  std::vector<double> lambda;  // unwrapped
};

/// Integrates the reduced angle equation over [0, T_end].
LowAFlow lowa_reduced_flow(const PSpectrum& sp, const Parameters& params, double lambda0,
                           double T_end, const IntegratorConfig& cfg = {});

/// Leading-order rotation axis e3 (body components) for the angle lambda.
Vec3 lowa_axis(const PSpectrum& sp, double psi, double lambda);

// ---------------------------------------------------------------------------
// Large Mason number

/// First-order averaged angular velocity g1 = -cos psi P c3.
Vec3 higha_g1(const FrameState& c, double psi, const Mat3& p);
/// Second-order averaged angular velocity g2.
Vec3 higha_g2(const FrameState& c, double psi, const Mat3& p);

/// Guiding system in physical time. order 0 keeps only the g1 term; order 1
/// adds the (1/a) g2 correction.
FrameState higha_guiding_rhs(const FrameState& c, const Parameters& params,
                             const SwimmerModel& model, int order);

struct HighAPrediction {
  double epsilon = 0.0;  // 1 / a
  int varsigma = 1;
  Vec3 aligned_axis;  // varsigma * beta0
  double tau_rate = 0.0;  // d tau / dt in physical time
  Vec3 g2;                // g2 on the stable family (independent of tau)
  Vec3 x_offset;          // first-order equilibrium offset x
};

HighAPrediction higha_predict(const PSpectrum& sp, const SwimmerModel& model,
                              const Parameters& params);

/// Predicted lab frame at time t: leading order (order 0) or with the O(1/a)
/// corrections from x and the fast oscillation (order 1).
FrameState higha_frames(const HighAPrediction& pred, const PSpectrum& sp, const SwimmerModel& model,
                        const Parameters& params, double t, double tau0, int order);

/// Magnetic-frame position of m implied by higha_frames.
Vec3 higha_curve_point(const HighAPrediction& pred, const PSpectrum& sp, const SwimmerModel& model,
                       const Parameters& params, double t, double tau0, int order);

// ---------------------------------------------------------------------------
// Small conical angle

struct SmallPsiPrediction {
  double epsilon = 0.0;  // sin psi
  double a = 0.0;
  int varsigma = 1;
  int order = 1;
  std::vector<std::string> warnings;

  // Closed forms as displayed (A matrix, tau tilde coefficients, c0..c4, r, m0).
  Mat2 A = Mat2::Zero();
  double det = 0.0;  // det(a^2 I + A^2)
  double tilde_tau1 = 0.0;
  double tilde_tau2 = 0.0;
  std::array<double, 5> c{};
  Vec3 center_m0 = Vec3::Zero();
  double radius_r = 0.0;

  // Harmonic solution of the first-order equations: (u1, u2) = K (cos th, sin th)
  // and tau1 = tau1_cos cos th + tau1_sin sin th, th = a t + tau0.
  Mat2 K = Mat2::Zero();
  double tau1_cos = 0.0;
  double tau1_sin = 0.0;
  Vec3 harmonic_center = Vec3::Zero();
  double harmonic_radius = 0.0;

  // Second order (order = 2): u2 = const + cos2 cos 2th + sin2 sin 2th in (beta1, beta2).
  Vec2 u2_const = Vec2::Zero();
  Vec2 u2_cos2 = Vec2::Zero();
  Vec2 u2_sin2 = Vec2::Zero();
  double tau2_rate = 0.0;  // mean of d tau2 / dt
};

SmallPsiPrediction smallpsi_predict(const SwimmerModel& model, const PSpectrum& sp,
                                    const Parameters& params, int order);

/// First-order deviation (u1, u2) at phase th.
Vec2 smallpsi_u1(const SmallPsiPrediction& pred, double th);

/// Magnetic-frame position of m at phase th, to the prediction's order.
Vec3 smallpsi_curve_point(const SmallPsiPrediction& pred, double th);

/// Curve sampled at n equally spaced phases.
std::vector<Vec3> smallpsi_curve(const SmallPsiPrediction& pred, int n);

}  // namespace magswim
