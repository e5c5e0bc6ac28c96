#pragma once

#include <vector>

#include "magswim/asymptotics.hpp"
#include "magswim/dynamics.hpp"
#include "magswim/integrator.hpp"

namespace magswim {

/// Positions Q^T m of the magnetic moment in the magnetic frame.
struct MagneticFrameCurve {
  std::vector<double> times;
  std::vector<Vec3> points;
};

MagneticFrameCurve magnetic_frame_curve(const Trajectory& traj, const SwimmerModel& model);

struct CircleFit {
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double radius = 0.0;
  double rms_residual = 0.0;
  bool degenerate = false;
};

/// Least-squares circle in the principal plane of the points: algebraic fit
/// followed by geometric Gauss-Newton refinement.
CircleFit fit_circle(const std::vector<Vec3>& points);
/// Same, restricted to samples with t in [t_lo, t_hi].
CircleFit fit_circle(const MagneticFrameCurve& curve, double t_lo, double t_hi);

/// |T_num - T_ana| / T_ana; throws RegimeError unless the prediction is periodic.
double compare_period(double numeric_period, const LowAPrediction& analytic);

struct CurveDistance {
  double max = 0.0;
  double mean = 0.0;
};

/// One-sided Hausdorff distance from the numeric samples to the predicted
/// polyline (closed when `closed`).
CurveDistance compare_curves(const std::vector<Vec3>& numeric, const std::vector<Vec3>& predicted,
                             bool closed = true);

/// Unwrapped angle of e1 about beta0 in the (beta1, beta2) plane, per sample.
std::vector<double> frame_drift_angle(const Trajectory& traj, const PSpectrum& sp,
                                      const Parameters& params);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace magswim
