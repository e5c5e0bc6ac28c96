#include "magswim/analysis.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace magswim {

MagneticFrameCurve magnetic_frame_curve(const Trajectory& traj, const SwimmerModel& model) {
  MagneticFrameCurve curve;
  curve.times = traj.times;
  curve.points.reserve(traj.size());
  for (const VecX& q : traj.states) {
    curve.points.push_back(quat_to_rotation(Vec4(q)).transpose() * model.m);
  }
  return curve;
}

CircleFit fit_circle(const std::vector<Vec3>& points) {
  if (points.size() < 10) throw std::invalid_argument("fit_circle needs at least 10 samples");
  const double n = static_cast<double>(points.size());
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : points) mean += p;
  mean /= n;
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : points) cov += (p - mean) * (p - mean).transpose();
  cov /= n;

  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 ev = eig.eigenvalues();  // ascending
  CircleFit fit;
  fit.normal = eig.eigenvectors().col(0);
  if (ev(1) <= 1e-12 * std::max(ev(2), 1e-12)) {
    fit.degenerate = true;
    fit.center = mean;
    double acc = 0.0;
    for (const Vec3& p : points) acc += (p - mean).squaredNorm();
    fit.rms_residual = std::sqrt(acc / n);
    return fit;
  }
  const Vec3 ex = eig.eigenvectors().col(2);
  const Vec3 ey = eig.eigenvectors().col(1);

  std::vector<Vec2> xy;
  xy.reserve(points.size());
  for (const Vec3& p : points) xy.emplace_back((p - mean).dot(ex), (p - mean).dot(ey));

  // algebraic fit: x^2 + y^2 + D x + E y + F = 0
  Eigen::MatrixX3d M(xy.size(), 3);
  Eigen::VectorXd rhs(xy.size());
  for (std::size_t i = 0; i < xy.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    M.row(r) << xy[i](0), xy[i](1), 1.0;
    rhs(r) = -xy[i].squaredNorm();
  }
  const Vec3 dEF = M.colPivHouseholderQr().solve(rhs);
  Vec2 c(-dEF(0) / 2, -dEF(1) / 2);
  double radius = std::sqrt(std::max(c.squaredNorm() - dEF(2), 0.0));

  // geometric refinement on (cx, cy, r)
  for (int it = 0; it < 50; ++it) {
    Eigen::MatrixX3d jac(xy.size(), 3);
    Eigen::VectorXd res(xy.size());
    for (std::size_t i = 0; i < xy.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const Vec2 d = xy[i] - c;
      const double dist = d.norm();
      res(r) = dist - radius;
      if (dist > 0.0) {
        jac.row(r) << -d(0) / dist, -d(1) / dist, -1.0;
      } else {
        jac.row(r) << 0.0, 0.0, -1.0;
      }
    }
    const Vec3 step = jac.colPivHouseholderQr().solve(-res);
    c += step.head<2>();
    radius += step(2);
    if (step.norm() <= 1e-15 * (1.0 + radius)) break;
  }

  fit.radius = std::abs(radius);
  fit.center = mean + c(0) * ex + c(1) * ey;
  double acc = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 d = points[i] - fit.center;
    const double h = d.dot(fit.normal);
    const double in_plane = (d - h * fit.normal).norm();
    acc += h * h + (in_plane - fit.radius) * (in_plane - fit.radius);
  }
  fit.rms_residual = std::sqrt(acc / n);
  return fit;
}

CircleFit fit_circle(const MagneticFrameCurve& curve, double t_lo, double t_hi) {
  std::vector<Vec3> window;
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    if (curve.times[i] >= t_lo && curve.times[i] <= t_hi) window.push_back(curve.points[i]);
  }
  return fit_circle(window);
}

double compare_period(double numeric_period, const LowAPrediction& analytic) {
  if (analytic.regime != LowAPrediction::Regime::periodic) {
    throw RegimeError("analytic prediction is in the " + to_string(analytic.regime) +
                      " regime; periods are incomparable");
  }
  return std::abs(numeric_period - analytic.period_t) / analytic.period_t;
}

namespace {

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + s * ab)).norm();
}

}  // namespace

CurveDistance compare_curves(const std::vector<Vec3>& numeric, const std::vector<Vec3>& predicted,
                             bool closed) {
  if (predicted.empty()) throw std::invalid_argument("compare_curves: empty predicted curve");
  CurveDistance out;
  if (numeric.empty()) return out;
  const std::size_t m = predicted.size();
  const std::size_t segments = m == 1 ? 1 : (closed ? m : m - 1);
  double total = 0.0;
  for (const Vec3& p : numeric) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < segments; ++j) {
      best = std::min(best, segment_distance(p, predicted[j], predicted[(j + 1) % m]));
    }
    out.max = std::max(out.max, best);
    total += best;
  }
  out.mean = total / static_cast<double>(numeric.size());
  return out;
}

std::vector<double> frame_drift_angle(const Trajectory& traj, const PSpectrum& sp,
                                      const Parameters& params) {
  std::vector<double> angle;
  angle.reserve(traj.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const FrameState f = frames_from_quaternion(Vec4(traj.states[i]), traj.times[i], params);
    const double raw = std::atan2(f.e1.dot(sp.beta2), f.e1.dot(sp.beta1));
    double value = raw;
    if (i > 0) value = prev + std::remainder(raw - prev, 2 * std::numbers::pi);
    angle.push_back(value);
    prev = value;
  }
  return angle;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line needs >= 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

}  // namespace magswim
