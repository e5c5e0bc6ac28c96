#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "magswim/analysis.hpp"
#include "test_support.hpp"

using namespace magswim;

namespace {

std::vector<Vec3> circle_points(const Vec3& center, const Vec3& normal, double radius, int n,
                                double phase = 0.3) {
  const Vec3 u = normal.unitOrthogonal();
  const Vec3 v = normal.normalized().cross(u);
  std::vector<Vec3> pts;
  for (int k = 0; k < n; ++k) {
    const double th = phase + 2 * std::numbers::pi * k / n;
    pts.push_back(center + radius * (std::cos(th) * u + std::sin(th) * v));
  }
  return pts;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  return quat_to_rotation(Vec4(n01(rng), n01(rng), n01(rng), n01(rng)));
}

}  // namespace

TEST_CASE("fit_circle: exact recovery of a noise-free circle") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 center(n01(rng), n01(rng), n01(rng));
    const Vec3 normal = Vec3(n01(rng), n01(rng), n01(rng)).normalized();
    const double radius = 0.01 + std::abs(n01(rng));
    const CircleFit fit = fit_circle(circle_points(center, normal, radius, 37));
    CHECK_FALSE(fit.degenerate);
    CHECK((fit.center - center).norm() < 1e-12);
    CHECK(std::abs(fit.radius - radius) < 1e-12);
    CHECK(fit.rms_residual < 1e-12);
    CHECK(std::abs(std::abs(fit.normal.dot(normal)) - 1.0) < 1e-12);
  }
}

TEST_CASE("fit_circle: partial arc and small radii") {
  std::vector<Vec3> arc;
  for (int k = 0; k < 30; ++k) {
    const double th = 0.05 * k;
    arc.emplace_back(0.5 + 1e-3 * std::cos(th), -0.2 + 1e-3 * std::sin(th), 0.8);
  }
  const CircleFit fit = fit_circle(arc);
  CHECK((fit.center - Vec3(0.5, -0.2, 0.8)).norm() < 1e-12);
  CHECK(fit.radius == doctest::Approx(1e-3).epsilon(1e-9));
}

TEST_CASE("fit_circle is covariant under rigid motions") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<Vec3> pts;
  for (int k = 0; k < 50; ++k) {
    const double th = 0.13 * k;
    pts.emplace_back(0.3 * std::cos(th) + 0.01 * n01(rng), 0.3 * std::sin(th) + 0.01 * n01(rng),
                     0.02 * n01(rng));
  }
  const CircleFit base = fit_circle(pts);
  for (int trial = 0; trial < 5; ++trial) {
    const Mat3 rot = random_rotation(rng);
    const Vec3 shift(n01(rng), n01(rng), n01(rng));
    std::vector<Vec3> moved;
    for (const Vec3& p : pts) moved.push_back(rot * p + shift);
    const CircleFit fit = fit_circle(moved);
    CHECK(std::abs(fit.radius - base.radius) < 1e-12);
    CHECK((fit.center - (rot * base.center + shift)).norm() < 1e-12);
    CHECK(std::abs(fit.rms_residual - base.rms_residual) < 1e-12);
  }
}

TEST_CASE("fit_circle degenerate inputs") {
  const std::vector<Vec3> same(12, Vec3(0.1, 0.2, 0.97));
  const CircleFit fixed = fit_circle(same);
  CHECK(fixed.degenerate);
  CHECK(fixed.radius == 0.0);
  CHECK((fixed.center - Vec3(0.1, 0.2, 0.97)).norm() < 1e-15);

  std::vector<Vec3> line;
  for (int k = 0; k < 12; ++k) line.emplace_back(0.1 * k, 0.2 * k, 1.0);
  const CircleFit collinear = fit_circle(line);
  CHECK(collinear.degenerate);
  CHECK(collinear.radius == 0.0);
  CHECK((collinear.center - Vec3(0.55, 1.1, 1.0)).norm() < 1e-12);

  CHECK_THROWS_AS(fit_circle(std::vector<Vec3>(9, Vec3::UnitZ())), std::invalid_argument);
}

TEST_CASE("fit_circle time window") {
  MagneticFrameCurve curve;
  const auto inner = circle_points(Vec3(0, 0, 1), Vec3::UnitZ(), 0.1, 40);
  const auto outer = circle_points(Vec3(0, 0, 1), Vec3::UnitZ(), 0.5, 40);
  for (int k = 0; k < 40; ++k) {
    curve.times.push_back(k);
    curve.points.push_back(outer[static_cast<std::size_t>(k)]);
  }
  for (int k = 0; k < 40; ++k) {
    curve.times.push_back(40 + k);
    curve.points.push_back(inner[static_cast<std::size_t>(k)]);
  }
  CHECK(fit_circle(curve, 40.0, 100.0).radius == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(fit_circle(curve, 0.0, 39.0).radius == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(fit_circle(curve, 200.0, 300.0), std::invalid_argument);
}

TEST_CASE("compare_period") {
  LowAPrediction p;
  p.regime = LowAPrediction::Regime::periodic;
  p.period_t = 1256.637;
  CHECK(compare_period(1256.637, p) == 0.0);
  CHECK(compare_period(1256.637 * 1.01, p) == doctest::Approx(0.01));
  p.regime = LowAPrediction::Regime::equilibrium;
  CHECK_THROWS_AS(compare_period(10.0, p), RegimeError);
}

TEST_CASE("compare_curves") {
  const auto c = circle_points(Vec3(0, 0, 1), Vec3::UnitZ(), 0.2, 400);
  CurveDistance d = compare_curves(c, c);
  CHECK(d.max == 0.0);
  CHECK(d.mean == 0.0);

  std::vector<Vec3> lifted;
  for (const Vec3& p : c) lifted.push_back(p + Vec3(0, 0, 1e-3));
  d = compare_curves(lifted, c);
  CHECK(d.max == doctest::Approx(1e-3).epsilon(1e-9));
  CHECK(d.mean == doctest::Approx(1e-3).epsilon(1e-9));

  // phase-free: a shifted sampling of the same circle is at polyline distance only
  const auto shifted = circle_points(Vec3(0, 0, 1), Vec3::UnitZ(), 0.2, 400, 1.234);
  CHECK(compare_curves(shifted, c).max < 0.2 * (1 - std::cos(std::numbers::pi / 400)) + 1e-15);

  // open polyline: the closing segment is not used
  const std::vector<Vec3> seg{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0)};
  CHECK(compare_curves({Vec3(0.5, 0.5, 0)}, seg, true).max == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(compare_curves({Vec3(0.5, 0.5, 0)}, seg, false).max == doctest::Approx(0.5));
  CHECK_THROWS_AS(compare_curves(c, {}), std::invalid_argument);
}

TEST_CASE("magnetic_frame_curve") {
  SUBCASE("relative equilibrium collapses to a point") {
    const SwimmerModel iso = isotropic_model();
    const Parameters params{0.5, 0.5};
    const VectorField rhs = [&](double, const VecX& y) -> VecX {
      return rhs_quaternion_corrected(Vec4(y), params, iso);
    };
    IntegratorConfig cfg;
    cfg.record_from = 150.0;
    cfg.sample_dt = 0.5;
    const Trajectory traj = integrate(rhs, Vec4(0.2, 0.1, -0.3, 0.9).normalized(), 0.0, 200.0, cfg).trajectory;
    const MagneticFrameCurve curve = magnetic_frame_curve(traj, iso);
    const CircleFit fit = fit_circle(curve.points);
    CHECK(fit.degenerate);
    CHECK(fit.rms_residual < 1e-8);
    // fixed point of n' = -a z x n + (n x b) x n for the isotropic swimmer
    const double e = std::sin(0.5);
    CHECK(fit.center(0) == doctest::Approx(e / 1.25).epsilon(0.05));
    CHECK(fit.center(1) == doctest::Approx(-e * 0.5 / 1.25).epsilon(0.05));
  }
  SUBCASE("unit norm and the field triangle bound") {
    const SwimmerModel helix = magswim::testing::helix_model();
    const Parameters params{0.8, 0.6};
    const VectorField rhs = [&](double, const VecX& y) -> VecX {
      return rhs_quaternion_corrected(Vec4(y), params, helix);
    };
    IntegratorConfig cfg;
    cfg.sample_dt = 0.25;
    const Trajectory traj = integrate(rhs, Vec4(0.5, -0.1, 0.3, 0.8).normalized(), 0.0, 300.0, cfg).trajectory;
    const MagneticFrameCurve curve = magnetic_frame_curve(traj, helix);
    const Vec3 b = params.field_magnetic();
    for (const Vec3& p : curve.points) {
      CHECK(std::abs(p.norm() - 1.0) < 1e-9);
      const double to_b = std::acos(std::clamp(p.dot(b), -1.0, 1.0));
      const double to_z = std::acos(std::clamp(p(2), -1.0, 1.0));
      CHECK(std::abs(to_b - to_z) <= params.psi + 1e-12);
    }
  }
}

TEST_CASE("fit_line") {
  const std::vector<double> x{0, 1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(-0.25 * v + 3.0);
  const LineFit f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(-0.25).epsilon(1e-14));
  CHECK(f.intercept == doctest::Approx(3.0).epsilon(1e-14));
  CHECK_THROWS_AS(fit_line({1.0}, {2.0}), std::invalid_argument);
}

TEST_CASE("frame_drift_angle follows a uniform spin about beta0") {
  const SwimmerModel helix = magswim::testing::helix_model();
  const PSpectrum sp = compute_spectrum(helix);
  const Parameters params{3.0, 0.4};
  const double rate = -0.02;
  Trajectory traj;
  for (int k = 0; k < 200; ++k) {
    const double t = 0.5 * k;
    const double tau = 0.1 + rate * t;
    FrameState f;
    f.e1 = std::cos(tau) * sp.beta1 + std::sin(tau) * sp.beta2;
    f.e2 = -std::sin(tau) * sp.beta1 + std::cos(tau) * sp.beta2;
    f.e3 = sp.beta0;
    traj.times.push_back(t);
    traj.states.push_back(quaternion_from_frames(f, t, params));
  }
  const std::vector<double> angle = frame_drift_angle(traj, sp, params);
  const LineFit fit = fit_line(traj.times, angle);
  CHECK(fit.slope == doctest::Approx(rate).epsilon(1e-10));
  CHECK(fit.intercept == doctest::Approx(0.1).epsilon(1e-10));
}
