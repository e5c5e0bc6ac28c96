#include "magswim/pipeline.hpp"

#include <cmath>
#include <numbers>

namespace magswim {

Vec4 random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vec4 q;
  do {
    for (int i = 0; i < 4; ++i) q(i) = n01(rng);
  } while (q.norm() == 0.0);
  return q.normalized();
}

std::vector<Vec4> random_quaternions(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::vector<Vec4> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) out.push_back(random_quaternion(rng));
  return out;
}

SimulationSettings default_settings(const PSpectrum& sp, const Parameters& params) {
  SimulationSettings s;
  s.integrator = default_config_for(params.a);
  s.shooting = default_shooting_config(params.a);
  s.transient = default_transient(params.a);
  const double revolution = 2.0 * std::numbers::pi / params.a;
  double slow = revolution;
  const LowAPrediction low = lowa_predict(sp, params);
  if (low.regime == LowAPrediction::Regime::periodic) slow = std::max(slow, low.period_t);
  s.horizon = s.transient + 3.0 * slow;
  s.sample_dt = std::max(revolution / 64.0, s.horizon / 2e5);
  s.record_from = 0.0;
  return s;
}

SimulationOutcome simulate(const SwimmerModel& model, const Parameters& params, const Vec4& q0,
                           const SimulationSettings& settings) {
  validate(params);
  if (!(settings.horizon > settings.transient))
    throw std::invalid_argument("horizon must exceed the transient");
  SimulationOutcome out;
  out.params = params;
  out.initial = q0;
  out.settings = settings;

  const VectorField rhs = [&](double, const VecX& y) -> VecX {
    return rhs_quaternion_corrected(Vec4(y), params, model);
  };
  IntegratorConfig cfg = settings.integrator;
  cfg.store_dense = false;
  cfg.record_from = settings.record_from;
  cfg.sample_dt = settings.sample_dt;
  double worst = std::abs(q0.norm() - 1.0);
  const StepObserver observer = [&](const DenseStep& step) {
    worst = std::max(worst, std::abs(step(step.t1()).norm() - 1.0));
  };
  IntegrationResult res = integrate(rhs, q0, 0.0, settings.horizon, cfg, {}, observer);
  out.steps = res.accepted_steps;
  out.trajectory = std::move(res.trajectory);

  out.classification = classify_trajectory(out.trajectory, model, params, settings.transient, cfg,
                                           settings.steady_tol, settings.recurrence_tol);
  // Undetermined runs continue from the final state; each extension doubles the
  // total time and only the new segment is classified.
  while (out.classification.behaviour == Behaviour::undetermined &&
         out.extensions < settings.max_extensions) {
    const double t_from = res.final_time;
    const double t_to = 2.0 * t_from;
    cfg.record_from = t_from;
    res = integrate(rhs, res.final_state, t_from, t_to, cfg, {}, observer);
    out.steps += res.accepted_steps;
    ++out.extensions;
    Trajectory& traj = out.trajectory;
    for (std::size_t i = 0; i < res.trajectory.size(); ++i) {
      if (!traj.empty() && res.trajectory.times[i] <= traj.times.back()) continue;
      traj.times.push_back(res.trajectory.times[i]);
      traj.states.push_back(res.trajectory.states[i]);
    }
    out.settings.transient = t_from;
    out.settings.horizon = t_to;
    out.classification = classify_trajectory(traj, model, params, t_from, cfg, settings.steady_tol,
                                             settings.recurrence_tol);
  }
  out.max_norm_deviation = worst;
  if (settings.shoot && out.classification.candidate) {
    try {
      out.orbit = shoot_periodic(*out.classification.candidate, model, params, settings.shooting);
    } catch (const OrbitError& e) {
      out.orbit_error = e.what();
    }
  }
  return out;
}

SimulationSettings higha_settings(const PSpectrum& sp, const Parameters& params, double window) {
  SimulationSettings s = default_settings(sp, params);
  s.transient = std::max(s.transient, 10.0 / std::min(sp.sigma1, sp.sigma2));
  s.horizon = s.transient + window;
  // the norm drift of the fast rotation scales like a * tol
  const double tol = 1e-10 * std::min(1.0, 10.0 / params.a);
  s.integrator.rel_tol = tol;
  s.integrator.abs_tol = tol;
  s.sample_dt = std::max(2.0 * std::numbers::pi / params.a / 16.0, window / 2e5);
  s.record_from = s.transient;
  s.shoot = false;
  s.max_extensions = 0;
  return s;
}

SimulationSettings smallpsi_settings(const PSpectrum& sp, const Parameters& params) {
  SimulationSettings s = default_settings(sp, params);
  const double revolution = 2.0 * std::numbers::pi / params.a;
  s.integrator.rel_tol = 1e-11;
  s.integrator.abs_tol = 1e-12;
  s.transient = std::max({200.0, 40.0 / params.a, 40.0 / std::min(sp.sigma1, sp.sigma2)});
  s.horizon = s.transient + 3.0 * revolution;
  s.sample_dt = revolution / 400.0;
  s.record_from = s.transient;
  s.shoot = false;
  s.max_extensions = 0;
  return s;
}

HighAMeasurement measure_higha(const SwimmerModel& model, const PSpectrum& sp,
                               const SimulationOutcome& run) {
  const Parameters& params = run.params;
  const HighAPrediction pred = higha_predict(sp, model, params);
  HighAMeasurement m;
  m.predicted_rate = pred.tau_rate;

  Trajectory window;
  for (std::size_t i = 0; i < run.trajectory.size(); ++i) {
    if (run.trajectory.times[i] < run.settings.transient) continue;
    window.times.push_back(run.trajectory.times[i]);
    window.states.push_back(run.trajectory.states[i]);
  }
  if (window.size() < 2) throw std::invalid_argument("measure_higha: no samples after the transient");
  for (std::size_t i = 0; i < window.size(); ++i) {
    const FrameState f = frames_from_quaternion(Vec4(window.states[i]), window.times[i], params);
    m.max_alignment_error = std::max(m.max_alignment_error, (f.e3 - pred.aligned_axis).norm());
  }
  const std::vector<double> angle = frame_drift_angle(window, sp, params);
  const LineFit line = fit_line(window.times, angle);
  m.drift_rate = line.slope;
  m.drift_intercept = line.intercept;

  // shape comparison over the last 20 field revolutions
  const double revolution = 2.0 * std::numbers::pi / params.a;
  const double t_end = window.times.back();
  const double t_start = std::max(window.times.front(), t_end - 20.0 * revolution);
  const MagneticFrameCurve numeric = magnetic_frame_curve(window, model);
  std::vector<Vec3> tail;
  for (std::size_t i = 0; i < numeric.times.size(); ++i)
    if (numeric.times[i] >= t_start) tail.push_back(numeric.points[i]);
  std::vector<Vec3> predicted;
  const int fine = static_cast<int>(std::ceil((t_end - t_start) / revolution * 128.0));
  for (int k = 0; k <= fine; ++k) {
    const double t = t_start + (t_end - t_start) * k / std::max(fine, 1);
    predicted.push_back(higha_curve_point(pred, sp, model, params, t, line.intercept, 1));
  }
  m.curve_distance = compare_curves(tail, predicted, false);
  return m;
}

SmallPsiMeasurement measure_smallpsi(const SwimmerModel& model, const PSpectrum& sp,
                                     const SimulationOutcome& run, int curve_samples) {
  std::vector<Vec3> points;
  const MagneticFrameCurve curve = magnetic_frame_curve(run.trajectory, model);
  for (std::size_t i = 0; i < curve.times.size(); ++i)
    if (curve.times[i] >= run.settings.transient) points.push_back(curve.points[i]);
  SmallPsiMeasurement m;
  m.fit = fit_circle(points);
  m.order1 = smallpsi_predict(model, sp, run.params, 1);
  m.order2 = smallpsi_predict(model, sp, run.params, 2);
  m.distance_order1 = compare_curves(points, smallpsi_curve(m.order1, curve_samples));
  m.distance_order2 = compare_curves(points, smallpsi_curve(m.order2, curve_samples));
  return m;
}

}  // namespace magswim
