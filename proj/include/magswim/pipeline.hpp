#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "magswim/analysis.hpp"
#include "magswim/asymptotics.hpp"
#include "magswim/orbits.hpp"

namespace magswim {

/// Four standard normals, normalized.
Vec4 random_quaternion(std::mt19937_64& rng);
/// n draws from one mt19937_64 stream seeded with `seed`.
std::vector<Vec4> random_quaternions(std::uint64_t seed, int n);

struct SimulationSettings {
  IntegratorConfig integrator;
  ShootingConfig shooting;
  double transient = 50.0;
  double horizon = 100.0;
  double sample_dt = 0.1;
  double record_from = 0.0;  // samples before this are dropped
  double steady_tol = 1e-8;
  double recurrence_tol = 1e-3;
  bool shoot = true;
  int max_extensions = 6;  // doublings of the horizon while undetermined
};

/// Transient per default_transient, horizon covering three slow periods (or
/// field revolutions), and a sampling step capped at 2e5 samples.
SimulationSettings default_settings(const PSpectrum& sp, const Parameters& params);

struct SimulationOutcome {
  Parameters params;
  Vec4 initial = Vec4(0, 0, 0, 1);
  SimulationSettings settings;
  Trajectory trajectory;
  Classification classification;
  std::optional<PeriodicOrbit> orbit;
  std::string orbit_error;
  double max_norm_deviation = 0.0;  // max | |q| - 1 | over accepted steps
  std::size_t steps = 0;
  int extensions = 0;  // settings.transient / horizon describe the final window
};

/// Direct integration, classification, and (for periodic runs) shooting.
SimulationOutcome simulate(const SwimmerModel& model, const Parameters& params, const Vec4& q0,
                           const SimulationSettings& settings);

/// High-a observables of a run (samples after the transient).
struct HighAMeasurement {
  double max_alignment_error = 0.0;  // max |e3 - varsigma beta0|
  double drift_rate = 0.0;           // fitted d tau / dt
  double predicted_rate = 0.0;
  double drift_intercept = 0.0;
  CurveDistance curve_distance;      // numeric vs order-1 prediction at matched times
};

HighAMeasurement measure_higha(const SwimmerModel& model, const PSpectrum& sp,
                               const SimulationOutcome& run);

/// Settings for high-a runs: long enough after alignment to resolve the slow drift.
SimulationSettings higha_settings(const PSpectrum& sp, const Parameters& params, double window = 2000.0);

struct SmallPsiMeasurement {
  CircleFit fit;
  SmallPsiPrediction order1;
  SmallPsiPrediction order2;
  CurveDistance distance_order1;  // numeric curve vs predicted order-1 curve
  CurveDistance distance_order2;
};

SmallPsiMeasurement measure_smallpsi(const SwimmerModel& model, const PSpectrum& sp,
                                     const SimulationOutcome& run, int curve_samples = 2000);

/// Settings for small-psi runs: transient past the inner layer, a few field periods recorded.
SimulationSettings smallpsi_settings(const PSpectrum& sp, const Parameters& params);

}  // namespace magswim
