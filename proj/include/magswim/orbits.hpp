#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "magswim/dynamics.hpp"
#include "magswim/integrator.hpp"
#include "magswim/model.hpp"

namespace magswim {

class OrbitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RecurrenceCandidate {
  Vec4 q0 = Vec4(0, 0, 0, 1);
  double t0 = 0.0;
  double period = 0.0;  // SO(3) period
  bool symmetric = false;
  double distance = 0.0;  // double-cover-aware closing distance
};

/// Smallest t* > 0 after `transient` at which the trajectory returns to +-q(t0)
/// within `tol`. The trajectory must first move further than `leave` from q(t0).
/// Uses dense output for refinement when available. Throws OrbitError when no
/// return is found.
RecurrenceCandidate detect_recurrence(const Trajectory& traj, double transient, double tol = 1e-3,
                                      double leave = 1e-2);

/// Same, for trajectories recorded without dense output: candidate returns are
/// refined by re-integrating across the bracketing sample interval.
RecurrenceCandidate detect_recurrence(const Trajectory& traj, const SwimmerModel& model,
                                      const Parameters& params, double transient,
                                      const IntegratorConfig& cfg, double tol = 1e-3,
                                      double leave = 1e-2);

/// Default transient: 50 time units or 10 field revolutions, whichever is larger.
double default_transient(double mason);

enum class Behaviour { steady, periodic, undetermined };
std::string to_string(Behaviour behaviour);

struct Classification {
  Behaviour behaviour = Behaviour::undetermined;
  std::optional<RecurrenceCandidate> candidate;
  double final_speed = 0.0;  // |dq/dt| at the last sample
  std::string detail;
};

/// Steady when |dq/dt| < steady_tol at the end; otherwise periodic if a
/// recurrence is found after the transient.
Classification classify_trajectory(const Trajectory& traj, const SwimmerModel& model,
                                   const Parameters& params, double transient,
                                   const IntegratorConfig& cfg, double steady_tol = 1e-8,
                                   double recurrence_tol = 1e-3);

struct PeriodicOrbit {
  Vec4 q0 = Vec4(0, 0, 0, 1);
  double period = 0.0;  // SO(3) period, physical time
  bool quaternion_symmetric = false;
  /// Spectrum of s M restricted to the tangent space of the unit sphere at q0.
  std::vector<std::complex<double>> floquet;
  Parameters params;

  double residual = 0.0;
  int iterations = 0;
  double trivial_distance = 0.0;  // |mu_trivial - 1|
  double max_nontrivial_abs = 0.0;
  bool stable() const { return max_nontrivial_abs < 1.0; }
  int sign() const { return quaternion_symmetric ? -1 : 1; }
};

struct ShootingConfig {
  double tol = 1e-10;
  int max_iterations = 25;
  IntegratorConfig integrator = {1e-12, 1e-13};
};

/// Shooting config with the integrator step bounded by default_config_for(a).
ShootingConfig default_shooting_config(double mason);

/// Flow map of the corrected quaternion system with derivatives with respect
/// to q and to (a, psi).
struct FlowDerivatives {
  Vec4 end;
  Eigen::Matrix4d dq;
  Eigen::Matrix<double, 4, 2> dparams;
};

FlowDerivatives quaternion_flow(const Vec4& q, double T, const SwimmerModel& model,
                                const Parameters& params, const IntegratorConfig& cfg);

/// Newton shooting on [Phi_T(q) - s q; <f(q_ref), q - q_ref>] in (q, T).
PeriodicOrbit shoot_periodic(const RecurrenceCandidate& candidate, const SwimmerModel& model,
                             const Parameters& params, const ShootingConfig& cfg = {});

/// Restricted multipliers of s M at q0; fills floquet, trivial_distance and
/// max_nontrivial_abs.
void assign_floquet(PeriodicOrbit& orbit, const Eigen::Matrix4d& monodromy);

/// Plain re-integration: distance of Phi_T(q0) from s q0.
double reintegration_residual(const PeriodicOrbit& orbit, const SwimmerModel& model,
                              const IntegratorConfig& cfg);

/// The map Q(t) -> Q(-t) R_y(pi) sends solutions to solutions. Returns the
/// largest defect |f(q r) + f(q) r| over n samples of the orbit.
double time_reversal_residual(const PeriodicOrbit& orbit, const SwimmerModel& model, int samples,
                              const IntegratorConfig& cfg);

/// Quaternion of the rotation by pi about the second axis.
Vec4 time_reversal_quaternion();

enum class FreeParameter { a, psi };
std::string to_string(FreeParameter p);

struct ContinuationConfig {
  double lower = 0.0;
  double upper = 0.0;
  int direction = 1;  // initial sense of the free parameter
  double initial_step = 0.02;
  double min_step = 1e-5;
  double max_step = 0.1;
  int max_points = 400;
  int corrector_iterations = 10;
  ShootingConfig shooting;
};

struct BranchPoint {
  Parameters params;
  PeriodicOrbit orbit;
  bool stable = false;
  std::string event;  // "", "fold", "stability_change", "truncated", "end"
};

struct BranchEvent {
  std::string kind;  // fold, stability_change, truncated
  std::size_t index = 0;
  double parameter = 0.0;
  std::string detail;
};

struct ContinuationBranch {
  FreeParameter free_parameter = FreeParameter::psi;
  std::vector<BranchPoint> points;
  std::vector<BranchEvent> events;
  bool truncated = false;
};

/// Pseudo-arclength continuation with secant predictor and shooting corrector.
ContinuationBranch continue_branch(const PeriodicOrbit& seed, const SwimmerModel& model,
                                   FreeParameter free_parameter, const ContinuationConfig& cfg);

/// CSV rows (without header) for a branch: a, psi, period, symmetric,
/// max_nontrivial_multiplier_abs, stable, event.
std::vector<std::string> branch_csv_rows(const ContinuationBranch& branch);
inline constexpr const char* branch_csv_header =
    "a,psi,period,symmetric,max_nontrivial_multiplier_abs,stable,event";

}  // namespace magswim
