#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "magswim/types.hpp"

namespace magswim {

using VectorField = std::function<VecX(double t, const VecX& y)>;
using JacobianField = std::function<MatX(double t, const VecX& y)>;
using EventFunction = std::function<double(double t, const VecX& y)>;

struct IntegratorConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-10;
  double max_step = std::numeric_limits<double>::infinity();
  double initial_step = 0.0;  // 0 selects the step automatically
  std::size_t max_steps = 200'000'000;

  // Recording. Nothing before record_from is kept. sample_dt > 0 stores a
  // uniform grid (via dense output) instead of every accepted step.
  bool store_dense = false;
  double record_from = -std::numeric_limits<double>::infinity();
  double sample_dt = 0.0;
};

void validate(const IntegratorConfig& cfg);

/// max_step = min(0.1, 0.1 / a): resolves both the unit and the 1/a timescale.
IntegratorConfig default_config_for(double mason);

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double t, VecX state)
      : std::runtime_error(what), last_time(t), last_state(std::move(state)) {}
  double last_time;
  VecX last_state;
};

/// Continuous extension of one Dormand-Prince step (4th order, exact at both ends).
class DenseStep {
 public:
  DenseStep() = default;
  DenseStep(double t0, double h, VecX y0, VecX y1, VecX dy, VecX c3, VecX c4, VecX c5)
      : t0_(t0), h_(h), y0_(std::move(y0)), y1_(std::move(y1)), dy_(std::move(dy)),
        c3_(std::move(c3)), c4_(std::move(c4)), c5_(std::move(c5)) {}

  double t0() const { return t0_; }
  double t1() const { return t0_ + h_; }
  VecX operator()(double t) const;

 private:
  double t0_ = 0.0;
  double h_ = 0.0;
  VecX y0_, y1_, dy_, c3_, c4_, c5_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<VecX> states;
  std::vector<DenseStep> dense;  // one per accepted step when store_dense

  bool empty() const { return times.empty(); }
  std::size_t size() const { return times.size(); }
  /// Dense evaluation; requires store_dense.
  VecX at(double t) const;
};

struct EventRecord {
  std::size_t index = 0;  // which event function
  double time = 0.0;
  VecX state;
};

struct IntegrationResult {
  Trajectory trajectory;
  std::vector<EventRecord> events;
  double final_time = 0.0;
  VecX final_state;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
};

/// Called once per accepted step.
using StepObserver = std::function<void(const DenseStep& step)>;

/// Adaptive Dormand-Prince 5(4) from t0 to t1.
IntegrationResult integrate(const VectorField& rhs, const VecX& y0, double t0, double t1,
                            const IntegratorConfig& cfg,
                            const std::vector<EventFunction>& events = {},
                            const StepObserver& observer = {});

struct FlowSensitivity {
  VecX state;
  MatX jacobian;  // d state(T) / d y0
};

/// Central-difference Jacobian with step sqrt(eps) * (1 + |y|).
MatX finite_difference_jacobian(const VectorField& rhs, double t, const VecX& y);

/// Flow map over [0, T] together with its derivative, from the variational
/// equations. Falls back to finite differences when jac is empty.
FlowSensitivity flow_map_with_sensitivity(const VectorField& rhs, const VecX& y0, double T,
                                          const IntegratorConfig& cfg,
                                          const JacobianField& jac = {});

}  // namespace magswim
