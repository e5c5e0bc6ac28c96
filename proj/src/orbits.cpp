#include "magswim/orbits.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <unsupported/Eigen/AutoDiff>

#include "magswim/hash.hpp"

namespace magswim {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using AD6 = Eigen::AutoDiffScalar<Vec6>;

VecX augmented_rhs(const VecX& y, const Mat3& p) {
  VecX dy = VecX::Zero(6);
  dy.head<4>() = rhs_quaternion_corrected(Vec4(y.head<4>()), y(4), y(5), p);
  return dy;
}

MatX augmented_jacobian(const VecX& y, const Mat3& p) {
  Vector4<AD6> q;
  for (int i = 0; i < 4; ++i) q(i) = AD6(y(i), 6, i);
  const AD6 a(y(4), 6, 4);
  const AD6 psi(y(5), 6, 5);
  const Vector4<AD6> f = rhs_quaternion_corrected(q, a, psi, p);
  MatX jac = MatX::Zero(6, 6);
  for (int i = 0; i < 4; ++i) jac.row(i) = f(i).derivatives().transpose();
  return jac;
}

double golden_minimum(const std::function<double(double)>& g, double lo, double hi, double& arg) {
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double g1 = g(x1);
  double g2 = g(x2);
  for (int it = 0; it < 100 && hi - lo > 1e-13 * (1.0 + std::abs(hi)); ++it) {
    if (g1 < g2) {
      hi = x2;
      x2 = x1;
      g2 = g1;
      x1 = hi - ratio * (hi - lo);
      g1 = g(x1);
    } else {
      lo = x1;
      x1 = x2;
      g1 = g2;
      x2 = lo + ratio * (hi - lo);
      g2 = g(x2);
    }
  }
  arg = g1 < g2 ? x1 : x2;
  return std::min(g1, g2);
}

}  // namespace

double default_transient(double mason) {
  return std::max(50.0, 10.0 * 2.0 * std::numbers::pi / mason);
}

namespace {

// Refines the return near sample j (bracket [j-1, j+1]) and reports the
// closing distance and time.
using Refiner = std::function<double(std::size_t j, double s, double& t_best)>;

RecurrenceCandidate scan_recurrence(const Trajectory& traj, double transient, double tol,
                                    double leave, const Refiner& refine) {
  const auto first = std::lower_bound(traj.times.begin(), traj.times.end(), transient);
  if (first == traj.times.end()) throw OrbitError("trajectory ends before the transient");
  const std::size_t i0 = static_cast<std::size_t>(first - traj.times.begin());
  const Vec4 q0 = traj.states[i0];
  const double t0 = traj.times[i0];

  auto dist = [&](std::size_t j) { return orientation_distance(Vec4(traj.states[j]), q0); };

  // sampled data: a return is only visible to within the local sample spacing
  double spacing = 0.0;
  if (i0 + 1 < traj.size()) spacing = (Vec4(traj.states[i0 + 1]) - q0).norm();
  if (i0 > 0) spacing = std::max(spacing, (Vec4(traj.states[i0 - 1]) - q0).norm());
  const double window = std::max(leave, 2.0 * spacing);

  bool left = false;
  for (std::size_t j = i0 + 1; j + 1 < traj.size(); ++j) {
    const double d = dist(j);
    if (!left) {
      left = d > window;
      continue;
    }
    if (d >= window || d > dist(j - 1) || d > dist(j + 1)) continue;

    const Vec4 qj = traj.states[j];
    const bool symmetric = (qj + q0).norm() < (qj - q0).norm();
    const double s = symmetric ? -1.0 : 1.0;
    double t_best = traj.times[j];
    double d_best = d;
    if (refine) d_best = refine(j, s, t_best);
    if (d_best < tol) {
      RecurrenceCandidate c;
      c.q0 = q0;
      c.t0 = t0;
      c.period = t_best - t0;
      c.symmetric = symmetric;
      c.distance = d_best;
      return c;
    }
  }
  throw OrbitError(left ? "no recurrence within the trajectory"
                        : "trajectory never left the neighbourhood of its starting point");
}

}  // namespace

RecurrenceCandidate detect_recurrence(const Trajectory& traj, double transient, double tol,
                                      double leave) {
  Refiner refine;
  if (!traj.dense.empty()) {
    const auto first = std::lower_bound(traj.times.begin(), traj.times.end(), transient);
    const Vec4 q0 = first == traj.times.end() ? Vec4::Zero().eval()
                                              : Vec4(traj.states[first - traj.times.begin()]);
    refine = [&traj, q0](std::size_t j, double s, double& t_best) {
      auto g = [&](double t) { return (Vec4(traj.at(t)) - s * q0).norm(); };
      return golden_minimum(g, traj.times[j - 1], traj.times[j + 1], t_best);
    };
  }
  return scan_recurrence(traj, transient, tol, leave, refine);
}

RecurrenceCandidate detect_recurrence(const Trajectory& traj, const SwimmerModel& model,
                                      const Parameters& params, double transient,
                                      const IntegratorConfig& cfg, double tol, double leave) {
  if (!traj.dense.empty()) return detect_recurrence(traj, transient, tol, leave);
  const auto first = std::lower_bound(traj.times.begin(), traj.times.end(), transient);
  if (first == traj.times.end()) throw OrbitError("trajectory ends before the transient");
  const Vec4 q0 = traj.states[static_cast<std::size_t>(first - traj.times.begin())];
  const VectorField rhs = [&](double, const VecX& y) -> VecX {
    return rhs_quaternion_corrected(Vec4(y), params, model);
  };
  const Refiner refine = [&](std::size_t j, double s, double& t_best) {
    IntegratorConfig local = cfg;
    local.store_dense = true;
    local.sample_dt = 0.0;
    local.record_from = -std::numeric_limits<double>::infinity();
    const double lo = traj.times[j - 1];
    const double hi = traj.times[j + 1];
    const IntegrationResult res = integrate(rhs, traj.states[j - 1], lo, hi, local);
    auto g = [&](double t) { return (Vec4(res.trajectory.at(t)) - s * q0).norm(); };
    return golden_minimum(g, lo, hi, t_best);
  };
  return scan_recurrence(traj, transient, tol, leave, refine);
}

std::string to_string(Behaviour behaviour) {
  switch (behaviour) {
    case Behaviour::steady: return "steady";
    case Behaviour::periodic: return "periodic";
    case Behaviour::undetermined: return "undetermined";
  }
  return "undetermined";
}

Classification classify_trajectory(const Trajectory& traj, const SwimmerModel& model,
                                   const Parameters& params, double transient,
                                   const IntegratorConfig& cfg, double steady_tol,
                                   double recurrence_tol) {
  if (traj.empty()) throw OrbitError("empty trajectory");
  Classification out;
  out.final_speed = rhs_quaternion_corrected(Vec4(traj.states.back()), params, model).norm();
  if (out.final_speed < steady_tol) {
    out.behaviour = Behaviour::steady;
    out.detail = "|dq/dt| below steady tolerance";
    return out;
  }
  try {
    out.candidate = detect_recurrence(traj, model, params, transient, cfg, recurrence_tol);
    out.behaviour = Behaviour::periodic;
  } catch (const OrbitError& e) {
    out.behaviour = Behaviour::undetermined;
    out.detail = e.what();
  }
  return out;
}

ShootingConfig default_shooting_config(double mason) {
  ShootingConfig cfg;
  cfg.integrator.max_step = default_config_for(mason).max_step;
  return cfg;
}

FlowDerivatives quaternion_flow(const Vec4& q, double T, const SwimmerModel& model,
                                const Parameters& params, const IntegratorConfig& cfg) {
  VecX y0(6);
  y0 << q, params.a, params.psi;
  const Mat3 p = model.p;
  const VectorField rhs = [p](double, const VecX& y) { return augmented_rhs(y, p); };
  const JacobianField jac = [p](double, const VecX& y) { return augmented_jacobian(y, p); };
  const FlowSensitivity fs = flow_map_with_sensitivity(rhs, y0, T, cfg, jac);
  FlowDerivatives out;
  out.end = fs.state.head<4>();
  out.dq = fs.jacobian.topLeftCorner<4, 4>();
  out.dparams = fs.jacobian.block<4, 2>(0, 4);
  return out;
}

void assign_floquet(PeriodicOrbit& orbit, const Eigen::Matrix4d& monodromy) {
  Eigen::HouseholderQR<Eigen::Matrix<double, 4, 1>> qr(orbit.q0);
  const Eigen::Matrix4d basis = qr.householderQ();
  const Eigen::Matrix<double, 4, 3> v = basis.rightCols<3>();
  const Mat3 restricted = v.transpose() * (orbit.sign() * monodromy) * v;
  Eigen::EigenSolver<Mat3> es(restricted, false);
  std::vector<std::complex<double>> mu(es.eigenvalues().data(), es.eigenvalues().data() + 3);
  const auto trivial = std::min_element(mu.begin(), mu.end(), [](auto x, auto y) {
    return std::abs(x - 1.0) < std::abs(y - 1.0);
  });
  std::iter_swap(mu.begin(), trivial);
  std::sort(mu.begin() + 1, mu.end(), [](auto x, auto y) {
    if (std::abs(x) != std::abs(y)) return std::abs(x) > std::abs(y);
    return x.imag() > y.imag();
  });
  orbit.floquet = mu;
  orbit.trivial_distance = std::abs(mu[0] - 1.0);
  orbit.max_nontrivial_abs = std::max(std::abs(mu[1]), std::abs(mu[2]));
}

PeriodicOrbit shoot_periodic(const RecurrenceCandidate& candidate, const SwimmerModel& model,
                             const Parameters& params, const ShootingConfig& cfg) {
  validate(params);
  if (!(candidate.period > 0.0)) throw OrbitError("shooting needs a positive period guess");
  const double s = candidate.symmetric ? -1.0 : 1.0;
  Vec4 q = candidate.q0;
  double T = candidate.period;
  const Vec4 q_ref = q;
  const Vec4 f_ref = rhs_quaternion_corrected(q_ref, params, model);

  for (int it = 0; it <= cfg.max_iterations; ++it) {
    const FlowDerivatives fd = quaternion_flow(q, T, model, params, cfg.integrator);
    Eigen::Matrix<double, 5, 1> r;
    r.head<4>() = fd.end - s * q;
    r(4) = f_ref.dot(q - q_ref);
    const double res = r.norm();
    if (res < cfg.tol) {
      PeriodicOrbit orbit;
      orbit.q0 = q;
      orbit.period = T;
      orbit.quaternion_symmetric = candidate.symmetric;
      orbit.params = params;
      orbit.residual = res;
      orbit.iterations = it;
      assign_floquet(orbit, fd.dq);
      return orbit;
    }
    if (it == cfg.max_iterations) break;

    Eigen::Matrix<double, 5, 5> jac = Eigen::Matrix<double, 5, 5>::Zero();
    jac.topLeftCorner<4, 4>() = fd.dq - s * Eigen::Matrix4d::Identity();
    jac.block<4, 1>(0, 4) = rhs_quaternion_corrected(fd.end, params, model);
    jac.block<1, 4>(4, 0) = f_ref.transpose();
    Eigen::JacobiSVD<Eigen::Matrix<double, 5, 5>> svd(jac, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto sv = svd.singularValues();
    if (sv(4) <= 1e-14 * sv(0)) throw OrbitError("singular bordered shooting Jacobian");
    const Eigen::Matrix<double, 5, 1> dx = svd.solve(-r);
    q += dx.head<4>();
    T += dx(4);
    if (!(T > 0.0) || !std::isfinite(T)) throw OrbitError("shooting produced a nonpositive period");
  }
  throw OrbitError("Newton stagnation after " + std::to_string(cfg.max_iterations) + " iterations");
}

double reintegration_residual(const PeriodicOrbit& orbit, const SwimmerModel& model,
                              const IntegratorConfig& cfg) {
  const Parameters params = orbit.params;
  const VectorField rhs = [&](double, const VecX& y) -> VecX {
    return rhs_quaternion_corrected(Vec4(y), params, model);
  };
  IntegratorConfig quiet = cfg;
  quiet.store_dense = false;
  quiet.record_from = std::numeric_limits<double>::infinity();
  const IntegrationResult res = integrate(rhs, orbit.q0, 0.0, orbit.period, quiet);
  return (Vec4(res.final_state) - orbit.sign() * orbit.q0).norm();
}

Vec4 time_reversal_quaternion() { return quaternion_from_rotation(rotation_y(std::numbers::pi)); }

double time_reversal_residual(const PeriodicOrbit& orbit, const SwimmerModel& model, int samples,
                              const IntegratorConfig& cfg) {
  if (samples < 1) throw std::invalid_argument("time_reversal_residual needs samples >= 1");
  const Parameters params = orbit.params;
  const VectorField rhs = [&](double, const VecX& y) -> VecX {
    return rhs_quaternion_corrected(Vec4(y), params, model);
  };
  IntegratorConfig rec = cfg;
  rec.store_dense = false;
  rec.record_from = 0.0;
  rec.sample_dt = orbit.period / samples;
  const IntegrationResult res = integrate(rhs, orbit.q0, 0.0, orbit.period, rec);
  const Vec4 r = time_reversal_quaternion();
  double worst = 0.0;
  for (const VecX& y : res.trajectory.states) {
    const Vec4 q = y;
    const Vec4 lhs = rhs_quaternion_corrected(Vec4(quaternion_multiply(q, r)), params, model);
    const Vec4 image = quaternion_multiply(rhs_quaternion_corrected(q, params, model), r);
    worst = std::max(worst, (lhs + image).norm());
  }
  return worst;
}

std::string to_string(FreeParameter p) { return p == FreeParameter::a ? "a" : "psi"; }

namespace {

using Vec6d = Eigen::Matrix<double, 6, 1>;

// Branch coordinates x = (q, T / T_ref, p).
struct BranchSystem {
  const SwimmerModel& model;
  Parameters base;
  int pidx;
  double s;
  double t_ref;
  ShootingConfig shooting;

  Parameters params_of(const Vec6d& x) const {
    Parameters p = base;
    (pidx == 0 ? p.a : p.psi) = x(5);
    return p;
  }

  // Residual and 5x6 Jacobian with phase reference q_ref.
  void evaluate(const Vec6d& x, const Vec4& q_ref, const Vec4& f_ref,
                Eigen::Matrix<double, 5, 1>& r, Eigen::Matrix<double, 5, 6>& jac,
                Eigen::Matrix4d& monodromy) const {
    const Parameters p = params_of(x);
    IntegratorConfig icfg = shooting.integrator;
    if (pidx == 0) icfg.max_step = std::min(icfg.max_step, default_config_for(p.a).max_step);
    const Vec4 q = x.head<4>();
    const double T = x(4) * t_ref;
    const FlowDerivatives fd = quaternion_flow(q, T, model, p, icfg);
    r.head<4>() = fd.end - s * q;
    r(4) = f_ref.dot(q - q_ref);
    jac.setZero();
    jac.topLeftCorner<4, 4>() = fd.dq - s * Eigen::Matrix4d::Identity();
    jac.block<4, 1>(0, 4) = t_ref * rhs_quaternion_corrected(fd.end, p, model);
    jac.block<4, 1>(0, 5) = fd.dparams.col(pidx);
    jac.block<1, 4>(4, 0) = f_ref.transpose();
    monodromy = fd.dq;
  }

  static Vec6d null_vector(const Eigen::Matrix<double, 5, 6>& jac) {
    Eigen::JacobiSVD<Eigen::Matrix<double, 5, 6>> svd(jac, Eigen::ComputeFullV);
    return svd.matrixV().col(5);
  }
};

BranchPoint make_point(const BranchSystem& sys, const Vec6d& x, const Eigen::Matrix4d& monodromy,
                       double residual, int iterations) {
  BranchPoint bp;
  bp.params = sys.params_of(x);
  bp.orbit.q0 = x.head<4>();
  bp.orbit.period = x(4) * sys.t_ref;
  bp.orbit.quaternion_symmetric = sys.s < 0;
  bp.orbit.params = bp.params;
  bp.orbit.residual = residual;
  bp.orbit.iterations = iterations;
  assign_floquet(bp.orbit, monodromy);
  bp.stable = bp.orbit.stable();
  return bp;
}

void append_event(BranchPoint& point, const std::string& kind) {
  point.event = point.event.empty() ? kind : point.event + "|" + kind;
}

}  // namespace

ContinuationBranch continue_branch(const PeriodicOrbit& seed, const SwimmerModel& model,
                                   FreeParameter free_parameter, const ContinuationConfig& cfg) {
  if (!(cfg.lower <= cfg.upper)) throw std::invalid_argument("continuation range: lower > upper");
  if (!(cfg.min_step > 0.0 && cfg.initial_step >= cfg.min_step && cfg.max_step >= cfg.initial_step))
    throw std::invalid_argument("continuation steps must satisfy 0 < min <= initial <= max");

  ContinuationBranch branch;
  branch.free_parameter = free_parameter;
  const int pidx = free_parameter == FreeParameter::a ? 0 : 1;
  const BranchSystem sys{model, seed.params, pidx, static_cast<double>(seed.sign()), seed.period,
                         cfg.shooting};

  Vec6d x;
  x << seed.q0, 1.0, pidx == 0 ? seed.params.a : seed.params.psi;
  if (x(5) < cfg.lower || x(5) > cfg.upper) throw std::invalid_argument("seed outside the continuation range");

  Eigen::Matrix<double, 5, 1> r;
  Eigen::Matrix<double, 5, 6> jac;
  Eigen::Matrix4d mono;
  Vec4 f_ref = rhs_quaternion_corrected(Vec4(x.head<4>()), sys.params_of(x), model);
  sys.evaluate(x, x.head<4>(), f_ref, r, jac, mono);
  branch.points.push_back(make_point(sys, x, mono, r.norm(), seed.iterations));
  if (cfg.lower == cfg.upper) return branch;

  Vec6d tangent = BranchSystem::null_vector(jac);
  if (tangent(5) * cfg.direction < 0.0) tangent = -tangent;
  Vec6d previous = x;
  double h = cfg.initial_step;

  while (static_cast<int>(branch.points.size()) < cfg.max_points) {
    const Vec6d direction =
        branch.points.size() > 1 ? Vec6d((x - previous).normalized()) : tangent;
    const Vec4 q_ref = x.head<4>();
    f_ref = rhs_quaternion_corrected(q_ref, sys.params_of(x), model);

    bool converged = false;
    int iterations = 0;
    Vec6d y;
    while (!converged) {
      const Vec6d predicted = x + h * direction;
      y = predicted;
      for (iterations = 0; iterations < cfg.corrector_iterations; ++iterations) {
        sys.evaluate(y, q_ref, f_ref, r, jac, mono);
        if (!r.allFinite()) break;
        if (r.norm() < cfg.shooting.tol) {
          converged = true;
          break;
        }
        Eigen::Matrix<double, 6, 6> full;
        full.topRows<5>() = jac;
        full.row(5) = direction.transpose();
        Eigen::Matrix<double, 6, 1> rhs;
        rhs.head<5>() = -r;
        rhs(5) = -direction.dot(y - predicted);
        y += full.fullPivLu().solve(rhs);
        if (!(y(4) > 0.0)) break;
      }
      if (converged) break;
      h /= 2.0;
      if (h < cfg.min_step) break;
    }

    if (!converged) {
      branch.truncated = true;
      append_event(branch.points.back(), "truncated");
      std::ostringstream msg;
      msg << "corrector failed with step below " << cfg.min_step;
      branch.events.push_back({"truncated", branch.points.size() - 1, x(5), msg.str()});
      break;
    }

    const bool out_of_range = y(5) < cfg.lower || y(5) > cfg.upper;
    if (out_of_range) {
      // land exactly on the range end
      const double bound = y(5) < cfg.lower ? cfg.lower : cfg.upper;
      const double frac = (bound - x(5)) / (y(5) - x(5));
      RecurrenceCandidate c;
      c.q0 = x.head<4>() + frac * (y.head<4>() - x.head<4>());
      c.period = (x(4) + frac * (y(4) - x(4))) * sys.t_ref;
      c.symmetric = sys.s < 0;
      Vec6d xb = y;
      xb(5) = bound;
      try {
        const PeriodicOrbit end = shoot_periodic(c, model, sys.params_of(xb), cfg.shooting);
        BranchPoint bp;
        bp.params = end.params;
        bp.orbit = end;
        bp.stable = end.stable();
        bp.event = "end";
        if (bp.stable != branch.points.back().stable) {
          append_event(bp, "stability_change");
          branch.events.push_back({"stability_change", branch.points.size(), bound, ""});
        }
        branch.points.push_back(bp);
      } catch (const OrbitError& e) {
        append_event(branch.points.back(), "end");
      }
      break;
    }

    BranchPoint bp = make_point(sys, y, mono, r.norm(), iterations);
    Vec6d new_tangent = BranchSystem::null_vector(jac);
    if (new_tangent.dot(y - x) < 0.0) new_tangent = -new_tangent;
    if (new_tangent(5) * tangent(5) < 0.0) {
      append_event(bp, "fold");
      branch.events.push_back({"fold", branch.points.size(), y(5), ""});
    }
    if (bp.stable != branch.points.back().stable) {
      append_event(bp, "stability_change");
      std::ostringstream msg;
      msg << "max nontrivial |mu| " << branch.points.back().orbit.max_nontrivial_abs << " -> "
          << bp.orbit.max_nontrivial_abs;
      branch.events.push_back({"stability_change", branch.points.size(), y(5), msg.str()});
    }
    branch.points.push_back(bp);
    tangent = new_tangent;
    previous = x;
    x = y;
    if (iterations <= 3) h = std::min(1.5 * h, cfg.max_step);
  }
  return branch;
}

std::vector<std::string> branch_csv_rows(const ContinuationBranch& branch) {
  std::vector<std::string> rows;
  rows.reserve(branch.points.size());
  for (const BranchPoint& p : branch.points) {
    rows.push_back(format17(p.params.a) + "," + format17(p.params.psi) + "," +
                   format17(p.orbit.period) + "," + (p.orbit.quaternion_symmetric ? "1" : "0") +
                   "," + format17(p.orbit.max_nontrivial_abs) + "," + (p.stable ? "1" : "0") +
                   "," + p.event);
  }
  return rows;
}

}  // namespace magswim
