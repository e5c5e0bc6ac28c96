#include "magswim/integrator.hpp"

#include <algorithm>
#include <cmath>

namespace magswim {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;
constexpr double kFacMax = 5.0;

double error_norm(const VecX& err, const VecX& y0, const VecX& y1, const IntegratorConfig& cfg) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y0(i)), std::abs(y1(i)));
    const double r = err(i) / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(err.size(), 1)));
}

double rms_scaled(const VecX& v, const VecX& y0, const IntegratorConfig& cfg) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y0(i));
    acc += (v(i) / sc) * (v(i) / sc);
  }
  return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(v.size(), 1)));
}

// Hairer & Wanner starting step heuristic.
double initial_step(const VectorField& rhs, double t0, const VecX& y0, const VecX& f0,
                    double span, const IntegratorConfig& cfg) {
  const double n0 = rms_scaled(y0, y0, cfg);
  const double n1 = rms_scaled(f0, y0, cfg);
  double h0 = (n0 < 1e-5 || n1 < 1e-5) ? 1e-6 : 0.01 * n0 / n1;
  h0 = std::min({h0, span, cfg.max_step});
  const VecX y1 = y0 + h0 * f0;
  const VecX f1 = rhs(t0 + h0, y1);
  const double n2 = rms_scaled(f1 - f0, y0, cfg) / h0;
  const double m = std::max(n1, n2);
  const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 1.0 / 5.0);
  return std::min({100.0 * h0, h1, span, cfg.max_step});
}

}  // namespace

void validate(const IntegratorConfig& cfg) {
  auto in_range = [](double tol) { return tol >= 1e-14 && tol <= 1e-2; };
  if (!in_range(cfg.rel_tol) || !in_range(cfg.abs_tol)) {
    throw std::invalid_argument("integrator tolerances must lie in [1e-14, 1e-2]");
  }
  if (!(cfg.max_step > 0.0)) throw std::invalid_argument("max_step must be positive");
  if (cfg.initial_step < 0.0) throw std::invalid_argument("initial_step must be >= 0");
  if (cfg.sample_dt < 0.0) throw std::invalid_argument("sample_dt must be >= 0");
}

IntegratorConfig default_config_for(double mason) {
  IntegratorConfig cfg;
  cfg.max_step = std::min(0.1, 0.1 / mason);
  return cfg;
}

VecX DenseStep::operator()(double t) const {
  if (t <= t0_) return y0_;
  if (t >= t1()) return y1_;
  const double theta = h_ == 0.0 ? 0.0 : (t - t0_) / h_;
  const double theta1 = 1.0 - theta;
  return y0_ + theta * (dy_ + theta1 * (c3_ + theta * (c4_ + theta1 * c5_)));
}

VecX Trajectory::at(double t) const {
  if (dense.empty()) throw std::logic_error("trajectory has no dense output");
  auto it = std::upper_bound(dense.begin(), dense.end(), t,
                             [](double v, const DenseStep& s) { return v < s.t1(); });
  if (it == dense.end()) it = std::prev(dense.end());
  return (*it)(t);
}

IntegrationResult integrate(const VectorField& rhs, const VecX& y0, double t0, double t1,
                            const IntegratorConfig& cfg, const std::vector<EventFunction>& events,
                            const StepObserver& observer) {
  validate(cfg);
  if (!(t1 >= t0)) throw std::invalid_argument("integrate: t1 must not precede t0");

  IntegrationResult out;
  Trajectory& traj = out.trajectory;
  const double span = t1 - t0;
  const bool sampling = cfg.sample_dt > 0.0;
  const double sample_origin = std::isfinite(cfg.record_from) ? std::max(cfg.record_from, t0) : t0;
  std::size_t next_sample = 0;

  auto record_point = [&](double t, const VecX& y) {
    traj.times.push_back(t);
    traj.states.push_back(y);
  };

  if (!sampling && t0 >= cfg.record_from) record_point(t0, y0);
  if (sampling && sample_origin == t0) {
    record_point(t0, y0);
    next_sample = 1;
  }

  out.final_time = t0;
  out.final_state = y0;
  if (span == 0.0) return out;

  const double event_tol = 1e-12 * span;
  std::vector<double> g_prev(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) g_prev[i] = events[i](t0, y0);

  double t = t0;
  VecX y = y0;
  VecX k1 = rhs(t, y);
  double h = cfg.initial_step > 0.0 ? std::min(cfg.initial_step, cfg.max_step)
                                    : initial_step(rhs, t0, y0, k1, span, cfg);
  bool last_rejected = false;

  while (t < t1) {
    if (out.accepted_steps + out.rejected_steps >= cfg.max_steps) {
      throw IntegrationError("integrate: maximum number of steps exceeded", t, y);
    }
    if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
      throw IntegrationError("integrate: step size underflow", t, y);
    }
    h = std::min(h, cfg.max_step);
    const bool final_step = t + h >= t1;
    if (final_step) h = t1 - t;

    const VecX k2 = rhs(t + c2 * h, y + h * (a21 * k1));
    const VecX k3 = rhs(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const VecX k4 = rhs(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const VecX k5 = rhs(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const VecX k6 =
        rhs(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const VecX y_new = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const double t_new = final_step ? t1 : t + h;
    const VecX k7 = rhs(t_new, y_new);

    const VecX err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = error_norm(err, y, y_new, cfg);
    if (!std::isfinite(en)) {
      h *= kFacMin;
      last_rejected = true;
      ++out.rejected_steps;
      continue;
    }
    if (en > 1.0) {
      h *= std::max(kFacMin, kSafety * std::pow(en, -0.2));
      last_rejected = true;
      ++out.rejected_steps;
      continue;
    }

    ++out.accepted_steps;
    const VecX dy = y_new - y;
    const VecX bspl = h * k1 - dy;
    DenseStep step(t, t_new - t, y, y_new, dy, bspl, dy - h * k7 - bspl,
                   h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7));

    for (std::size_t i = 0; i < events.size(); ++i) {
      const double g_new = events[i](t_new, y_new);
      const double g_old = g_prev[i];
      if ((g_old < 0.0 && g_new >= 0.0) || (g_old > 0.0 && g_new <= 0.0)) {
        double lo = t, hi = t_new;
        double g_lo = g_old;
        while (hi - lo > event_tol) {
          const double mid = 0.5 * (lo + hi);
          if (mid <= lo || mid >= hi) break;
          const double g_mid = events[i](mid, step(mid));
          if ((g_lo < 0.0) == (g_mid < 0.0) && g_mid != 0.0) {
            lo = mid;
            g_lo = g_mid;
          } else {
            hi = mid;
          }
        }
        const double te = 0.5 * (lo + hi);
        out.events.push_back({i, te, step(te)});
      }
      g_prev[i] = g_new;
    }

    if (sampling) {
      while (true) {
        const double ts = sample_origin + static_cast<double>(next_sample) * cfg.sample_dt;
        if (ts > t_new || ts > t1) break;
        if (ts >= t) record_point(ts, ts == t_new ? y_new : step(ts));
        ++next_sample;
      }
    } else if (t_new >= cfg.record_from) {
      record_point(t_new, y_new);
    }
    if (observer) observer(step);
    if (cfg.store_dense && t_new >= cfg.record_from) traj.dense.push_back(std::move(step));

    t = t_new;
    y = y_new;
    k1 = k7;

    double fac = kSafety * std::pow(std::max(en, 1e-10), -0.2);
    fac = std::clamp(fac, kFacMin, kFacMax);
    if (last_rejected) fac = std::min(fac, 1.0);
    last_rejected = false;
    h *= fac;
  }

  out.final_time = t;
  out.final_state = y;
  return out;
}

MatX finite_difference_jacobian(const VectorField& rhs, double t, const VecX& y) {
  const Eigen::Index n = y.size();
  const double step = std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + y.norm());
  MatX jac(n, n);
  VecX yp = y;
  for (Eigen::Index j = 0; j < n; ++j) {
    yp(j) = y(j) + step;
    const VecX fp = rhs(t, yp);
    yp(j) = y(j) - step;
    const VecX fm = rhs(t, yp);
    yp(j) = y(j);
    jac.col(j) = (fp - fm) / (2.0 * step);
  }
  return jac;
}

FlowSensitivity flow_map_with_sensitivity(const VectorField& rhs, const VecX& y0, double T,
                                          const IntegratorConfig& cfg, const JacobianField& jac) {
  const Eigen::Index n = y0.size();
  VecX z0(n + n * n);
  z0.head(n) = y0;
  z0.tail(n * n) = Eigen::Map<const VecX>(MatX::Identity(n, n).eval().data(), n * n);

  VectorField augmented = [&](double t, const VecX& z) {
    const VecX y = z.head(n);
    const MatX j = jac ? jac(t, y) : finite_difference_jacobian(rhs, t, y);
    const Eigen::Map<const MatX> phi(z.data() + n, n, n);
    VecX dz(n + n * n);
    dz.head(n) = rhs(t, y);
    Eigen::Map<MatX>(dz.data() + n, n, n) = j * phi;
    return dz;
  };

  IntegratorConfig quiet = cfg;
  quiet.store_dense = false;
  quiet.record_from = std::numeric_limits<double>::infinity();
  quiet.sample_dt = 0.0;
  const IntegrationResult res = integrate(augmented, z0, 0.0, T, quiet);
  FlowSensitivity out;
  out.state = res.final_state.head(n);
  out.jacobian = Eigen::Map<const MatX>(res.final_state.data() + n, n, n);
  return out;
}

}  // namespace magswim
