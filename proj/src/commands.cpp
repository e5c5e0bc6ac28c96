#include "magswim/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <thread>

#include "magswim/hash.hpp"

namespace magswim {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kLowAReferenceBound = 7.6922e-5;
constexpr double kOverlapThreshold = 1e-3;

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out;
}

std::string f17(double v) { return format17(v); }

// Free text inside a CSV cell.
std::string cell_text(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

json vec_json(const VecX& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json params_json(const Parameters& p) { return {{"a", p.a}, {"psi", p.psi}}; }

std::string cell_tag(std::size_t ia, std::size_t ip) {
  return std::to_string(ia) + "_" + std::to_string(ip);
}

struct GridCell {
  std::size_t ia = 0;
  std::size_t ip = 0;
  Parameters params;
};

std::vector<GridCell> grid_cells(const RunConfig& run) {
  std::vector<GridCell> cells;
  for (std::size_t ia = 0; ia < run.a_grid.size(); ++ia)
    for (std::size_t ip = 0; ip < run.psi_grid.size(); ++ip)
      cells.push_back({ia, ip, Parameters{run.a_grid[ia], run.psi_grid[ip]}});
  return cells;
}

fs::path prepare_out_dir(const RunConfig& run) {
  const fs::path dir(run.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw OutputError("cannot create output directory '" + run.out_dir + "': " + ec.message());
  return dir;
}

std::vector<Vec4> initial_conditions(const RunConfig& run) {
  if (run.initial_quaternion) return {*run.initial_quaternion};
  return random_quaternions(run.seed, run.n_random_ic);
}

Provenance provenance(const ResolvedConfig& cfg, const SwimmerModel& model) {
  return {cfg.run.hash, model_hash(model)};
}

json settings_json(const SimulationSettings& s) {
  return {{"transient", s.transient},
          {"horizon", s.horizon},
          {"sample_dt", s.sample_dt},
          {"rel_tol", s.integrator.rel_tol},
          {"abs_tol", s.integrator.abs_tol},
          {"max_step", s.integrator.max_step}};
}

SimulationOutcome run_with_context(const SwimmerModel& model, const Parameters& params, const Vec4& q0,
                                   const SimulationSettings& settings, const std::string& label) {
  try {
    return simulate(model, params, q0, settings);
  } catch (const IntegrationError& e) {
    throw IntegrationError(label + ": " + e.what(), e.last_time, e.last_state);
  }
}

std::string run_label(const Parameters& p, std::size_t ic) {
  return "run a=" + f17(p.a) + " psi=" + f17(p.psi) + " ic=" + std::to_string(ic);
}

}  // namespace

ResolvedConfig resolve_config(const CommandOptions& options) {
  ResolvedConfig out;
  if (!options.config_path.empty()) out.map = parse_config_file(options.config_path);
  else out.map.base_dir = ".";
  ConfigMap& m = out.map;
  if (options.out_dir) m.set("output.dir", *options.out_dir);
  if (options.seed) m.set("run.seed", std::to_string(*options.seed));
  if (options.regime) m.set("predict.regime", *options.regime);
  if (options.order) m.set("predict.order", std::to_string(*options.order));
  if (options.free_parameter) m.set("continue.free", *options.free_parameter);
  if (options.range) {
    m.set("continue.lower", f17(options.range->first));
    m.set("continue.upper", f17(options.range->second));
  }
  if (options.threads) m.set("run.threads", std::to_string(*options.threads));
  out.run = load_run_config(m);
  return out;
}

void write_csv(const std::string& path, const Provenance& prov, const std::string& columns,
               const std::vector<std::string>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw OutputError("cannot write '" + path + "'");
  os << "# config_hash=" << prov.config_hash << " model_hash=" << prov.model_hash << '\n';
  os << columns << '\n';
  for (const std::string& r : rows) os << r << '\n';
  if (!os) throw OutputError("write failed for '" + path + "'");
}

void write_json(const std::string& path, const Provenance& prov, json body) {
  body["config_hash"] = prov.config_hash;
  body["model_hash"] = prov.model_hash;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw OutputError("cannot write '" + path + "'");
  os << body.dump(2) << '\n';
  if (!os) throw OutputError("write failed for '" + path + "'");
}

SimulationSettings settings_for(const RunConfig& cfg, const PSpectrum& sp, const Parameters& params) {
  SimulationSettings s = default_settings(sp, params);
  const double default_span = s.horizon - s.transient;
  s.integrator.rel_tol = cfg.integrator.rel_tol;
  s.integrator.abs_tol = cfg.integrator.abs_tol;
  if (std::isfinite(cfg.integrator.max_step)) s.integrator.max_step = cfg.integrator.max_step;
  s.integrator.initial_step = cfg.integrator.initial_step;
  s.integrator.max_steps = cfg.integrator.max_steps;
  if (cfg.transient) s.transient = *cfg.transient;
  if (cfg.horizon) s.horizon = *cfg.horizon;
  else s.horizon = s.transient + default_span;
  if (!(s.horizon > s.transient))
    throw ConfigError("run.horizon (" + f17(s.horizon) + ") must exceed the transient (" +
                      f17(s.transient) + ")");
  if (cfg.sample_dt > 0.0) s.sample_dt = cfg.sample_dt;
  s.steady_tol = cfg.steady_tol;
  s.recurrence_tol = cfg.recurrence_tol;
  s.max_extensions = cfg.max_extensions;
  return s;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

json orbit_to_json(const PeriodicOrbit& orbit) {
  json floquet = json::array();
  for (const auto& mu : orbit.floquet) floquet.push_back({mu.real(), mu.imag()});
  return {{"a", orbit.params.a},
          {"psi", orbit.params.psi},
          {"q0", vec_json(orbit.q0)},
          {"period", orbit.period},
          {"symmetric", orbit.quaternion_symmetric},
          {"residual", orbit.residual},
          {"iterations", orbit.iterations},
          {"floquet", floquet},
          {"trivial_distance", orbit.trivial_distance},
          {"max_nontrivial_multiplier_abs", orbit.max_nontrivial_abs},
          {"stable", orbit.stable()}};
}

RecurrenceCandidate load_orbit_file(const std::string& path, Parameters& params) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open orbit file '" + path + "'");
  json j;
  try {
    in >> j;
    params = Parameters{j.at("a").get<double>(), j.at("psi").get<double>()};
    const auto q = j.at("q0").get<std::vector<double>>();
    if (q.size() != 4) throw ConfigError("orbit file '" + path + "': q0 needs 4 components");
    RecurrenceCandidate c;
    c.q0 = Vec4(q[0], q[1], q[2], q[3]);
    c.period = j.at("period").get<double>();
    c.symmetric = j.at("symmetric").get<bool>();
    if (!(c.period > 0.0) || c.q0.norm() == 0.0)
      throw ConfigError("orbit file '" + path + "': invalid period or q0");
    c.q0.normalize();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError("orbit file '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------

json cmd_simulate(const ResolvedConfig& cfg) {
  const RunConfig& run = cfg.run;
  const SwimmerModel model = build_swimmer(run);
  const PSpectrum sp = compute_spectrum(model);
  const Provenance prov = provenance(cfg, model);
  const std::vector<Vec4> ics = initial_conditions(run);
  if (ics.empty()) throw ConfigError("simulate needs run.initial_quaternion or run.n_random_ic > 0");
  const std::vector<GridCell> cells = grid_cells(run);
  const fs::path dir = prepare_out_dir(run);

  struct Job {
    GridCell cell;
    std::size_t ic;
  };
  std::vector<Job> jobs;
  for (const GridCell& c : cells)
    for (std::size_t k = 0; k < ics.size(); ++k) jobs.push_back({c, k});
  // settings are checked up front so configuration errors surface before any integration
  for (const GridCell& c : cells) {
    validate(c.params);
    settings_for(run, sp, c.params);
  }

  std::vector<json> results(jobs.size());
  std::vector<std::string> rows(jobs.size());
  parallel_for(jobs.size(), run.threads, [&](std::size_t i) {
    const Job& job = jobs[i];
    const Parameters& p = job.cell.params;
    const SimulationSettings settings = settings_for(run, sp, p);
    const SimulationOutcome o =
        run_with_context(model, p, ics[job.ic], settings, run_label(p, job.ic));
    const std::string stem = "run_" + cell_tag(job.cell.ia, job.cell.ip) + "_" + std::to_string(job.ic);

    std::vector<std::string> traj_rows;
    traj_rows.reserve(o.trajectory.size());
    for (std::size_t k = 0; k < o.trajectory.size(); ++k) {
      const VecX& q = o.trajectory.states[k];
      traj_rows.push_back(join({f17(o.trajectory.times[k]), f17(q(0)), f17(q(1)), f17(q(2)), f17(q(3))}));
    }
    write_csv((dir / (stem + "_trajectory.csv")).string(), prov, "t,q1,q2,q3,q4", traj_rows);

    const MagneticFrameCurve curve = magnetic_frame_curve(o.trajectory, model);
    std::vector<std::string> curve_rows;
    curve_rows.reserve(curve.times.size());
    for (std::size_t k = 0; k < curve.times.size(); ++k) {
      const Vec3& x = curve.points[k];
      curve_rows.push_back(join({f17(curve.times[k]), f17(x(0)), f17(x(1)), f17(x(2))}));
    }
    write_csv((dir / (stem + "_curve.csv")).string(), prov, "t,x,y,z", curve_rows);
    write_json((dir / (stem + "_curve.json")).string(), prov,
               {{"params", params_json(p)},
                {"frame", "magnetic"},
                {"quantity", "magnetic moment"},
                {"provenance", "direct integration"},
                {"samples", curve.times.size()}});

    json cls{{"params", params_json(p)},
             {"initial_quaternion", vec_json(ics[job.ic])},
             {"settings", settings_json(settings)},
             {"behaviour", to_string(o.classification.behaviour)},
             {"detail", o.classification.detail},
             {"final_speed", o.classification.final_speed},
             {"max_norm_deviation", o.max_norm_deviation},
             {"steps", o.steps},
             {"extensions", o.extensions},
             {"orbit", nullptr}};
    if (o.classification.candidate) {
      const RecurrenceCandidate& c = *o.classification.candidate;
      cls["candidate"] = {{"t0", c.t0}, {"period", c.period}, {"symmetric", c.symmetric},
                          {"distance", c.distance}};
    }
    if (o.orbit) {
      cls["orbit"] = orbit_to_json(*o.orbit);
      write_json((dir / (stem + "_orbit.json")).string(), prov, orbit_to_json(*o.orbit));
    }
    if (!o.orbit_error.empty()) cls["orbit_error"] = o.orbit_error;
    write_json((dir / (stem + "_classification.json")).string(), prov, cls);

    const double period = o.orbit ? o.orbit->period
                                  : (o.classification.candidate ? o.classification.candidate->period : 0.0);
    rows[i] = join({std::to_string(job.cell.ia), std::to_string(job.cell.ip), std::to_string(job.ic),
                    f17(p.a), f17(p.psi), to_string(o.classification.behaviour), f17(period),
                    o.orbit ? (o.orbit->quaternion_symmetric ? "1" : "0") : "",
                    o.orbit ? f17(o.orbit->max_nontrivial_abs) : "",
                    o.orbit ? (o.orbit->stable() ? "1" : "0") : "", f17(o.max_norm_deviation)});
    results[i] = {{"stem", stem}, {"params", params_json(p)},
                  {"behaviour", to_string(o.classification.behaviour)}, {"period", period}};
  });
  write_csv((dir / "simulate_summary.csv").string(), prov,
            "a_index,psi_index,ic,a,psi,behaviour,period,symmetric,max_nontrivial_multiplier_abs,stable,"
            "max_norm_deviation",
            rows);
  return {{"command", "simulate"}, {"out_dir", run.out_dir}, {"runs", results},
          {"config_hash", prov.config_hash}, {"model_hash", prov.model_hash}};
}

// ---------------------------------------------------------------------------

json cmd_predict(const ResolvedConfig& cfg) {
  const RunConfig& run = cfg.run;
  if (run.regime != "lowa" && run.regime != "higha" && run.regime != "smallpsi")
    throw ConfigError("predict.regime must be lowa, higha or smallpsi");
  if (run.regime == "smallpsi" && run.order != 1 && run.order != 2)
    throw ConfigError("smallpsi order must be 1 or 2");
  if (run.regime == "higha" && run.order != 0 && run.order != 1)
    throw ConfigError("higha order must be 0 or 1");
  const SwimmerModel model = build_swimmer(run);
  const PSpectrum sp = compute_spectrum(model);
  const Provenance prov = provenance(cfg, model);
  const fs::path dir = prepare_out_dir(run);
  const json spectrum{{"sigma1", sp.sigma1}, {"sigma2", sp.sigma2}, {"iota", sp.iota}, {"zeta", sp.zeta}};

  json outputs = json::array();
  for (const GridCell& c : grid_cells(run)) {
    const Parameters& p = c.params;
    validate(p);
    const std::string stem = "prediction_" + run.regime + "_" + cell_tag(c.ia, c.ip);
    json body{{"regime", run.regime}, {"params", params_json(p)}, {"spectrum", spectrum}};
    std::vector<std::string> rows;
    std::string columns = "t,x,y,z";

    if (run.regime == "lowa") {
      const LowAPrediction pred = lowa_predict(sp, p);
      body["prediction"] = {{"regime", to_string(pred.regime)},
                            {"direction", to_string(pred.direction)},
                            {"lambda_stable", pred.lambda_stable},
                            {"lambda_unstable", pred.lambda_unstable},
                            {"period_T", std::isfinite(pred.period_T) ? json(pred.period_T) : json(nullptr)},
                            {"period_t", std::isfinite(pred.period_t) ? json(pred.period_t) : json(nullptr)}};
      const bool periodic = pred.regime == LowAPrediction::Regime::periodic;
      const double T_end = periodic ? pred.period_T : 50.0;
      const LowAFlow flow = lowa_reduced_flow(sp, p, 0.0, T_end);
      columns = "T,lambda,e3_x,e3_y,e3_z";
      for (std::size_t k = 0; k < flow.T.size(); ++k) {
        const Vec3 e3 = lowa_axis(sp, p.psi, flow.lambda[k]);
        rows.push_back(join({f17(flow.T[k]), f17(flow.lambda[k]), f17(e3(0)), f17(e3(1)), f17(e3(2))}));
      }
      body["curve"] = {{"quantity", "reduced angle and leading-order axis e3 (body frame)"},
                       {"time", "rescaled T = a t"}, {"lambda0", 0.0}};
    } else if (run.regime == "higha") {
      const HighAPrediction pred = higha_predict(sp, model, p);
      body["order"] = run.order;
      body["prediction"] = {{"epsilon", pred.epsilon},
                            {"varsigma", pred.varsigma},
                            {"aligned_axis", vec_json(pred.aligned_axis)},
                            {"tau_rate", pred.tau_rate},
                            {"g2", vec_json(pred.g2)},
                            {"x_offset", vec_json(pred.x_offset)}};
      const double revolution = 2.0 * std::numbers::pi / p.a;
      for (int k = 0; k < run.samples; ++k) {
        const double t = revolution * k / run.samples;
        const Vec3 x = higha_curve_point(pred, sp, model, p, t, 0.0, run.order);
        rows.push_back(join({f17(t), f17(x(0)), f17(x(1)), f17(x(2))}));
      }
      body["curve"] = {{"quantity", "magnetic moment in the magnetic frame"}, {"tau0", 0.0},
                       {"span", "one field revolution"}};
    } else {
      const SmallPsiPrediction pred = smallpsi_predict(model, sp, p, run.order);
      body["order"] = run.order;
      json pj{{"epsilon", pred.epsilon},
              {"varsigma", pred.varsigma},
              {"det", pred.det},
              {"tilde_tau1", pred.tilde_tau1},
              {"tilde_tau2", pred.tilde_tau2},
              {"c", pred.c},
              {"center_m0", vec_json(pred.center_m0)},
              {"radius_r", pred.radius_r},
              {"harmonic_center", vec_json(pred.harmonic_center)},
              {"harmonic_radius", pred.harmonic_radius},
              {"tau1_cos", pred.tau1_cos},
              {"tau1_sin", pred.tau1_sin},
              {"warnings", pred.warnings}};
      if (run.order == 2) {
        pj["u2_const"] = vec_json(pred.u2_const);
        pj["u2_cos2"] = vec_json(pred.u2_cos2);
        pj["u2_sin2"] = vec_json(pred.u2_sin2);
        pj["tau2_rate"] = pred.tau2_rate;
      }
      body["prediction"] = pj;
      for (int k = 0; k < run.samples; ++k) {
        const double th = 2.0 * std::numbers::pi * k / run.samples;
        const Vec3 x = smallpsi_curve_point(pred, th);
        rows.push_back(join({f17(th / p.a), f17(x(0)), f17(x(1)), f17(x(2))}));
      }
      body["curve"] = {{"quantity", "magnetic moment in the magnetic frame"}, {"tau0", 0.0},
                       {"span", "one field revolution"}};
    }
    body["curve_file"] = stem + ".csv";
    write_csv((dir / (stem + ".csv")).string(), prov, columns, rows);
    write_json((dir / (stem + ".json")).string(), prov, body);
    outputs.push_back({{"params", params_json(p)}, {"json", stem + ".json"}, {"csv", stem + ".csv"},
                       {"prediction", body["prediction"]}});
  }
  return {{"command", "predict"}, {"regime", run.regime}, {"out_dir", run.out_dir},
          {"outputs", outputs}, {"config_hash", prov.config_hash}, {"model_hash", prov.model_hash}};
}

// ---------------------------------------------------------------------------

namespace {

struct SweepRecord {
  Behaviour behaviour = Behaviour::undetermined;
  bool failed = false;
  std::string error;
  Vec4 final_q = Vec4(0, 0, 0, 1);
  double period = 0.0;
  bool converged = false;
  bool symmetric = false;
  bool stable = false;
  double max_nontrivial = 0.0;
  double max_norm_deviation = 0.0;
};

// Representative of one attractor class within a cell.
struct Attractor {
  double period = 0.0;
  bool converged = false;
  bool stable = false;
  Vec4 q = Vec4(0, 0, 0, 1);
};

}  // namespace

json cmd_sweep(const ResolvedConfig& cfg) {
  const RunConfig& run = cfg.run;
  const SwimmerModel model = build_swimmer(run);
  const PSpectrum sp = compute_spectrum(model);
  const Provenance prov = provenance(cfg, model);
  const std::vector<Vec4> ics = random_quaternions(run.seed, run.n_random_ic);
  const std::vector<GridCell> cells = grid_cells(run);
  const fs::path dir = prepare_out_dir(run);
  for (const GridCell& c : cells) validate(c.params);

  const std::size_t n_ic = ics.size();
  std::vector<SweepRecord> records(cells.size() * n_ic);
  parallel_for(records.size(), run.threads, [&](std::size_t i) {
    const GridCell& cell = cells[i / n_ic];
    const std::size_t ic = i % n_ic;
    SweepRecord& r = records[i];
    try {
      SimulationSettings settings = settings_for(run, sp, cell.params);
      settings.record_from = settings.transient;
      const SimulationOutcome o =
          run_with_context(model, cell.params, ics[ic], settings, run_label(cell.params, ic));
      r.behaviour = o.classification.behaviour;
      r.max_norm_deviation = o.max_norm_deviation;
      if (!o.trajectory.empty()) r.final_q = Vec4(o.trajectory.states.back()).normalized();
      if (o.orbit) {
        r.converged = true;
        r.period = o.orbit->period;
        r.symmetric = o.orbit->quaternion_symmetric;
        r.stable = o.orbit->stable();
        r.max_nontrivial = o.orbit->max_nontrivial_abs;
      } else if (o.classification.candidate) {
        r.period = o.classification.candidate->period;
        r.symmetric = o.classification.candidate->symmetric;
        if (!o.orbit_error.empty()) r.error = "shooting: " + o.orbit_error;
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
    }
  });

  std::vector<std::string> catalog_rows;
  std::vector<std::string> run_rows;
  json cell_summaries = json::array();
  for (std::size_t c = 0; c < cells.size() && n_ic > 0; ++c) {
    const GridCell& cell = cells[c];
    int steady = 0, periodic = 0, undetermined = 0, failed = 0;
    std::vector<Vec4> steady_classes;
    std::vector<Attractor> periodic_classes;
    for (std::size_t k = 0; k < n_ic; ++k) {
      const SweepRecord& r = records[c * n_ic + k];
      run_rows.push_back(join({std::to_string(cell.ia), std::to_string(cell.ip), std::to_string(k),
                               f17(cell.params.a), f17(cell.params.psi),
                               r.failed ? "failed" : to_string(r.behaviour), f17(r.period),
                               r.converged ? (r.symmetric ? "1" : "0") : "",
                               r.converged ? f17(r.max_nontrivial) : "",
                               r.converged ? (r.stable ? "1" : "0") : "", f17(r.max_norm_deviation),
                               cell_text(r.error)}));
      if (r.failed) {
        ++failed;
        continue;
      }
      if (r.behaviour == Behaviour::steady) {
        ++steady;
        const bool known = std::any_of(steady_classes.begin(), steady_classes.end(), [&](const Vec4& q) {
          return orientation_distance(q, r.final_q) < 1e-4;
        });
        if (!known) steady_classes.push_back(r.final_q);
      } else if (r.behaviour == Behaviour::periodic) {
        ++periodic;
        const double tol = r.converged ? 1e-6 : 1e-3;
        auto it = std::find_if(periodic_classes.begin(), periodic_classes.end(), [&](const Attractor& a) {
          return a.converged == r.converged && std::abs(a.period - r.period) <= tol * a.period;
        });
        if (it == periodic_classes.end()) periodic_classes.push_back({r.period, r.converged, r.stable, r.final_q});
      } else {
        ++undetermined;
      }
    }
    std::vector<double> periods;
    int stable_periodic = 0;
    for (const Attractor& a : periodic_classes) {
      periods.push_back(a.period);
      if (a.converged && a.stable) ++stable_periodic;
    }
    std::sort(periods.begin(), periods.end());
    std::string period_list;
    for (std::size_t k = 0; k < periods.size(); ++k) period_list += (k ? ";" : "") + f17(periods[k]);
    catalog_rows.push_back(join({std::to_string(cell.ia), std::to_string(cell.ip), f17(cell.params.a),
                                 f17(cell.params.psi), std::to_string(n_ic), std::to_string(steady),
                                 std::to_string(periodic), std::to_string(undetermined),
                                 std::to_string(failed), std::to_string(steady_classes.size()),
                                 std::to_string(periodic_classes.size()), std::to_string(stable_periodic),
                                 period_list}));
    cell_summaries.push_back({{"params", params_json(cell.params)}, {"steady", steady},
                              {"periodic", periodic}, {"undetermined", undetermined},
                              {"failed", failed}, {"stable_periodic_attractors", stable_periodic}});
  }
  write_csv((dir / "catalog.csv").string(), prov,
            "a_index,psi_index,a,psi,n_ic,steady,periodic,undetermined,failed,distinct_steady,"
            "distinct_periodic,stable_periodic_attractors,periods",
            catalog_rows);
  write_csv((dir / "runs.csv").string(), prov,
            "a_index,psi_index,ic,a,psi,behaviour,period,symmetric,max_nontrivial_multiplier_abs,stable,"
            "max_norm_deviation,error",
            run_rows);
  return {{"command", "sweep"}, {"out_dir", run.out_dir}, {"cells", cell_summaries},
          {"catalog", "catalog.csv"}, {"runs", "runs.csv"},
          {"config_hash", prov.config_hash}, {"model_hash", prov.model_hash}};
}

// ---------------------------------------------------------------------------

json cmd_continue(const ResolvedConfig& cfg, const std::string& orbit_file) {
  const RunConfig& run = cfg.run;
  if (orbit_file.empty()) throw ConfigError("continue needs a seed orbit file (--orbit)");
  const SwimmerModel model = build_swimmer(run);
  const Provenance prov = provenance(cfg, model);
  Parameters params;
  const RecurrenceCandidate candidate = load_orbit_file(orbit_file, params);
  validate(params);

  const FreeParameter free = run.free_parameter == "a" ? FreeParameter::a : FreeParameter::psi;
  ContinuationConfig cc;
  if (free == FreeParameter::psi) {
    cc.lower = run.lower.value_or(0.0);
    cc.upper = run.upper.value_or(std::numbers::pi);
  } else {
    if (!run.lower || !run.upper) throw ConfigError("continuation in a needs continue.lower and continue.upper");
    cc.lower = *run.lower;
    cc.upper = *run.upper;
  }
  cc.direction = run.direction;
  cc.initial_step = run.initial_step;
  cc.min_step = run.min_step;
  cc.max_step = run.max_step;
  cc.max_points = run.max_points;
  const double finest_a = free == FreeParameter::a ? std::max(params.a, cc.upper) : params.a;
  cc.shooting = default_shooting_config(finest_a);

  const PeriodicOrbit seed = shoot_periodic(candidate, model, params, cc.shooting);
  const ContinuationBranch branch = continue_branch(seed, model, free, cc);

  const fs::path dir = prepare_out_dir(run);
  write_csv((dir / "branch.csv").string(), prov, branch_csv_header, branch_csv_rows(branch));
  std::vector<std::string> event_rows;
  for (const BranchEvent& e : branch.events)
    event_rows.push_back(join({std::to_string(e.index), e.kind, f17(e.parameter), cell_text(e.detail)}));
  write_csv((dir / "events.csv").string(), prov, "index,kind,parameter,detail", event_rows);
  json body{{"free_parameter", to_string(free)},
            {"range", {cc.lower, cc.upper}},
            {"seed_orbit", orbit_to_json(seed)},
            {"points", branch.points.size()},
            {"events", branch.events.size()},
            {"truncated", branch.truncated}};
  write_json((dir / "branch.json").string(), prov, body);
  body["command"] = "continue";
  body["out_dir"] = run.out_dir;
  body["config_hash"] = prov.config_hash;
  body["model_hash"] = prov.model_hash;
  return body;
}

// ---------------------------------------------------------------------------

json cmd_compare(const ResolvedConfig& cfg) {
  const RunConfig& run = cfg.run;
  if (run.regime != "lowa" && run.regime != "higha" && run.regime != "smallpsi")
    throw ConfigError("predict.regime must be lowa, higha or smallpsi");
  const SwimmerModel model = build_swimmer(run);
  const PSpectrum sp = compute_spectrum(model);
  const Provenance prov = provenance(cfg, model);
  const std::vector<GridCell> cells = grid_cells(run);
  for (const GridCell& c : cells) validate(c.params);
  const Vec4 q0 = run.initial_quaternion ? *run.initial_quaternion : random_quaternions(run.seed, 1).front();
  const fs::path dir = prepare_out_dir(run);

  std::vector<std::string> rows(cells.size());
  std::vector<json> entries(cells.size());
  std::string columns;
  json headline;

  if (run.regime == "lowa") {
    columns = "a,psi,analytic_regime,numeric_behaviour,predicted_period,numeric_period,rel_error,"
              "reference_bound,below_reference_bound,max_norm_deviation";
    headline = {{"reference_bound", kLowAReferenceBound}};
    parallel_for(cells.size(), run.threads, [&](std::size_t i) {
      const Parameters& p = cells[i].params;
      const LowAPrediction pred = lowa_predict(sp, p);
      const SimulationOutcome o = run_with_context(model, p, q0, settings_for(run, sp, p), run_label(p, 0));
      double numeric = 0.0;
      if (o.orbit) numeric = o.orbit->period;
      else if (o.classification.candidate) numeric = o.classification.candidate->period;
      const bool comparable = pred.regime == LowAPrediction::Regime::periodic && numeric > 0.0;
      const double rel = comparable ? compare_period(numeric, pred) : 0.0;
      rows[i] = join({f17(p.a), f17(p.psi), to_string(pred.regime), to_string(o.classification.behaviour),
                      comparable ? f17(pred.period_t) : "", numeric > 0.0 ? f17(numeric) : "",
                      comparable ? f17(rel) : "", f17(kLowAReferenceBound),
                      comparable ? (std::abs(rel) < kLowAReferenceBound ? "1" : "0") : "",
                      f17(o.max_norm_deviation)});
      entries[i] = {{"params", params_json(p)}, {"analytic_regime", to_string(pred.regime)},
                    {"numeric_behaviour", to_string(o.classification.behaviour)},
                    {"rel_error", comparable ? json(rel) : json(nullptr)}};
    });
  } else if (run.regime == "smallpsi") {
    columns = "a,psi,fit_cx,fit_cy,fit_cz,fit_radius,order1_cx,order1_cy,order1_cz,order1_radius,"
              "center_error_order1,radius_error_order1,harmonic_center_error,harmonic_radius_error,"
              "distance_order1_max,distance_order2_max,reference_tolerance_order1,reference_threshold_order2,"
              "max_norm_deviation";
    headline = {{"order1_tolerance", "2 sin^2 psi"}, {"order2_threshold", kOverlapThreshold}};
    parallel_for(cells.size(), run.threads, [&](std::size_t i) {
      const Parameters& p = cells[i].params;
      const SimulationOutcome o = run_with_context(model, p, q0, smallpsi_settings(sp, p), run_label(p, 0));
      const SmallPsiMeasurement m = measure_smallpsi(model, sp, o);
      const double c_err = (m.fit.center - m.order1.center_m0).norm();
      const double r_err = std::abs(m.fit.radius - m.order1.radius_r);
      const double hc_err = (m.fit.center - m.order1.harmonic_center).norm();
      const double hr_err = std::abs(m.fit.radius - m.order1.harmonic_radius);
      const double s = std::sin(p.psi);
      rows[i] = join({f17(p.a), f17(p.psi), f17(m.fit.center(0)), f17(m.fit.center(1)), f17(m.fit.center(2)),
                      f17(m.fit.radius), f17(m.order1.center_m0(0)), f17(m.order1.center_m0(1)),
                      f17(m.order1.center_m0(2)), f17(m.order1.radius_r), f17(c_err), f17(r_err),
                      f17(hc_err), f17(hr_err), f17(m.distance_order1.max), f17(m.distance_order2.max),
                      f17(2.0 * s * s), f17(kOverlapThreshold), f17(o.max_norm_deviation)});
      entries[i] = {{"params", params_json(p)}, {"center_error_order1", c_err},
                    {"radius_error_order1", r_err}, {"distance_order1_max", m.distance_order1.max},
                    {"distance_order2_max", m.distance_order2.max}};
    });
  } else {
    columns = "a,psi,max_alignment_error,alignment_bound,drift_rate,predicted_rate,rel_error,"
              "curve_distance_max,curve_distance_mean,max_norm_deviation";
    headline = {{"alignment_bound", "5/a"}, {"drift_tolerance", 0.05}};
    parallel_for(cells.size(), run.threads, [&](std::size_t i) {
      const Parameters& p = cells[i].params;
      const SimulationOutcome o = run_with_context(model, p, q0, higha_settings(sp, p), run_label(p, 0));
      const HighAMeasurement m = measure_higha(model, sp, o);
      const double rel = (m.drift_rate - m.predicted_rate) / m.predicted_rate;
      rows[i] = join({f17(p.a), f17(p.psi), f17(m.max_alignment_error), f17(5.0 / p.a), f17(m.drift_rate),
                      f17(m.predicted_rate), f17(rel), f17(m.curve_distance.max),
                      f17(m.curve_distance.mean), f17(o.max_norm_deviation)});
      entries[i] = {{"params", params_json(p)}, {"max_alignment_error", m.max_alignment_error},
                    {"drift_rel_error", rel}, {"curve_distance_max", m.curve_distance.max}};
    });
  }
  const std::string stem = "compare_" + run.regime;
  write_csv((dir / (stem + ".csv")).string(), prov, columns, rows);
  json body{{"regime", run.regime}, {"reference", headline}, {"rows", entries},
            {"initial_quaternion", vec_json(q0)}};
  write_json((dir / (stem + ".json")).string(), prov, body);
  body["command"] = "compare";
  body["out_dir"] = run.out_dir;
  body["config_hash"] = prov.config_hash;
  body["model_hash"] = prov.model_hash;
  return body;
}

std::pair<std::string, int> error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return {"config_error", 2};
  if (dynamic_cast<const RegimeError*>(&e)) return {"regime_error", 3};
  if (dynamic_cast<const OrbitError*>(&e)) return {"orbit_error", 4};
  if (dynamic_cast<const OutputError*>(&e)) return {"io_error", 5};
  if (dynamic_cast<const IntegrationError*>(&e)) return {"integration_error", 6};
  if (dynamic_cast<const ModelError*>(&e)) return {"model_error", 7};
  if (dynamic_cast<const std::invalid_argument*>(&e)) return {"invalid_argument", 2};
  return {"error", 1};
}

}  // namespace magswim
