#include <atomic>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "magswim/commands.hpp"

using namespace magswim;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  const fs::path dir = fs::temp_directory_path() /
                       ("magswim_cli_" + std::to_string(::getpid()) + "_" + name + "_" +
                        std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ResolvedConfig from_text(const std::string& text) {
  std::istringstream in(text);
  ResolvedConfig cfg;
  cfg.map = parse_config(in);
  cfg.run = load_run_config(cfg.map);
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace

TEST_CASE("config: key = value with comments and dotted keys") {
  std::istringstream in("# header\nparams.a = 0.5   # trailing\n\n  run.seed=42\n");
  const ConfigMap m = parse_config(in);
  CHECK(m.entries.size() == 2);
  CHECK(m.entries.at("params.a") == "0.5");
  CHECK(m.entries.at("run.seed") == "42");
}

TEST_CASE("config: malformed input is rejected") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
  };
  CHECK_THROWS_AS(parse("params.a 0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse("params.a = \n"), ConfigError);
  CHECK_THROWS_AS(parse("params.a = 1\nparams.a = 2\n"), ConfigError);
  CHECK_THROWS_AS(from_text("params.b = 1\n"), ConfigError);
  CHECK_THROWS_AS(from_text("params.a = 1x\n"), ConfigError);
  CHECK_THROWS_AS(from_text("params.a = -1\n"), ConfigError);
  CHECK_THROWS_AS(from_text("run.n_random_ic = 2.5\n"), ConfigError);
  CHECK_THROWS_AS(from_text("swimmer.model = rod\n"), ConfigError);
  CHECK_THROWS_AS(from_text("swimmer.moment = 1, 0\n"), ConfigError);
  CHECK_THROWS_AS(from_text("integrator.rel_tol = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_file("/nonexistent/magswim.cfg"), ConfigError);
}

TEST_CASE("config: horizon below transient is a config error") {
  CHECK_THROWS_AS(from_text("run.horizon = 10\nrun.transient = 20\n"), ConfigError);
  CHECK_THROWS_AS(from_text("run.horizon = 20\nrun.transient = 20\n"), ConfigError);
  CHECK_NOTHROW(from_text("run.horizon = 20\nrun.transient = 0\n"));
  // a horizon below the default transient is caught when the run is set up
  const ResolvedConfig cfg = from_text("params.a = 0.01\nrun.horizon = 10\n");
  const SwimmerModel model = build_swimmer(cfg.run);
  CHECK_THROWS_AS(settings_for(cfg.run, compute_spectrum(model), Parameters{0.01, 0.3}), ConfigError);
}

TEST_CASE("config: grids") {
  CHECK(parse_grid("0.25", "k") == std::vector<double>{0.25});
  CHECK(parse_grid("1, 2,3", "k") == std::vector<double>{1, 2, 3});
  const auto lin = parse_grid("linspace(0, 1, 5)", "k");
  REQUIRE(lin.size() == 5);
  CHECK(lin[2] == doctest::Approx(0.5));
  CHECK(lin.back() == 1.0);
  const auto geo = parse_grid("geomspace(1e-3, 1e1, 5)", "k");
  REQUIRE(geo.size() == 5);
  CHECK(geo[1] == doctest::Approx(1e-2));
  CHECK(geo[4] == doctest::Approx(10.0));
  CHECK_THROWS_AS(parse_grid("linspace(0, 1)", "k"), ConfigError);
  CHECK_THROWS_AS(parse_grid("linspace(0, 1, 0)", "k"), ConfigError);
  CHECK_THROWS_AS(parse_grid("geomspace(0, 1, 3)", "k"), ConfigError);
  CHECK_THROWS_AS(parse_grid("linspace(0, 1, 3", "k"), ConfigError);
}

TEST_CASE("config: hash is order independent and ignores output.dir and threads") {
  const auto h1 = from_text("params.a = 0.5\nrun.seed = 3\noutput.dir = x\n").run.hash;
  const auto h2 = from_text("run.seed = 3\nparams.a = 0.5\noutput.dir = y\nrun.threads = 4\n").run.hash;
  const auto h3 = from_text("run.seed = 4\nparams.a = 0.5\n").run.hash;
  CHECK(h1 == h2);
  CHECK(h1 != h3);
  CHECK(h1.size() == 16);
}

TEST_CASE("config: swimmer selection") {
  const RunConfig iso = from_text("swimmer.model = isotropic\n").run;
  const SwimmerModel m = build_swimmer(iso);
  CHECK(m.m.isApprox(Vec3::UnitZ()));
  const RunConfig file = from_text("swimmer.drag_file = " + std::string(MAGSWIM_DATA_DIR) +
                                   "/helix_drag.txt\nswimmer.moment = 0, 0.1736, 0.9848\n")
                             .run;
  CHECK(file.swimmer == "file");
  const SwimmerModel fm = build_swimmer(file);
  const SwimmerModel hm = build_swimmer(from_text("").run);
  CHECK(compute_spectrum(fm).sigma2 == doctest::Approx(compute_spectrum(hm).sigma2).epsilon(1e-6));
  CHECK_THROWS(build_swimmer(from_text("swimmer.drag_file = missing.txt\n").run));
}

TEST_CASE("random initial quaternions: seeded, unit, reproducible") {
  const auto a = random_quaternions(99, 50);
  const auto b = random_quaternions(99, 50);
  const auto c = random_quaternions(100, 50);
  REQUIRE(a.size() == 50);
  CHECK(random_quaternions(99, 0).empty());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i].norm() == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK(a[0] != c[0]);
  // the first draws of a stream are the prefix of a longer stream
  const auto prefix = random_quaternions(99, 5);
  for (std::size_t i = 0; i < prefix.size(); ++i) CHECK(prefix[i] == a[i]);
}

TEST_CASE("random initial quaternions: roughly uniform on the 3-sphere") {
  const auto qs = random_quaternions(2024, 20000);
  Vec4 mean = Vec4::Zero();
  Eigen::Matrix4d second = Eigen::Matrix4d::Zero();
  for (const Vec4& q : qs) {
    mean += q;
    second += q * q.transpose();
  }
  mean /= qs.size();
  second /= qs.size();
  CHECK(mean.norm() < 0.03);
  CHECK((second - 0.25 * Eigen::Matrix4d::Identity()).norm() < 0.02);
}

TEST_CASE("parallel_for: every index once, first error rethrown") {
  std::vector<int> hits(37, 0);
  parallel_for(hits.size(), 3, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_NOTHROW(parallel_for(0, 2, [](std::size_t) {}));
  try {
    parallel_for(10, 2, [](std::size_t i) {
      if (i == 7 || i == 4) throw std::runtime_error("bad " + std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "bad 4");
  }
}

TEST_CASE("settings_for: config overrides defaults") {
  const ResolvedConfig cfg = from_text(
      "integrator.rel_tol = 1e-9\nintegrator.max_step = 0.05\nrun.transient = 30\n"
      "run.horizon = 90\nrun.sample_dt = 0.5\nrun.max_extensions = 0\n");
  const SwimmerModel model = build_swimmer(cfg.run);
  const auto s = settings_for(cfg.run, compute_spectrum(model), Parameters{1.0, 0.3});
  CHECK(s.integrator.rel_tol == 1e-9);
  CHECK(s.integrator.max_step == 0.05);
  CHECK(s.transient == 30.0);
  CHECK(s.horizon == 90.0);
  CHECK(s.sample_dt == 0.5);
  CHECK(s.max_extensions == 0);
}

TEST_CASE("simulate command: low-a periodic run writes orbit and curve files") {
  const fs::path dir = scratch_dir("sim");
  ResolvedConfig cfg = from_text("params.a = 0.0159\nparams.psi = 0.2\nrun.n_random_ic = 1\nrun.seed = 7\n");
  cfg.run.out_dir = dir.string();
  const auto summary = cmd_simulate(cfg);
  REQUIRE(summary["runs"].size() == 1);
  CHECK(summary["runs"][0]["behaviour"] == "periodic");
  for (const char* f : {"run_0_0_0_trajectory.csv", "run_0_0_0_curve.csv", "run_0_0_0_curve.json",
                        "run_0_0_0_classification.json", "run_0_0_0_orbit.json", "simulate_summary.csv"})
    CHECK(fs::exists(dir / f));
  const auto curve = lines_of(dir / "run_0_0_0_curve.csv");
  REQUIRE(curve.size() > 10);
  CHECK(curve[0].rfind("# config_hash=" + cfg.run.hash + " model_hash=", 0) == 0);
  CHECK(curve[1] == "t,x,y,z");
  const auto orbit = read_json(dir / "run_0_0_0_orbit.json");
  CHECK(orbit["residual"].get<double>() < 1e-10);
  CHECK(orbit["config_hash"] == cfg.run.hash);
  const SwimmerModel model = build_swimmer(cfg.run);
  const LowAPrediction pred = lowa_predict(compute_spectrum(model), Parameters{0.0159, 0.2});
  CHECK(std::abs(compare_period(orbit["period"].get<double>(), pred)) < 0.0198);
  const auto cls = read_json(dir / "run_0_0_0_classification.json");
  CHECK(cls["max_norm_deviation"].get<double>() < 1e-9);
  fs::remove_all(dir);
}

TEST_CASE("simulate command: small a with psi inside the equilibrium band is steady") {
  const fs::path dir = scratch_dir("steady");
  ResolvedConfig cfg = from_text("params.a = 0.05\nparams.psi = 1.4\nrun.initial_quaternion = 0.3, -0.2, 0.5, 0.8\n");
  cfg.run.out_dir = dir.string();
  const auto summary = cmd_simulate(cfg);
  CHECK(summary["runs"][0]["behaviour"] == "steady");
  CHECK_FALSE(fs::exists(dir / "run_0_0_0_orbit.json"));
  fs::remove_all(dir);
}

TEST_CASE("simulate command: needs at least one initial condition") {
  ResolvedConfig cfg = from_text("run.n_random_ic = 0\n");
  cfg.run.out_dir = scratch_dir("noic").string();
  CHECK_THROWS_AS(cmd_simulate(cfg), ConfigError);
}

TEST_CASE("predict command: low-a period for an untilted swimmer") {
  const fs::path dir = scratch_dir("predict");
  ResolvedConfig cfg = from_text("swimmer.model = isotropic\nparams.a = 0.01\nparams.psi = 1.0471975511965976\n"
                                 "predict.regime = lowa\n");
  cfg.run.out_dir = dir.string();
  const auto summary = cmd_predict(cfg);
  const auto body = read_json(dir / "prediction_lowa_0_0.json");
  CHECK(body["prediction"]["regime"] == "periodic");
  CHECK(body["prediction"]["period_t"].get<double>() == doctest::Approx(1256.637).epsilon(1e-6));
  CHECK(fs::exists(dir / "prediction_lowa_0_0.csv"));
  fs::remove_all(dir);
}

TEST_CASE("predict command: isotropic small-psi radius and higha rate") {
  const fs::path dir = scratch_dir("predict_iso");
  const double a = 0.7, psi = 0.2;
  ResolvedConfig cfg = from_text("swimmer.model = isotropic\nparams.a = 0.7\nparams.psi = 0.2\n"
                                 "predict.regime = smallpsi\npredict.order = 2\npredict.samples = 64\n");
  cfg.run.out_dir = dir.string();
  cmd_predict(cfg);
  const auto body = read_json(dir / "prediction_smallpsi_0_0.json");
  const double eps = std::sin(psi);
  CHECK(body["prediction"]["radius_r"].get<double>() ==
        doctest::Approx(eps * a * a / std::pow(1 + a * a, 2)).epsilon(1e-12));
  CHECK(lines_of(dir / "prediction_smallpsi_0_0.csv").size() == 66);

  cfg.run.regime = "higha";
  cfg.run.order = 1;
  cmd_predict(cfg);
  const auto high = read_json(dir / "prediction_higha_0_0.json");
  CHECK(high["prediction"]["tau_rate"].get<double>() ==
        doctest::Approx(-std::sin(psi) * std::sin(psi) / (2 * a)).epsilon(1e-12));
  fs::remove_all(dir);
}

TEST_CASE("predict command: regime preconditions") {
  ResolvedConfig cfg = from_text("params.a = 100\nparams.psi = 1.5707963267948966\npredict.regime = higha\n");
  cfg.run.out_dir = scratch_dir("regime").string();
  CHECK_THROWS_AS(cmd_predict(cfg), RegimeError);
  cfg.run.regime = "weird";
  CHECK_THROWS_AS(cmd_predict(cfg), ConfigError);
  cfg.run.regime = "smallpsi";
  cfg.run.order = 3;
  CHECK_THROWS_AS(cmd_predict(cfg), ConfigError);
}

TEST_CASE("sweep command: zero initial conditions give an empty catalog") {
  const fs::path dir = scratch_dir("empty");
  ResolvedConfig cfg = from_text("params.a = 0.5, 1\nparams.psi = 0.3\nrun.n_random_ic = 0\n");
  cfg.run.out_dir = dir.string();
  CHECK_NOTHROW(cmd_sweep(cfg));
  const auto catalog = lines_of(dir / "catalog.csv");
  REQUIRE(catalog.size() == 2);
  CHECK(catalog[0].rfind("# config_hash=", 0) == 0);
  CHECK(lines_of(dir / "runs.csv").size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("sweep command: identical config and seed give byte-identical outputs") {
  const std::string text = "params.a = 0.5, 2\nparams.psi = 0.3, 1.4\nrun.n_random_ic = 3\nrun.seed = 11\n";
  const fs::path d1 = scratch_dir("det1");
  const fs::path d2 = scratch_dir("det2");
  ResolvedConfig c1 = from_text(text);
  c1.run.out_dir = d1.string();
  c1.run.threads = 1;
  ResolvedConfig c2 = from_text(text + "run.threads = 3\n");
  c2.run.out_dir = d2.string();
  cmd_sweep(c1);
  cmd_sweep(c2);
  CHECK(slurp(d1 / "catalog.csv") == slurp(d2 / "catalog.csv"));
  CHECK(slurp(d1 / "runs.csv") == slurp(d2 / "runs.csv"));
  // every cell here lies outside the equilibrium regime and reports a stable periodic attractor
  const auto catalog = lines_of(d1 / "catalog.csv");
  REQUIRE(catalog.size() == 6);
  for (std::size_t i = 2; i < catalog.size(); ++i) {
    std::vector<std::string> fields;
    std::stringstream ss(catalog[i]);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    REQUIRE(fields.size() >= 12);
    CHECK(std::stoi(fields[11]) >= 1);
  }
  ResolvedConfig c3 = from_text(text);
  c3.map.set("run.seed", "12");
  c3.run = load_run_config(c3.map);
  const fs::path d3 = scratch_dir("det3");
  c3.run.out_dir = d3.string();
  cmd_sweep(c3);
  CHECK(slurp(d1 / "runs.csv") != slurp(d3 / "runs.csv"));
  for (const auto& d : {d1, d2, d3}) fs::remove_all(d);
}

TEST_CASE("continue command: branch files, determinism, collapsed range") {
  const fs::path sim = scratch_dir("cont_seed");
  ResolvedConfig cfg = from_text("params.a = 0.0159\nparams.psi = 0.3\nrun.seed = 7\n"
                                 "continue.lower = 0.29\ncontinue.upper = 0.31\n");
  cfg.run.out_dir = sim.string();
  cmd_simulate(cfg);
  const std::string orbit = (sim / "run_0_0_0_orbit.json").string();

  const fs::path d1 = scratch_dir("cont1");
  const fs::path d2 = scratch_dir("cont2");
  cfg.run.out_dir = d1.string();
  const auto summary = cmd_continue(cfg, orbit);
  cfg.run.out_dir = d2.string();
  cmd_continue(cfg, orbit);
  CHECK(slurp(d1 / "branch.csv") == slurp(d2 / "branch.csv"));
  const auto rows = lines_of(d1 / "branch.csv");
  CHECK(rows[1] == branch_csv_header);
  CHECK(rows.size() >= 4);
  CHECK(fs::exists(d1 / "events.csv"));
  CHECK(summary["truncated"] == false);

  const fs::path d3 = scratch_dir("cont3");
  ResolvedConfig point = cfg;
  point.run.lower = 0.3;
  point.run.upper = 0.3;
  point.run.out_dir = d3.string();
  cmd_continue(point, orbit);
  CHECK(lines_of(d3 / "branch.csv").size() == 3);

  CHECK_THROWS_AS(cmd_continue(cfg, ""), ConfigError);
  CHECK_THROWS_AS(cmd_continue(cfg, (sim / "missing.json").string()), ConfigError);
  ResolvedConfig in_a = cfg;
  in_a.run.free_parameter = "a";
  in_a.run.lower.reset();
  CHECK_THROWS_AS(cmd_continue(in_a, orbit), ConfigError);
  for (const auto& d : {sim, d1, d2, d3}) fs::remove_all(d);
}

TEST_CASE("compare command: small-psi table carries both order distances") {
  const fs::path dir = scratch_dir("compare");
  ResolvedConfig cfg = from_text("params.a = 1\nparams.psi = 0.1\npredict.regime = smallpsi\n");
  cfg.run.out_dir = dir.string();
  const auto summary = cmd_compare(cfg);
  REQUIRE(summary["rows"].size() == 1);
  const auto row = summary["rows"][0];
  CHECK(row["distance_order2_max"].get<double>() < row["distance_order1_max"].get<double>());
  const auto table = lines_of(dir / "compare_smallpsi.csv");
  REQUIRE(table.size() == 3);
  CHECK(table[1].find("distance_order1_max,distance_order2_max") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("orbit file: malformed content is a config error") {
  const fs::path dir = scratch_dir("orbitfile");
  Parameters p;
  std::ofstream(dir / "bad.json") << "{\"a\": 0.1}";
  CHECK_THROWS_AS(load_orbit_file((dir / "bad.json").string(), p), ConfigError);
  std::ofstream(dir / "short.json") << R"({"a":0.1,"psi":0.3,"q0":[1,0,0],"period":3,"symmetric":true})";
  CHECK_THROWS_AS(load_orbit_file((dir / "short.json").string(), p), ConfigError);
  std::ofstream(dir / "good.json") << R"({"a":0.1,"psi":0.3,"q0":[0,0,0,2],"period":3,"symmetric":true})";
  const auto c = load_orbit_file((dir / "good.json").string(), p);
  CHECK(p.a == 0.1);
  CHECK(c.q0.norm() == doctest::Approx(1.0));
  CHECK(c.symmetric);
  fs::remove_all(dir);
}

TEST_CASE("error kinds map to distinct exit codes") {
  std::set<int> codes;
  codes.insert(error_kind(ConfigError("x")).second);
  codes.insert(error_kind(RegimeError("x")).second);
  codes.insert(error_kind(OrbitError("x")).second);
  codes.insert(error_kind(OutputError("x")).second);
  codes.insert(error_kind(IntegrationError("x", 0.0, VecX())).second);
  CHECK(codes.size() == 5);
  CHECK(codes.count(0) == 0);
  CHECK(error_kind(std::runtime_error("x")).first == "error");
}

TEST_CASE("write helpers: unwritable paths raise output errors") {
  const Provenance prov{"c", "m"};
  CHECK_THROWS_AS(write_csv("/nonexistent/dir/x.csv", prov, "a", {}), OutputError);
  CHECK_THROWS_AS(write_json("/nonexistent/dir/x.json", prov, nlohmann::json::object()), OutputError);
}
