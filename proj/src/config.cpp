#include "magswim/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "magswim/hash.hpp"

namespace magswim {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(trim(cur));
  return parts;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "swimmer.model", "swimmer.drag_file", "swimmer.moment",
      "params.a", "params.psi",
      "integrator.rel_tol", "integrator.abs_tol", "integrator.max_step",
      "integrator.initial_step", "integrator.max_steps",
      "run.horizon", "run.transient", "run.sample_dt", "run.seed", "run.n_random_ic",
      "run.initial_quaternion", "run.threads", "run.max_extensions", "run.steady_tol", "run.recurrence_tol",
      "output.dir",
      "predict.regime", "predict.order", "predict.samples",
      "continue.free", "continue.lower", "continue.upper", "continue.direction",
      "continue.initial_step", "continue.min_step", "continue.max_step", "continue.max_points"};
  return keys;
}

}  // namespace

ConfigMap parse_config(std::istream& in, const std::string& base_dir) {
  ConfigMap map;
  map.base_dir = base_dir;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    if (map.entries.count(key))
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    map.entries[key] = value;
  }
  return map;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  const std::filesystem::path p(path);
  return parse_config(in, p.has_parent_path() ? p.parent_path().string() : ".");
}

std::string config_hash(const ConfigMap& cfg) {
  std::string canonical;
  for (const auto& [k, v] : cfg.entries) {
    if (k == "output.dir" || k == "run.threads") continue;
    canonical += k + "=" + v + "\n";
  }
  return digest_hex(canonical);
}

double parse_number(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || !std::isfinite(value))
    throw ConfigError(key + ": not a finite number: '" + text + "'");
  return value;
}

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  for (const std::string& part : split(text, ',')) out.push_back(parse_number(part, key));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::vector<double> parse_grid(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  for (const std::string fn : {"linspace", "geomspace"}) {
    if (t.rfind(fn + "(", 0) != 0) continue;
    if (t.back() != ')') throw ConfigError(key + ": unterminated " + fn);
    const std::vector<double> args = parse_list(t.substr(fn.size() + 1, t.size() - fn.size() - 2), key);
    if (args.size() != 3) throw ConfigError(key + ": " + fn + " takes (lo, hi, n)");
    const double n = args[2];
    if (n < 1 || n != std::floor(n)) throw ConfigError(key + ": grid size must be a positive integer");
    if (fn == "geomspace" && !(args[0] > 0 && args[1] > 0))
      throw ConfigError(key + ": geomspace needs positive bounds");
    std::vector<double> grid;
    const int count = static_cast<int>(n);
    for (int i = 0; i < count; ++i) {
      const double s = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
      grid.push_back(fn == "linspace" ? args[0] + s * (args[1] - args[0])
                                      : args[0] * std::pow(args[1] / args[0], s));
    }
    return grid;
  }
  return parse_list(t, key);
}

RunConfig load_run_config(const ConfigMap& map) {
  for (const auto& [k, v] : map.entries) {
    if (!known_keys().count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  RunConfig cfg;
  const auto& e = map.entries;
  auto get = [&](const std::string& k) -> std::optional<std::string> {
    const auto it = e.find(k);
    return it == e.end() ? std::nullopt : std::optional<std::string>(it->second);
  };
  auto number = [&](const std::string& k, double& out) {
    if (auto v = get(k)) out = parse_number(*v, k);
  };
  auto integer = [&](const std::string& k, auto& out) {
    if (auto v = get(k)) {
      const double x = parse_number(*v, k);
      if (x != std::floor(x)) throw ConfigError(k + ": expected an integer");
      out = static_cast<std::remove_reference_t<decltype(out)>>(x);
    }
  };

  if (auto v = get("swimmer.model")) cfg.swimmer = *v;
  if (cfg.swimmer != "helix" && cfg.swimmer != "isotropic" && cfg.swimmer != "file")
    throw ConfigError("swimmer.model must be helix, isotropic or file");
  if (auto v = get("swimmer.drag_file")) {
    std::filesystem::path p(*v);
    if (p.is_relative()) p = std::filesystem::path(map.base_dir) / p;
    cfg.drag_file = p.lexically_normal().string();
    if (!get("swimmer.model")) cfg.swimmer = "file";
  }
  if (cfg.swimmer == "file" && cfg.drag_file.empty())
    throw ConfigError("swimmer.model = file needs swimmer.drag_file");
  if (cfg.swimmer == "isotropic") cfg.moment = Vec3::UnitZ();
  if (auto v = get("swimmer.moment")) {
    const auto m = parse_list(*v, "swimmer.moment");
    if (m.size() != 3) throw ConfigError("swimmer.moment needs 3 components");
    cfg.moment = Vec3(m[0], m[1], m[2]);
  }

  if (auto v = get("params.a")) cfg.a_grid = parse_grid(*v, "params.a");
  if (auto v = get("params.psi")) cfg.psi_grid = parse_grid(*v, "params.psi");
  for (double a : cfg.a_grid)
    if (!(a > 0.0)) throw ConfigError("params.a values must be positive");

  number("integrator.rel_tol", cfg.integrator.rel_tol);
  number("integrator.abs_tol", cfg.integrator.abs_tol);
  number("integrator.max_step", cfg.integrator.max_step);
  number("integrator.initial_step", cfg.integrator.initial_step);
  integer("integrator.max_steps", cfg.integrator.max_steps);
  try {
    validate(cfg.integrator);
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("integrator: ") + err.what());
  }

  if (auto v = get("run.horizon")) cfg.horizon = parse_number(*v, "run.horizon");
  if (auto v = get("run.transient")) cfg.transient = parse_number(*v, "run.transient");
  if (cfg.transient && *cfg.transient < 0.0) throw ConfigError("run.transient must be >= 0");
  if (cfg.horizon && !(*cfg.horizon > 0.0)) throw ConfigError("run.horizon must be positive");
  if (cfg.horizon && cfg.transient && !(*cfg.horizon > *cfg.transient))
    throw ConfigError("run.horizon must exceed run.transient");
  number("run.sample_dt", cfg.sample_dt);
  if (cfg.sample_dt < 0.0) throw ConfigError("run.sample_dt must be >= 0");
  number("run.steady_tol", cfg.steady_tol);
  number("run.recurrence_tol", cfg.recurrence_tol);
  integer("run.seed", cfg.seed);
  integer("run.n_random_ic", cfg.n_random_ic);
  if (cfg.n_random_ic < 0) throw ConfigError("run.n_random_ic must be >= 0");
  integer("run.max_extensions", cfg.max_extensions);
  if (cfg.max_extensions < 0) throw ConfigError("run.max_extensions must be >= 0");
  integer("run.threads", cfg.threads);
  if (cfg.threads < 0) throw ConfigError("run.threads must be >= 0");
  if (auto v = get("run.initial_quaternion")) {
    const auto q = parse_list(*v, "run.initial_quaternion");
    if (q.size() != 4) throw ConfigError("run.initial_quaternion needs 4 components");
    const Vec4 qq(q[0], q[1], q[2], q[3]);
    if (qq.norm() == 0.0) throw ConfigError("run.initial_quaternion must be nonzero");
    cfg.initial_quaternion = qq.normalized();
  }
  if (auto v = get("output.dir")) cfg.out_dir = *v;

  if (auto v = get("predict.regime")) cfg.regime = *v;
  integer("predict.order", cfg.order);
  integer("predict.samples", cfg.samples);
  if (cfg.samples < 10) throw ConfigError("predict.samples must be >= 10");

  if (auto v = get("continue.free")) cfg.free_parameter = *v;
  if (cfg.free_parameter != "a" && cfg.free_parameter != "psi")
    throw ConfigError("continue.free must be a or psi");
  if (auto v = get("continue.lower")) cfg.lower = parse_number(*v, "continue.lower");
  if (auto v = get("continue.upper")) cfg.upper = parse_number(*v, "continue.upper");
  integer("continue.direction", cfg.direction);
  if (cfg.direction != 1 && cfg.direction != -1) throw ConfigError("continue.direction must be 1 or -1");
  number("continue.initial_step", cfg.initial_step);
  number("continue.min_step", cfg.min_step);
  number("continue.max_step", cfg.max_step);
  integer("continue.max_points", cfg.max_points);

  cfg.hash = config_hash(map);
  return cfg;
}

SwimmerModel build_swimmer(const RunConfig& cfg) {
  if (cfg.swimmer == "isotropic") return isotropic_model(cfg.moment);
  if (cfg.swimmer == "file") return build_model(load_drag_matrix_file(cfg.drag_file), cfg.moment);
  return build_model(drag_from_matrix(helix_drag()), cfg.moment);
}

}  // namespace magswim
