#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "magswim/integrator.hpp"
#include "magswim/model.hpp"

namespace magswim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw `key = value` entries. '#' starts a comment; keys use dotted sections.
struct ConfigMap {
  std::map<std::string, std::string> entries;
  std::string base_dir;  // relative paths resolve against this directory

  void set(const std::string& key, const std::string& value) { entries[key] = value; }
};

ConfigMap parse_config(std::istream& in, const std::string& base_dir = ".");
ConfigMap parse_config_file(const std::string& path);

/// Digest of the canonical (sorted, trimmed) entries, output.dir and run.threads excluded.
std::string config_hash(const ConfigMap& cfg);

double parse_number(const std::string& text, const std::string& key);
std::vector<double> parse_list(const std::string& text, const std::string& key);
/// Scalar, comma list, linspace(lo, hi, n) or geomspace(lo, hi, n).
std::vector<double> parse_grid(const std::string& text, const std::string& key);

struct RunConfig {
  // swimmer
  std::string swimmer = "helix";  // helix | isotropic | file
  std::string drag_file;
  Vec3 moment = helix_moment();

  // parameters
  std::vector<double> a_grid{0.01};
  std::vector<double> psi_grid{0.3};

  IntegratorConfig integrator;
  std::optional<double> horizon;
  std::optional<double> transient;
  double sample_dt = 0.0;  // 0: automatic
  double steady_tol = 1e-8;
  double recurrence_tol = 1e-3;
  int max_extensions = 6;  // horizon doublings while a run is undetermined

  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int n_random_ic = 1;
  std::optional<Vec4> initial_quaternion;
  int threads = 0;  // 0: hardware concurrency

  // predict / compare
  std::string regime = "lowa";
  int order = 1;
  int samples = 400;

  // continuation
  std::string free_parameter = "psi";
  std::optional<double> lower;
  std::optional<double> upper;
  int direction = 1;
  double initial_step = 0.02;
  double min_step = 1e-5;
  double max_step = 0.1;
  int max_points = 400;

  std::string hash;
};

/// Validates and converts; unknown keys are errors.
RunConfig load_run_config(const ConfigMap& map);

SwimmerModel build_swimmer(const RunConfig& cfg);

}  // namespace magswim
