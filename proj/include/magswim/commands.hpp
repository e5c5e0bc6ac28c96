#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "magswim/config.hpp"
#include "magswim/pipeline.hpp"

namespace magswim {

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Values given on the command line. They override the config file; every
/// override except the output directory and thread count enters the config hash.
struct CommandOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> regime;
  std::optional<int> order;
  std::optional<std::string> orbit_file;
  std::optional<std::string> free_parameter;
  std::optional<std::pair<double, double>> range;
  std::optional<int> threads;
};

/// Config file plus overrides, validated.
struct ResolvedConfig {
  ConfigMap map;
  RunConfig run;
};

ResolvedConfig resolve_config(const CommandOptions& options);

/// Header line shared by every output file.
struct Provenance {
  std::string config_hash;
  std::string model_hash;
};

void write_csv(const std::string& path, const Provenance& prov, const std::string& columns,
               const std::vector<std::string>& rows);
void write_json(const std::string& path, const Provenance& prov, nlohmann::json body);

/// Settings for one run: defaults for (a, psi), overridden by the config.
SimulationSettings settings_for(const RunConfig& cfg, const PSpectrum& sp, const Parameters& params);

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0: hardware concurrency).
/// The first exception, by index, is rethrown after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

nlohmann::json orbit_to_json(const PeriodicOrbit& orbit);
/// Reads the orbit written by the simulate command.
RecurrenceCandidate load_orbit_file(const std::string& path, Parameters& params);

// Each command writes into run.out_dir and returns a JSON summary.
nlohmann::json cmd_simulate(const ResolvedConfig& cfg);
nlohmann::json cmd_predict(const ResolvedConfig& cfg);
nlohmann::json cmd_sweep(const ResolvedConfig& cfg);
nlohmann::json cmd_continue(const ResolvedConfig& cfg, const std::string& orbit_file);
nlohmann::json cmd_compare(const ResolvedConfig& cfg);

/// Classification of an error for the CLI: (kind, exit code).
std::pair<std::string, int> error_kind(const std::exception& e);

}  // namespace magswim
