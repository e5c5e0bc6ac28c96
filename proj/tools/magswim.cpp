#include <iostream>

#include <CLI11.hpp>

#include "magswim/commands.hpp"

namespace {

void print_error(const std::string& kind, const std::string& message) {
  const nlohmann::json err{{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << err.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  using magswim::CommandOptions;
  CLI::App app{"Magnetic swimmer orientation dynamics"};
  app.require_subcommand(1);

  CommandOptions opt;
  std::string out_dir, regime, orbit_file, free_parameter;
  std::uint64_t seed = 0;
  int order = 0, threads = 0;
  std::vector<double> range;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "seed for random initial orientations");
    sub->add_option("--threads", threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  };
  auto selectors = [&](CLI::App* sub) {
    sub->add_option("--regime", regime, "lowa | higha | smallpsi")
        ->check(CLI::IsMember({"lowa", "higha", "smallpsi"}));
    sub->add_option("--order", order, "prediction order");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "integrate, classify and refine orbits");
  CLI::App* predict = app.add_subcommand("predict", "evaluate an asymptotic prediction");
  CLI::App* sweep = app.add_subcommand("sweep", "attractor catalog over a parameter grid");
  CLI::App* cont = app.add_subcommand("continue", "continue a periodic orbit in a or psi");
  CLI::App* compare = app.add_subcommand("compare", "numerics against an asymptotic prediction");
  for (CLI::App* sub : {simulate, predict, sweep, cont, compare}) common(sub);
  selectors(predict);
  selectors(compare);
  cont->add_option("--orbit", orbit_file, "seed orbit file written by simulate")->required();
  cont->add_option("--free", free_parameter, "free parameter")->check(CLI::IsMember({"a", "psi"}));
  cont->add_option("--range", range, "lo,hi")->delimiter(',')->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage_error", e.what());
    return 64;
  }

  auto given = [](CLI::App* sub, const char* name) {
    const CLI::Option* o = sub->get_option_no_throw(name);
    return o && o->count() > 0;
  };
  CLI::App* active = app.get_subcommands().front();
  if (given(active, "--out")) opt.out_dir = out_dir;
  if (given(active, "--seed")) opt.seed = seed;
  if (given(active, "--threads")) opt.threads = threads;
  if (given(active, "--regime")) opt.regime = regime;
  if (given(active, "--order")) opt.order = order;
  if (given(active, "--free")) opt.free_parameter = free_parameter;
  if (given(active, "--range")) opt.range = std::make_pair(range[0], range[1]);

  try {
    const magswim::ResolvedConfig cfg = magswim::resolve_config(opt);
    nlohmann::json summary;
    if (active == simulate) summary = magswim::cmd_simulate(cfg);
    else if (active == predict) summary = magswim::cmd_predict(cfg);
    else if (active == sweep) summary = magswim::cmd_sweep(cfg);
    else if (active == cont) summary = magswim::cmd_continue(cfg, orbit_file);
    else summary = magswim::cmd_compare(cfg);
    std::cout << summary.dump(2) << std::endl;
  } catch (const std::exception& e) {
    const auto [kind, code] = magswim::error_kind(e);
    print_error(kind, e.what());
    return code;
  }
  return 0;
}
