#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stablesim/batch.hpp"
#include "stablesim/config.hpp"
#include "stablesim/verify.hpp"

using namespace stablesim;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<int> jobs;
  std::string preset;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Base seed (default 42)");
  cmd->add_option("--runs", c.runs, "Runs per method and shock");
  cmd->add_option("--jobs", c.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--preset", c.preset, "quick (100 runs) or full (1200 runs)")
      ->check(CLI::IsMember({"quick", "full"}));
}

AppConfig resolve(const Common& c) {
  AppConfig config = load_config(c.config_path.empty() ? std::nullopt : std::optional(c.config_path));
  if (!c.preset.empty()) config.runs = preset_runs(preset_from_string(c.preset));
  if (c.runs) config.runs = *c.runs;
  if (c.seed) config.seed = *c.seed;
  if (c.jobs) config.jobs = *c.jobs;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stablecoin reserve controller simulation"};
  app.require_subcommand(1);

  Common run_opts;
  std::string run_out = "out";
  auto* run = app.add_subcommand("run", "Simulate every method under every shock");
  add_common(run, run_opts);
  run->add_option("--out", run_out, "Output directory (created if missing)");

  Common sweep_opts;
  std::string sweep_out = "out";
  std::string parameter;
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "Repeat the batch over values of one parameter");
  add_common(sweep, sweep_opts);
  sweep->add_option("--out", sweep_out, "Output directory (created if missing)");
  sweep->add_option("--param", parameter, "One of: rho, shock_magnitude, coordination, "
                                          "injection_strength, turnover_limit, risk_aversion, "
                                          "epoch_length, stress_runs")
      ->required();
  sweep->add_option("--values", values, "Values to sweep")->required()->delimiter(',');

  Common verify_opts;
  std::vector<int> only;
  int determinism_runs = 4;
  auto* verify = app.add_subcommand("verify", "Run the acceptance checks and print a table");
  add_common(verify, verify_opts);
  verify->add_option("--only", only, "Check ids to run")->delimiter(',');
  verify->add_option("--determinism-runs", determinism_runs, "Runs per cell for the determinism check");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(resolve(run_opts), run_out, std::cout);
    if (sweep->parsed()) {
      return cmd_sweep(resolve(sweep_opts), parameter, values, sweep_out, std::cout);
    }
    if (verify->parsed()) {
      VerifyOptions options;
      options.config = resolve(verify_opts);
      options.runs = verify_opts.runs || !verify_opts.preset.empty() ? options.config.runs
                                                                    : preset_runs(Preset::Quick);
      options.determinism_runs = determinism_runs;
      options.only = only;
      return cmd_verify(options, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
