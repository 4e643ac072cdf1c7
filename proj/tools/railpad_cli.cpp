#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "railpad/error.hpp"
#include "railpad/pipeline.hpp"

namespace rp = railpad::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"Railpad condition monitoring from train-passage vibration records"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string location;

  using Command = std::function<rp::CommandResult(const rp::PipelineConfig&, const rp::CommandOptions&, std::ostream&)>;
  const std::map<std::string, std::pair<std::string, Command>> commands = {
      {"simulate", {"Write a synthetic campaign, temperature file and manifest", rp::cmd_simulate}},
      {"extract", {"Estimate the second resonance of every passage", rp::cmd_extract}},
      {"fit-temp", {"Fit the temperature-frequency model", rp::cmd_fit_temp}},
      {"residuals", {"Compute per-location residual sequences", rp::cmd_residuals}},
      {"fit-dist", {"Compare GEV, Gaussian and Weibull fits of the residuals", rp::cmd_fit_dist}},
      {"detect", {"Calibrate and run the change detector", rp::cmd_detect}},
      {"report", {"Write the plot-data bundle", rp::cmd_report}},
  };
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config_path, "Pipeline config (JSON)")->required();
    sub->add_option("--seed", seed, "Override the random seed");
    sub->add_option("--location", location, "Restrict to one location id");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  rp::CommandOptions options;
  if (chosen->count("--seed") > 0) options.seed = seed;
  if (chosen->count("--location") > 0) options.location = location;

  try {
    const rp::PipelineConfig config = rp::load_config(config_path);
    const rp::CommandResult result = commands.at(chosen->get_name()).second(config, options, std::cerr);
    if (result.warnings > 0) std::cerr << chosen->get_name() << ": " << result.warnings << " warning(s)\n";
    return 0;
  } catch (const railpad::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const railpad::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
