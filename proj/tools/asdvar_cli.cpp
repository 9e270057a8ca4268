#include "asdvar/runner.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{"Self-dual variational solver: stationary and path problems with certificates"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  auto* run = app.add_subcommand("run", "Solve the problem described by a config file");
  std::string config;
  run->add_option("config", config, "Config file")->required();
  run->add_option("--seed", seed, "Seed for random_seeded fields (overrides run.seed)");
  run->add_option("--out", out, "Output root directory");

  auto* check = app.add_subcommand("check", "Run a property-check suite");
  std::string suite = "all";
  check->add_option("suite", suite, "algebra, operators, problems or all");

  auto* sweep = app.add_subcommand("sweep", "Run one config over a list of values for a field");
  std::string sweep_config, param;
  std::vector<std::string> values;
  sweep->add_option("config", sweep_config, "Config file")->required();
  sweep->add_option("--param", param, "Dotted field name, e.g. problem.nu")->required();
  sweep->add_option("--values", values, "Values to substitute")->required()->delimiter(',');
  sweep->add_option("--seed", seed, "Seed for random_seeded fields");
  sweep->add_option("--out", out, "Output root directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : asdvar::exit_config_error;
  }

  try {
    if (*run) return asdvar::run_command(config, seed, out, std::cout);
    if (*check) return asdvar::check_command(suite, std::cout);
    return asdvar::sweep_command(sweep_config, param, values, seed, out, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return asdvar::exit_solve_failure;
  }
}
