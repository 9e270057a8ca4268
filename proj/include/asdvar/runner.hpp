#pragma once

// Configuration-driven runs, property-check suites and parameter sweeps
// behind the command-line front end.

#include "asdvar/config.hpp"
#include "asdvar/models.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace asdvar {

enum ExitCode : int { exit_ok = 0, exit_solve_failure = 1, exit_config_error = 2, exit_build_error = 3 };

using ProblemSettings = std::variant<HeatParams, TransportParams, NseParams, NseEvolutionParams, CoupledParams>;

struct RunConfig {
  std::string problem;
  ProblemSettings settings;
  std::string method;
  int max_iter = 5000;
  /// Gradient tolerance; the solver default when unset.
  std::optional<double> gtol;
  double certificate_tol = 1e-6;
  /// Absolute certificate threshold for exit 0; when unset, certificate_tol * scale.
  std::optional<double> threshold;
  std::vector<double> lambdas{1.0, 0.1, 0.01};
  double damping = 1.0;
  std::string out_dir = "out";
  std::string name;
  bool write_solution = true;
  std::uint64_t seed = 0;
  /// The validated source configuration.
  Config source;
};

/// Validates every field against the problem's schema; throws ConfigError.
RunConfig parse_run_config(const Config& cfg, std::optional<std::uint64_t> seed_override = std::nullopt);

/// Output directory precedence: command-line flag, then OUT_DIR, then output.dir.
std::string resolve_out_dir(const RunConfig& rc, const std::optional<std::string>& cli_out);

struct RunSummary {
  std::string problem;
  std::string solver;
  std::string status;
  int exit_code = 0;
  std::uint64_t seed = 0;
  int dim = 0;
  int steps = 0;
  double certificate = 0.0;
  double scale = 1.0;
  double threshold = 0.0;
  double inclusion_residual = 0.0;
  int iterations = 0;
  std::string oracle;
  double oracle_error = 0.0;
  double energy_defect = 0.0;
  double unregularized_certificate = 0.0;
  double skew_defect = 0.0;
  double boundary_defect = 0.0;
  double conservativity_defect = 0.0;
  std::string message;

  /// JSON object with a fixed field order and 17 significant digits;
  /// non-finite numbers are written as null.
  std::string to_json() const;
};

struct RunResult {
  int exit_code = exit_ok;
  RunSummary summary;
  std::string directory;
  double wall_seconds = 0.0;
  std::string error;
};

/// Builds, solves and writes summary.json, history.csv, the solution CSV and
/// timing.txt into directory; then re-reads them and checks the certificate.
RunResult execute_run(const RunConfig& rc, const std::string& directory);

int run_command(const std::string& config_path, std::optional<std::uint64_t> seed,
                const std::optional<std::string>& out, std::ostream& log);

struct CheckRow {
  std::string suite;
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// suite in {algebra, operators, problems, all}; throws std::invalid_argument otherwise.
std::vector<CheckRow> run_checks(const std::string& suite);
int check_command(const std::string& suite, std::ostream& out);

int sweep_command(const std::string& config_path, const std::string& parameter, const std::vector<std::string>& values,
                  std::optional<std::uint64_t> seed, const std::optional<std::string>& out, std::ostream& log);

}  // namespace asdvar
