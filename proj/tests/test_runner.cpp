#include "asdvar/runner.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace asdvar;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("asdvar-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path file = dir / "run.cfg";
  std::ofstream(file) << text;
  return file;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(ASDVAR_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing diagnostics carry line and field") {
  try {
    Config::parse_string("problem.name = heat-1d\nproblem.n 12\n");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 2);
  }
  try {
    Config::parse_string("a = 1\na = 2\n");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "a");
    CHECK(e.line() == 2);
  }
  const auto cfg = Config::parse_string("problem.name = heat-1d\nproblem.nu = abc\n");
  try {
    parse_run_config(cfg);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "problem.nu");
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_run_config(Config::parse_string("problem.name = heat-1d\nsolver.method = picard\n")),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(Config::parse_string("problem.name = wave\n")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(Config::parse_string("problem.name = heat-1d\nsolver.lambdas = 1, 2\n")),
                  ConfigError);
}

TEST_CASE("output directory precedence") {
  const auto rc = parse_run_config(Config::parse_string("problem.name = heat-1d\noutput.dir = from-config\n"));
  ::unsetenv("OUT_DIR");
  CHECK(resolve_out_dir(rc, std::nullopt) == "from-config");
  ::setenv("OUT_DIR", "from-env", 1);
  CHECK(resolve_out_dir(rc, std::nullopt) == "from-env");
  CHECK(resolve_out_dir(rc, std::string("from-flag")) == "from-flag");
  ::unsetenv("OUT_DIR");
}

TEST_CASE("summary JSON has a fixed layout and nulls for non-finite values") {
  RunSummary s;
  s.problem = "heat-1d";
  s.oracle_error = std::numeric_limits<double>::quiet_NaN();
  s.certificate = 0.1;
  const auto j = nlohmann::json::parse(s.to_json());
  CHECK(j["oracle_error"].is_null());
  CHECK(j["certificate"].get<double>() == 0.1);
  CHECK(s.to_json().find("\"problem\"") < s.to_json().find("\"solver\""));
}

TEST_CASE("execute_run writes all artifacts and they re-read consistently") {
  const auto dir = scratch("run");
  const auto rc = parse_run_config(Config::parse_string("problem.name = heat-1d\n"));
  const auto r = execute_run(rc, (dir / "heat").string());
  CHECK(r.exit_code == exit_ok);
  for (const char* f : {"summary.json", "history.csv", "path.csv", "timing.txt"}) CHECK(fs::exists(dir / "heat" / f));
  const auto j = nlohmann::json::parse(slurp(dir / "heat" / "summary.json"));
  CHECK(j["status"] == "converged");
  CHECK(j["certificate"].get<double>() <= 1e-8);
  CHECK(j["oracle"] == "exact_formula");
  fs::remove_all(dir);
}

TEST_CASE("forced failure writes a partial history") {
  const auto dir = scratch("fail");
  const auto rc = parse_run_config(Config::parse_string("problem.name = transport-1d\nsolver.max_iter = 2\n"));
  const auto r = execute_run(rc, dir.string());
  CHECK(r.exit_code == exit_solve_failure);
  CHECK(fs::exists(dir / "history.csv"));
  CHECK(slurp(dir / "history.csv").size() > std::string("iteration,certificate,grad_norm\n").size());
  fs::remove_all(dir);
}

TEST_CASE("build errors map to exit 3") {
  const auto dir = scratch("build");
  const auto rc = parse_run_config(Config::parse_string("problem.name = transport-1d\nproblem.a0 = -1\n"));
  CHECK(execute_run(rc, dir.string()).exit_code == exit_build_error);
  fs::remove_all(dir);
}

TEST_CASE("seeded runs are bit-identical; different seeds differ") {
  const auto dir = scratch("seed");
  const auto cfg = Config::parse_string("problem.name = nse2d-stationary\nproblem.grid = 8\nproblem.forcing = random_seeded\n");
  execute_run(parse_run_config(cfg, 5), (dir / "a").string());
  execute_run(parse_run_config(cfg, 5), (dir / "b").string());
  execute_run(parse_run_config(cfg, 6), (dir / "c").string());
  CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "b" / "summary.json"));
  CHECK(slurp(dir / "a" / "solution.csv") == slurp(dir / "b" / "solution.csv"));
  CHECK(slurp(dir / "a" / "solution.csv") != slurp(dir / "c" / "solution.csv"));
  fs::remove_all(dir);
}

TEST_CASE("check suites") {
  for (const auto& row : run_checks("operators")) CHECK_MESSAGE(row.pass, row.name);
  CHECK_THROWS(run_checks("nonsense"));
}

TEST_CASE("command-line exit codes") {
  const auto dir = scratch("cli");
  const std::string out = " --out " + dir.string();
  CHECK(cli("run " + std::string(ASDVAR_CONFIGS) + "/heat-1d.cfg" + out) == 0);
  CHECK(fs::exists(dir / "heat-1d" / "summary.json"));
  CHECK(cli("run " + write_config(dir, "problem.name = heat-1d\nbogus\n").string() + out) == 2);
  CHECK(cli("run " + write_config(dir, "problem.name = coupled-1d\nsolver.max_iter = 1\n").string() + out) == 1);
  CHECK(cli("run " + write_config(dir, "problem.name = coupled-1d\nproblem.c = 3\n").string() + out) == 3);
  CHECK(cli("run /nonexistent/file.cfg") == 2);
  CHECK(cli("") == 2);
  CHECK(cli("check algebra") == 0);
  CHECK(cli("check bogus") == 2);
  CHECK(cli("sweep " + std::string(ASDVAR_CONFIGS) + "/heat-1d.cfg --param problem.steps --values 16,32" + out) == 0);
  const std::string agg = slurp(dir / "heat-1d-sweep" / "aggregate.csv");
  CHECK(agg.rfind("value,exit_code,status,certificate", 0) == 0);
  CHECK(agg.find("\n16,0,converged,") != std::string::npos);
  CHECK(cli("sweep " + std::string(ASDVAR_CONFIGS) + "/heat-1d.cfg --param problem.bogus --values 1" + out) == 2);
  fs::remove_all(dir);
}
