#include "asdvar/runner.hpp"

#include "asdvar/lagrangian.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

namespace asdvar {

namespace fs = std::filesystem;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string number(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

bool is_path_problem(const std::string& name) { return name == "heat-1d" || name == "nse2d-evolution"; }

const std::set<std::string> kCommonKeys = {
    "problem.name",   "solver.method",      "solver.max_iter",     "solver.gtol",      "solver.certificate_tol",
    "solver.threshold", "solver.lambdas",   "solver.damping",      "output.dir",       "output.name",
    "output.write_solution", "run.seed"};

const std::map<std::string, std::set<std::string>> kProblemKeys = {
    {"heat-1d", {"problem.n", "problem.nu", "problem.bc", "problem.T", "problem.steps", "problem.initial",
                 "problem.initial_amplitude"}},
    {"transport-1d", {"problem.n", "problem.nu", "problem.m", "problem.a", "problem.a0", "problem.convection",
                      "problem.forcing", "problem.forcing_amplitude"}},
    {"nse2d-stationary", {"problem.grid", "problem.nu", "problem.forcing", "problem.forcing_amplitude",
                          "problem.perturbation"}},
    {"nse2d-evolution", {"problem.grid", "problem.nu", "problem.forcing", "problem.forcing_amplitude",
                         "problem.perturbation", "problem.initial", "problem.initial_amplitude", "problem.T",
                         "problem.steps"}},
    {"coupled-1d", {"problem.n", "problem.p", "problem.q", "problem.m", "problem.c", "problem.b1", "problem.b2",
                    "problem.f_amplitude", "problem.g_amplitude"}},
};

FieldChoice field(const Config& cfg, const std::string& key, const std::string& fallback, double amplitude,
                  std::uint64_t seed) {
  const std::string text = cfg.get_string(key, fallback);
  if (text == "random_seeded") {
    FieldChoice c;
    c.name = "random_seeded";
    c.seed = seed;
    c.amplitude = amplitude;
    return c;
  }
  try {
    return FieldChoice::parse(text, amplitude);
  } catch (const std::invalid_argument& e) {
    cfg.fail(key, e.what());
  }
}

int positive_int(const Config& cfg, const std::string& key, int fallback) {
  const int v = cfg.get_int(key, fallback);
  if (v <= 0) cfg.fail(key, "must be positive");
  return v;
}

double positive(const Config& cfg, const std::string& key, double fallback) {
  const double v = cfg.get_double(key, fallback);
  if (!(v > 0)) cfg.fail(key, "must be positive");
  return v;
}

}  // namespace

RunConfig parse_run_config(const Config& cfg, std::optional<std::uint64_t> seed_override) {
  RunConfig rc;
  rc.source = cfg;
  cfg.require("problem.name");
  rc.problem = cfg.get_string("problem.name", "");
  const auto pk = kProblemKeys.find(rc.problem);
  if (pk == kProblemKeys.end()) cfg.fail("problem.name", "unknown problem '" + rc.problem + "'");
  std::set<std::string> allowed = kCommonKeys;
  allowed.insert(pk->second.begin(), pk->second.end());
  cfg.require_known(allowed);
  rc.seed = seed_override ? *seed_override : cfg.get_u64("run.seed", 0);

  if (rc.problem == "heat-1d") {
    HeatParams p;
    p.n = positive_int(cfg, "problem.n", p.n);
    p.nu = positive(cfg, "problem.nu", p.nu);
    const std::string bc = cfg.get_string("problem.bc", "dirichlet");
    if (bc == "dirichlet") p.bc = HeatBoundary::dirichlet;
    else if (bc == "periodic") p.bc = HeatBoundary::periodic;
    else cfg.fail("problem.bc", "expected dirichlet or periodic");
    p.horizon = positive(cfg, "problem.T", p.horizon);
    p.steps = positive_int(cfg, "problem.steps", p.steps);
    p.initial = field(cfg, "problem.initial", "sine", cfg.get_double("problem.initial_amplitude", 1.0), rc.seed);
    if (p.initial.name == "taylor_green") cfg.fail("problem.initial", "not available for heat-1d");
    rc.settings = p;
  } else if (rc.problem == "transport-1d") {
    TransportParams p;
    p.n = positive_int(cfg, "problem.n", p.n);
    p.nu = positive(cfg, "problem.nu", p.nu);
    p.m = cfg.get_double("problem.m", p.m);
    const double a = cfg.get_double("problem.a", 1.0), a0 = cfg.get_double("problem.a0", 0.0);
    p.a = [a](double) { return a; };
    p.a0 = [a0](double) { return a0; };
    p.convection = cfg.get_bool("problem.convection", true);
    const std::string forcing = cfg.get_string("problem.forcing", "sine");
    const double amp = cfg.get_double("problem.forcing_amplitude", 1.0);
    if (forcing == "sine") p.forcing = [amp](double x) { return amp * std::sin(2.0 * std::numbers::pi * x); };
    else if (forcing == "zero") p.forcing = [](double) { return 0.0; };
    else cfg.fail("problem.forcing", "expected sine or zero");
    rc.settings = p;
  } else if (rc.problem == "nse2d-stationary" || rc.problem == "nse2d-evolution") {
    NseParams p;
    p.grid = positive_int(cfg, "problem.grid", p.grid);
    p.nu = positive(cfg, "problem.nu", p.nu);
    p.forcing = field(cfg, "problem.forcing", rc.problem == "nse2d-evolution" ? "zero" : "random_seeded(1)",
                      cfg.get_double("problem.forcing_amplitude", 1.0), rc.seed);
    if (p.forcing.name == "sine") cfg.fail("problem.forcing", "not available for Navier-Stokes problems");
    p.perturbation = cfg.get_double("problem.perturbation", 0.0);
    if (rc.problem == "nse2d-stationary") {
      rc.settings = p;
    } else {
      NseEvolutionParams e;
      e.stationary = p;
      e.initial = field(cfg, "problem.initial", "taylor_green", cfg.get_double("problem.initial_amplitude", 1.0),
                        rc.seed);
      if (e.initial.name == "sine") cfg.fail("problem.initial", "not available for Navier-Stokes problems");
      e.horizon = positive(cfg, "problem.T", e.horizon);
      e.steps = positive_int(cfg, "problem.steps", e.steps);
      rc.settings = e;
    }
  } else {
    CoupledParams p;
    p.n = positive_int(cfg, "problem.n", p.n);
    p.p = cfg.get_double("problem.p", p.p);
    p.q = cfg.get_double("problem.q", p.q);
    p.m = cfg.get_int("problem.m", p.m);
    p.c = cfg.get_double("problem.c", p.c);
    p.b1 = cfg.get_double("problem.b1", p.b1);
    p.b2 = cfg.get_double("problem.b2", p.b2);
    const double fa = cfg.get_double("problem.f_amplitude", 0.5), ga = cfg.get_double("problem.g_amplitude", 0.3);
    p.f = [fa](double x) { return fa * std::sin(std::numbers::pi * x); };
    p.g = [ga](double x) { return ga * std::sin(2.0 * std::numbers::pi * x); };
    rc.settings = p;
  }

  const bool path = is_path_problem(rc.problem);
  rc.method = cfg.get_string("solver.method", path ? "path_minimize" : "minimize");
  const std::set<std::string> ok = path ? std::set<std::string>{"path_minimize", "marching", "lambda_flow"}
                                        : std::set<std::string>{"minimize", "picard"};
  if (!ok.count(rc.method)) cfg.fail("solver.method", "'" + rc.method + "' is not available for " + rc.problem);
  rc.max_iter = positive_int(cfg, "solver.max_iter", rc.max_iter);
  if (cfg.has("solver.gtol")) rc.gtol = positive(cfg, "solver.gtol", 1.0);
  rc.certificate_tol = positive(cfg, "solver.certificate_tol", rc.certificate_tol);
  if (cfg.has("solver.threshold")) rc.threshold = positive(cfg, "solver.threshold", 1.0);
  rc.lambdas = cfg.get_list("solver.lambdas", rc.lambdas);
  if (rc.lambdas.empty()) cfg.fail("solver.lambdas", "must not be empty");
  for (std::size_t i = 0; i < rc.lambdas.size(); ++i)
    if (!(rc.lambdas[i] > 0) || (i > 0 && !(rc.lambdas[i] < rc.lambdas[i - 1])))
      cfg.fail("solver.lambdas", "must be positive and strictly decreasing");
  rc.damping = cfg.get_double("solver.damping", rc.damping);
  if (!(rc.damping > 0 && rc.damping <= 1)) cfg.fail("solver.damping", "must lie in (0, 1]");
  rc.out_dir = cfg.get_string("output.dir", rc.out_dir);
  rc.name = cfg.get_string("output.name", rc.problem);
  if (rc.name.find('/') != std::string::npos || rc.name == "." || rc.name == "..")
    cfg.fail("output.name", "must be a plain directory name");
  rc.write_solution = cfg.get_bool("output.write_solution", true);
  return rc;
}

std::string resolve_out_dir(const RunConfig& rc, const std::optional<std::string>& cli_out) {
  if (cli_out) return *cli_out;
  if (const char* env = std::getenv("OUT_DIR"); env && *env) return env;
  return rc.out_dir;
}

std::string RunSummary::to_json() const {
  std::ostringstream os;
  os << "{\n";
  os << "  \"problem\": " << quoted(problem) << ",\n";
  os << "  \"solver\": " << quoted(solver) << ",\n";
  os << "  \"status\": " << quoted(status) << ",\n";
  os << "  \"exit_code\": " << exit_code << ",\n";
  os << "  \"seed\": " << seed << ",\n";
  os << "  \"dim\": " << dim << ",\n";
  os << "  \"steps\": " << steps << ",\n";
  os << "  \"certificate\": " << number(certificate) << ",\n";
  os << "  \"scale\": " << number(scale) << ",\n";
  os << "  \"threshold\": " << number(threshold) << ",\n";
  os << "  \"inclusion_residual\": " << number(inclusion_residual) << ",\n";
  os << "  \"iterations\": " << iterations << ",\n";
  os << "  \"oracle\": " << quoted(oracle) << ",\n";
  os << "  \"oracle_error\": " << number(oracle_error) << ",\n";
  os << "  \"energy_defect\": " << number(energy_defect) << ",\n";
  os << "  \"unregularized_certificate\": " << number(unregularized_certificate) << ",\n";
  os << "  \"defects\": {\"skew\": " << number(skew_defect) << ", \"boundary\": " << number(boundary_defect)
     << ", \"conservativity\": " << number(conservativity_defect) << "},\n";
  os << "  \"message\": " << quoted(message) << "\n";
  os << "}\n";
  return os.str();
}

namespace {

void write_history(const fs::path& file, const std::vector<HistoryEntry>& h) {
  std::ofstream out(file);
  out << "iteration,certificate,grad_norm\n" << std::setprecision(17);
  for (std::size_t i = 0; i < h.size(); ++i) out << i << ',' << h[i].certificate << ',' << h[i].grad_norm << '\n';
}

void write_vector_csv(const fs::path& file, const Element& x) {
  std::ofstream out(file);
  out << "index,value\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < x.size(); ++i) out << i << ',' << x(i) << '\n';
}

Element read_vector_csv(const fs::path& file) {
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  std::vector<double> vals;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    vals.push_back(std::stod(line.substr(comma + 1)));
  }
  return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

DiscretePath read_path_csv(const fs::path& file, int dim, double h) {
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  DiscretePath p;
  p.h = h;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // t
    Element u(dim);
    for (int i = 0; i < dim; ++i) {
      std::getline(ss, cell, ',');
      u(i) = std::stod(cell);
    }
    p.nodes.push_back(u);
  }
  return p;
}

void fill_defects(RunSummary& s, const StationaryProblem& p) {
  s.skew_defect = p.defects().skew;
  s.boundary_defect = p.defects().boundary;
  s.conservativity_defect = p.defects().conservativity;
}

struct StationaryBuild {
  std::optional<StationaryProblem> problem;
  std::function<OracleResult()> oracle;
  std::string oracle_name;
};

struct PathBuild {
  std::optional<PathProblem> problem;
  std::function<Element(double)> exact;
  std::string oracle_name;
};

}  // namespace

RunResult execute_run(const RunConfig& rc, const std::string& directory) {
  const auto start = std::chrono::steady_clock::now();
  RunResult res;
  res.directory = directory;
  RunSummary& s = res.summary;
  s.problem = rc.problem;
  s.solver = rc.method;
  s.seed = rc.seed;
  s.oracle_error = kNaN;
  s.energy_defect = kNaN;
  s.unregularized_certificate = kNaN;
  fs::create_directories(directory);
  const fs::path dir(directory);

  auto finish = [&](int code) {
    s.exit_code = code;
    res.exit_code = code;
    {
      std::ofstream out(dir / "summary.json");
      out << s.to_json();
    }
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream t(dir / "timing.txt");
    t << "wall_seconds=" << std::setprecision(6) << res.wall_seconds << '\n';
    return res;
  };

  StationaryBuild sb;
  PathBuild pb;
  try {
    if (const auto* p = std::get_if<HeatParams>(&rc.settings)) {
      auto m = build_heat_1d(*p);
      pb.problem = m.problem;
      pb.exact = m.semi_discrete;
      pb.oracle_name = m.semi_discrete ? "exact_formula" : "none";
    } else if (const auto* p = std::get_if<NseEvolutionParams>(&rc.settings)) {
      auto m = build_nse2d_evolution(*p);
      pb.problem = m.problem;
      pb.exact = m.exact;
      pb.oracle_name = m.exact ? "exact_formula" : "none";
    } else if (const auto* p = std::get_if<TransportParams>(&rc.settings)) {
      auto m = build_transport_1d(*p);
      sb.problem = m.problem;
      sb.oracle = m.oracle;
      sb.oracle_name = to_string(OracleKind::newton);
    } else if (const auto* p = std::get_if<NseParams>(&rc.settings)) {
      auto m = build_nse2d_stationary(*p);
      sb.problem = m.problem;
      sb.oracle = m.oracle;
      sb.oracle_name = p->perturbation == 0.0 ? to_string(OracleKind::picard_spectral) : "none";
    } else if (const auto* p = std::get_if<CoupledParams>(&rc.settings)) {
      auto m = build_coupled_system_1d(*p);
      sb.problem = m.problem;
      sb.oracle = m.oracle;
      sb.oracle_name = to_string(OracleKind::newton);
    }
  } catch (const std::exception& e) {
    s.status = "build_error";
    s.message = e.what();
    res.error = e.what();
    s.certificate = s.scale = s.threshold = s.inclusion_residual = kNaN;
    return finish(exit_build_error);
  }

  bool converged = false;
  std::function<double()> recompute;
  try {
    if (sb.problem) {
      const StationaryProblem& P = *sb.problem;
      fill_defects(s, P);
      s.dim = P.space()->dim();
      SolveOptions so;
      so.max_iter = rc.max_iter;
      if (rc.gtol) so.gtol = *rc.gtol;
      so.certificate_tol = rc.certificate_tol;
      so.damping = rc.damping;
      const SolveReport rep = rc.method == "picard" ? solve_picard(P, so) : solve_minimize(P, so);
      converged = rep.status == SolveStatus::converged;
      s.status = to_string(rep.status);
      s.certificate = rep.certificate;
      s.scale = rep.scale;
      s.inclusion_residual = rep.inclusion_residual;
      s.iterations = rep.iterations;
      s.message = rep.message;
      s.oracle = sb.oracle_name;
      if (sb.oracle && sb.oracle_name != "none") {
        const auto o = sb.oracle();
        if (o.converged) s.oracle_error = relative_error(*P.space(), rep.x, o.x);
      }
      write_history(dir / "history.csv", rep.history);
      if (rc.write_solution) {
        write_vector_csv(dir / "solution.csv", rep.x);
        recompute = [&P, dir]() { return certificate(P, read_vector_csv(dir / "solution.csv")); };
      }
    } else {
      const PathProblem& PP = *pb.problem;
      fill_defects(s, PP.base());
      s.dim = PP.space()->dim();
      s.steps = PP.steps();
      PathSolveOptions po;
      po.max_iter = rc.max_iter;
      if (rc.gtol) po.gtol = *rc.gtol;
      po.certificate_tol = rc.certificate_tol;
      po.step.certificate_tol = rc.certificate_tol;
      PathReport rep;
      std::optional<PathProblem> certified;
      if (rc.method == "marching") {
        rep = solve_marching_prox(PP, po);
      } else if (rc.method == "lambda_flow") {
        rep = lambda_flow(PP, rc.lambdas, po);
        const double alpha = rc.lambdas.back();
        certified = PP.with_psi([alpha](const ConvexFunction& psi) { return ConvexFunction::moreau_envelope(psi, alpha); });
        s.unregularized_certificate = rep.unregularized_certificates.back();
      } else {
        rep = solve_path_minimize(PP, po);
      }
      converged = rep.status == SolveStatus::converged;
      s.status = to_string(rep.status);
      s.certificate = rep.certificate;
      s.scale = rep.scale;
      s.inclusion_residual = rep.inclusion_residual;
      s.iterations = rep.iterations;
      s.message = rep.message;
      s.energy_defect = rep.energy_defect;
      s.oracle = pb.oracle_name;
      if (pb.exact) s.oracle_error = relative_error(*PP.space(), rep.path.nodes.back(), pb.exact(PP.horizon()));
      write_history(dir / "history.csv", rep.history);
      if (rc.write_solution) {
        {
          std::ofstream out(dir / "path.csv");
          write_path_csv(out, rep.path, rep.step_gaps);
        }
        const PathProblem target = certified ? *certified : PP;
        const int n = PP.space()->dim();
        recompute = [target, dir, n]() {
          return path_certificate(target, read_path_csv(dir / "path.csv", n, target.h())).value;
        };
      }
    }
  } catch (const std::exception& e) {
    s.status = "failed";
    s.message = std::string("solver error: ") + e.what();
    res.error = s.message;
    s.threshold = rc.threshold ? *rc.threshold : kNaN;
    return finish(exit_solve_failure);
  }

  s.threshold = rc.threshold ? *rc.threshold : rc.certificate_tol * s.scale;
  int code = converged && s.certificate <= s.threshold ? exit_ok : exit_solve_failure;
  res = finish(code);

  // Write-read self-check of the summary against the stored solution.
  if (recompute) {
    std::ifstream in(dir / "summary.json");
    const auto j = nlohmann::json::parse(in, nullptr, false);
    double stored = kNaN;
    if (!j.is_discarded() && j.contains("certificate") && j["certificate"].is_number())
      stored = j["certificate"].get<double>();
    const double again = recompute();
    const bool same = (std::isnan(stored) && !std::isfinite(s.certificate)) ||
                      std::abs(stored - again) <= 1e-12 * (1.0 + std::abs(again));
    if (!same) {
      std::ostringstream os;
      os << "summary self-check failed: stored certificate " << number(stored) << " vs recomputed " << number(again);
      s.message += (s.message.empty() ? "" : "; ") + os.str();
      res.error = os.str();
      res = finish(exit_solve_failure);
    }
  }
  return res;
}

int run_command(const std::string& config_path, std::optional<std::uint64_t> seed,
                const std::optional<std::string>& out, std::ostream& log) {
  RunConfig rc;
  try {
    rc = parse_run_config(Config::load(config_path), seed);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return exit_config_error;
  }
  const fs::path dir = fs::path(resolve_out_dir(rc, out)) / rc.name;
  const RunResult r = execute_run(rc, dir.string());
  log << r.summary.to_json();
  log << "wrote " << dir.string() << " (exit " << r.exit_code << ")\n";
  if (!r.error.empty()) log << "error: " << r.error << '\n';
  return r.exit_code;
}

// ---------------------------------------------------------------------------
// Property-check suites.

namespace {

void add(std::vector<CheckRow>& rows, const std::string& suite, const std::string& name, double value, double tol,
         bool lower_is_ok = true) {
  const bool pass = std::isfinite(value) && (lower_is_ok ? value <= tol : value >= tol);
  rows.push_back({suite, name, value, tol, pass});
}

void algebra_checks(std::vector<CheckRow>& rows) {
  const std::string S = "algebra";
  auto s1 = make_space(1);
  Matrix g2(2, 2);
  g2 << 2.0, 0.3, 0.3, 1.0;
  auto s2 = make_space(g2);
  const auto psi1 = ConvexFunction::quadratic_form(s1, Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 0.5));
  Matrix e2(2, 2), e3(2, 2);
  e2 << 3.0, 1.0, 1.0, 2.0;
  e3 << 1.0, -0.2, -0.2, 0.5;
  const auto psi2 = ConvexFunction::quadratic_form(s2, e2, (Vector(2) << 0.2, -0.1).finished());
  const auto psi3 = ConvexFunction::quadratic_form(s2, e3, (Vector(2) << -0.3, 0.4).finished());
  Matrix skew(2, 2);
  skew << 0.0, 0.7, -0.7, 0.0;
  const LinearMap b = LinearMap::dense(s2, Matrix(g2.ldlt().solve(skew)));
  const auto L1 = Lagrangian::basic(psi1);
  const auto L2 = Lagrangian::basic(psi2);
  const auto M2 = Lagrangian::basic(psi3);
  struct Case {
    std::string name;
    Lagrangian l;
  };
  std::vector<Case> cases{{"asd basic dim1", L1},
                          {"asd basic dim2", L2},
                          {"asd shift dim2", Lagrangian::shift(L2, b)},
                          {"asd oplus dim1", Lagrangian::oplus(L1, Lagrangian::basic(ConvexFunction::half_norm_squared(s1)))},
                          {"asd star dim1", Lagrangian::star(L1, Lagrangian::basic(ConvexFunction::half_norm_squared(s1)))},
                          {"asd lambda_reg dim2", Lagrangian::lambda_regularize(L2, 0.5, RegularizationPreset::proximal)}};
  AsdDefectOptions opts;
  opts.grid_n = 200;
  for (const auto& c : cases) {
    const auto samples = random_pairs(c.l.space()->dim(), 3, 0xA5D, 0.8);
    add(rows, S, c.name, asd_defect(c.l, samples, opts).defect, 1e-5);
  }
  // Boundary Lagrangian self-duality and inequality.
  double sd = 0.0, ineq = kInfinity;
  for (int i = 0; i < 20; ++i) {
    const int dim = 1 + i % 4;
    auto sp = make_space(dim);
    const Element a = random_elements(dim, 1, 100 + i).front();
    const auto ell = BoundaryLagrangian::initial_value(sp, a);
    sd = std::max(sd, selfdual_boundary_defect(ell, random_pairs(dim, 5, 200 + i)));
    for (const auto& [r, q] : random_pairs(dim, 50, 300 + i, 2.0))
      ineq = std::min(ineq, ell.eval(r, q) - 0.5 * (q.squaredNorm() - r.squaredNorm()));
  }
  add(rows, S, "boundary self-duality", sd, 1e-10);
  add(rows, S, "boundary inequality (min excess)", ineq, -1e-12, false);
  // Hamiltonian algebra.
  double hmax = -kInfinity, hsum = 0.0;
  const auto Lsum = Lagrangian::oplus(L2, M2);
  const auto xs = random_elements(2, 60, 0x4a11);
  const auto ys = random_elements(2, 60, 0x4a12);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Element& x = xs[i];
    const double scale = 1.0 + s2->norm_squared(x) + std::abs(psi2.eval(x));
    for (const auto* l : {&L2, &M2, &Lsum})
      hmax = std::max(hmax, l->hamiltonian(x, Element(-x), HamiltonianMethod::numeric).value / scale);
    const double lhs = Lsum.hamiltonian(x, ys[i], HamiltonianMethod::numeric).value;
    const double rhs = L2.hamiltonian(x, ys[i]).value + M2.hamiltonian(x, ys[i]).value;
    hsum = std::max(hsum, std::abs(lhs - rhs) / (1.0 + std::abs(rhs)));
  }
  add(rows, S, "H(x,-x) <= 0 (max scaled)", hmax, 1e-9);
  add(rows, S, "oplus Hamiltonian sum rule", hsum, 1e-6);
}

void operator_checks(std::vector<CheckRow>& rows) {
  const std::string S = "operators";
  auto tr = build_transport_1d(TransportParams{});
  add(rows, S, "transport skew", tr.problem.defects().skew, 1e-8);
  add(rows, S, "transport conservativity", tr.problem.defects().conservativity, 1e-8);
  auto cp = build_coupled_system_1d(CoupledParams{});
  add(rows, S, "coupled skew", cp.problem.defects().skew, 1e-8);
  add(rows, S, "coupled conservativity", cp.problem.defects().conservativity, 1e-8);
  NseParams np;
  np.grid = 16;
  np.perturbation = 0.1;
  auto ns = build_nse2d_stationary(np);
  add(rows, S, "nse perturbation skew", ns.problem.defects().skew, 1e-8);
  add(rows, S, "nse conservativity", ns.problem.defects().conservativity, 1e-8);
  double div = 0.0;
  for (const auto& c : random_elements(ns.basis->dim(), 3, 0xd17))
    div = std::max(div, ns.basis->divergence_defect(Vector(ns.basis->convection(c))));
  add(rows, S, "nse convection divergence-free", div, 1e-10);
  auto vjp_err = [](const ConservativeMap& lam, std::uint64_t seed) {
    double worst = 0.0;
    const int n = lam.space()->dim();
    const auto xs = random_elements(n, 2, seed, 0.5);
    const auto ws = random_elements(n, 2, seed + 1);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const Element a = lam.vjp(xs[i], ws[i]);
      const Element f = vjp_fd(lam, xs[i], ws[i], default_vjp_step(*lam.space(), xs[i]));
      worst = std::max(worst, (a - f).norm() / (1.0 + a.norm()));
    }
    return worst;
  };
  add(rows, S, "transport vjp vs finite differences", vjp_err(tr.problem.lambda(), 0x71), 1e-6);
  add(rows, S, "coupled vjp vs finite differences", vjp_err(cp.problem.lambda(), 0x72), 1e-6);
  add(rows, S, "nse vjp vs finite differences", vjp_err(ns.problem.lambda(), 0x73), 1e-6);
  auto node = make_space(2);
  const auto sbp = sbp_time_derivative(node, 8, 1.0);
  add(rows, S, "time derivative boundary identity",
      boundary_skew_defect(*sbp.path_space, sbp.derivative, sbp.traces,
                           random_elements(sbp.path_space->dim(), 10, 0x5b9)),
      1e-12);
  Matrix gd(3, 3), gc(2, 2), a(2, 3);
  gd << 2.0, 0.1, 0.0, 0.1, 1.0, 0.2, 0.0, 0.2, 1.5;
  gc << 1.0, 0.4, 0.4, 3.0;
  a << 1.0, -2.0, 0.5, 0.3, 0.0, 4.0;
  const LinearMap am = LinearMap::dense(make_space(gd), make_space(gc), a);
  std::vector<ElementPair> pairs;
  const auto xs = random_elements(3, 10, 0xad1), ys = random_elements(2, 10, 0xad2);
  for (int i = 0; i < 10; ++i) pairs.emplace_back(xs[i], ys[i]);
  double adj = 0.0;
  for (const auto& [x, y] : pairs)
    adj = std::max(adj, std::abs(am.codomain()->inner(y, am.apply(x)) - am.domain()->inner(am.adjoint_apply(y), x)) /
                            (1.0 + x.norm() * y.norm()));
  add(rows, S, "adjoint in weighted pairings", adj, 1e-12);
}

void problem_checks(std::vector<CheckRow>& rows) {
  const std::string S = "problems";
  {
    auto heat = build_heat_1d(HeatParams{});
    const auto rep = solve_path_minimize(heat.problem);
    add(rows, S, "heat-1d path certificate / scale", rep.certificate / rep.scale, 1e-6);
    const auto ref = heat.resolvent_path();
    double diff = 0.0;
    for (std::size_t k = 0; k < ref.nodes.size(); ++k)
      diff = std::max(diff, relative_error(*heat.problem.space(), rep.path.nodes[k], ref.nodes[k]));
    add(rows, S, "heat-1d path vs resolvent", diff, 1e-8);
  }
  auto stationary = [&](const std::string& name, const StationaryProblem& p, const std::function<OracleResult()>& oracle) {
    const auto rep = solve_minimize(p);
    add(rows, S, name + " certificate / scale", rep.certificate / rep.scale, 1e-6);
    add(rows, S, name + " inclusion residual", rep.inclusion_residual, 1e-6);
    if (oracle) {
      const auto o = oracle();
      add(rows, S, name + " vs oracle", o.converged ? relative_error(*p.space(), rep.x, o.x) : kNaN, 1e-6);
    }
  };
  {
    auto m = build_transport_1d(TransportParams{});
    stationary("transport-1d", m.problem, m.oracle);
  }
  {
    auto m = build_coupled_system_1d(CoupledParams{});
    stationary("coupled-1d", m.problem, m.oracle);
  }
  {
    auto m = build_nse2d_stationary(NseParams{});
    stationary("nse2d-stationary", m.problem, m.oracle);
  }
  {
    NseParams p;
    p.forcing = FieldChoice::parse("taylor_green");
    auto m = build_nse2d_stationary(p);
    const auto rep = solve_minimize(m.problem);
    add(rows, S, "taylor-green certificate", rep.certificate, 1e-8);
    add(rows, S, "taylor-green recovery",
        relative_error(*m.problem.space(), rep.x, m.basis->taylor_green()), 1e-8);
  }
}

}  // namespace

std::vector<CheckRow> run_checks(const std::string& suite) {
  if (suite != "algebra" && suite != "operators" && suite != "problems" && suite != "all")
    throw std::invalid_argument("unknown check suite '" + suite + "'");
  std::vector<CheckRow> rows;
  auto guard = [&](const std::string& s, void (*fn)(std::vector<CheckRow>&)) {
    try {
      fn(rows);
    } catch (const std::exception& e) {
      rows.push_back({s, std::string("suite raised: ") + e.what(), kNaN, 0.0, false});
    }
  };
  if (suite == "algebra" || suite == "all") guard("algebra", algebra_checks);
  if (suite == "operators" || suite == "all") guard("operators", operator_checks);
  if (suite == "problems" || suite == "all") guard("problems", problem_checks);
  return rows;
}

int check_command(const std::string& suite, std::ostream& out) {
  std::vector<CheckRow> rows;
  try {
    rows = run_checks(suite);
  } catch (const std::invalid_argument& e) {
    out << e.what() << '\n';
    return exit_config_error;
  }
  bool all = true;
  out << std::left << std::setw(6) << "result" << "  " << std::setw(10) << "suite" << "  " << std::setw(44) << "check"
      << "  " << std::setw(24) << "value" << "  tolerance\n";
  for (const auto& r : rows) {
    all = all && r.pass;
    out << std::left << std::setw(6) << (r.pass ? "PASS" : "FAIL") << "  " << std::setw(10) << r.suite << "  "
        << std::setw(44) << r.name << "  " << std::setw(24) << number(r.value) << "  " << number(r.tolerance) << '\n';
  }
  out << (all ? "all checks passed" : "some checks FAILED") << '\n';
  return all ? exit_ok : exit_solve_failure;
}

int sweep_command(const std::string& config_path, const std::string& parameter, const std::vector<std::string>& values,
                  std::optional<std::uint64_t> seed, const std::optional<std::string>& out, std::ostream& log) {
  Config base;
  std::vector<RunConfig> configs;
  try {
    base = Config::load(config_path);
    if (values.empty()) throw ConfigError("sweep needs at least one value", 0, parameter);
    for (const auto& v : values) {
      Config c = base;
      c.set(parameter, v);
      configs.push_back(parse_run_config(c, seed));
    }
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return exit_config_error;
  }
  const fs::path root = fs::path(resolve_out_dir(configs.front(), out)) / (configs.front().name + "-sweep");
  std::vector<std::future<RunResult>> jobs;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const fs::path dir = root / (parameter + "=" + values[i]);
    jobs.push_back(std::async(std::launch::async, [rc = configs[i], dir]() { return execute_run(rc, dir.string()); }));
  }
  int worst = exit_ok;
  fs::create_directories(root);
  std::ofstream agg(root / "aggregate.csv");
  agg << "value,exit_code,status,certificate,oracle_error,energy_defect,unregularized_certificate\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const RunResult r = jobs[i].get();
    worst = std::max(worst, r.exit_code);
    agg << values[i] << ',' << r.exit_code << ',' << r.summary.status << ',' << number(r.summary.certificate) << ','
        << number(r.summary.oracle_error) << ',' << number(r.summary.energy_defect) << ','
        << number(r.summary.unregularized_certificate) << '\n';
    log << parameter << '=' << values[i] << ": exit " << r.exit_code << ", certificate "
        << number(r.summary.certificate) << ", oracle error " << number(r.summary.oracle_error) << '\n';
  }
  log << "wrote " << (root / "aggregate.csv").string() << '\n';
  return worst;
}

}  // namespace asdvar
