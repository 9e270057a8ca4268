// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "asdvar/evolution.hpp"
#include "asdvar/lagrangian.hpp"
#include "asdvar/models.hpp"
#include "asdvar/runner.hpp"
#include "asdvar/stationary.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace asdvar;

namespace {

// Pinned tolerances.
constexpr double kAsdTol = 1e-5;
constexpr double kAsdSeconds = 30.0;
constexpr double kCertificateTol = 1e-6;
constexpr double kInclusionTol = 1e-6;
constexpr double kRunSeconds = 60.0;
constexpr double kOracleTol = 1e-6;
constexpr double kTaylorGreenCertificateTol = 1e-8;
constexpr double kRatioLo = 1.8;
constexpr double kRatioHi = 2.2;
constexpr double kHamiltonianTol = 1e-9;
constexpr double kSumRuleTol = 1e-6;
constexpr double kBoundaryDualityTol = 1e-10;
constexpr double kResolventIdentityTol = 1e-6;
constexpr double kLambdaFlowTol = 1e-4;
constexpr double kResolventLipschitz = 2.0;
constexpr double kDiagonalTol = 1e-9;
constexpr double kProbeSupTol = 1e-6;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok) { pass = pass && ok; }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Matrix spd(int n, std::uint64_t seed, double shift) {
  const auto cols = random_elements(n, n, seed);
  Matrix a(n, n);
  for (int j = 0; j < n; ++j) a.col(j) = cols[j];
  return a * a.transpose() / n + shift * Matrix::Identity(n, n);
}

// ---------------------------------------------------------------------------

Outcome asd_duality() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  bool boundary_hit = false;
  for (int dim : {1, 2}) {
    Matrix g = dim == 1 ? Matrix::Identity(1, 1) : spd(2, 0x61, 0.5);
    auto sp = make_space(g);
    const auto psi = ConvexFunction::quadratic_form(sp, spd(dim, 0x62 + dim, 0.5), random_elements(dim, 1, 0x63, 0.3)[0]);
    const auto chi = ConvexFunction::quadratic_form(sp, spd(dim, 0x64 + dim, 0.8));
    Matrix skew = Matrix::Zero(dim, dim);
    if (dim == 2) skew(0, 1) = 0.6, skew(1, 0) = -0.6;
    else skew(0, 0) = 0.0;
    const LinearMap b = LinearMap::dense(sp, Matrix(g.ldlt().solve(skew)));
    const auto L = Lagrangian::basic(psi), M = Lagrangian::basic(chi);
    const std::vector<std::pair<std::string, Lagrangian>> cases{
        {"basic", L},
        {"shift", Lagrangian::shift(L, b)},
        {"oplus", Lagrangian::oplus(L, M)},
        {"star", Lagrangian::star(L, M)},
        {"lambda", Lagrangian::lambda_regularize(L, 0.5, RegularizationPreset::proximal)}};
    AsdDefectOptions opts;
    opts.grid_n = 400;
    for (const auto& [name, l] : cases) {
      const auto samples = random_pairs(dim, dim == 1 ? 4 : 2, 0xA5D0 + dim, 0.6);
      const auto r = asd_defect(l, samples, opts);
      worst = std::max(worst, r.defect);
      boundary_hit = boundary_hit || r.boundary_hit;
    }
  }
  const double t = seconds_since(t0);
  o.require(worst <= kAsdTol && t <= kAsdSeconds);
  o.detail << "max defect " << sci(worst) << " (tol " << sci(kAsdTol) << "), " << sci(t) << " s"
           << (boundary_hit ? ", box boundary touched" : "");
  return o;
}

// ---------------------------------------------------------------------------

Outcome zero_infimum() {
  Outcome o;
  auto timed = [&](const std::string& name, const std::function<std::pair<double, double>()>& run) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto [cert_scaled, incl] = run();
    const double t = seconds_since(t0);
    const bool ok = cert_scaled <= kCertificateTol && incl <= kInclusionTol && t <= kRunSeconds;
    o.require(ok);
    o.detail << name << " I/scale " << sci(cert_scaled) << " res " << sci(incl) << " " << sci(t) << "s; ";
  };
  timed("heat", [] {
    const auto r = solve_path_minimize(build_heat_1d(HeatParams{}).problem);
    return std::pair{r.certificate / r.scale, r.inclusion_residual};
  });
  timed("nse-evo", [] {
    const auto r = solve_path_minimize(build_nse2d_evolution(NseEvolutionParams{}).problem);
    return std::pair{r.certificate / r.scale, r.inclusion_residual};
  });
  auto stationary = [](const StationaryProblem& p) {
    const auto r = solve_minimize(p);
    return std::pair{r.certificate / r.scale, r.inclusion_residual};
  };
  timed("transport", [&] { return stationary(build_transport_1d(TransportParams{}).problem); });
  timed("coupled", [&] { return stationary(build_coupled_system_1d(CoupledParams{}).problem); });
  timed("nse", [&] { return stationary(build_nse2d_stationary(NseParams{}).problem); });
  return o;
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  Outcome o;
  auto compare = [&](const std::string& name, const StationaryProblem& p, const OracleResult& oracle) {
    const auto r = solve_minimize(p);
    const double err = oracle.converged ? relative_error(*p.space(), r.x, oracle.x) : INFINITY;
    o.require(err <= kOracleTol);
    o.detail << name << " " << sci(err) << "; ";
  };
  TransportParams tp;
  tp.n = 128;
  auto tr = build_transport_1d(tp);
  compare("transport n=128 vs Newton", tr.problem, tr.oracle());
  CoupledParams cp;
  cp.n = 64;
  auto co = build_coupled_system_1d(cp);
  compare("coupled n=64 vs Newton", co.problem, co.oracle());
  NseParams np;
  np.grid = 32;
  np.nu = 1.0;
  auto ns = build_nse2d_stationary(np);
  compare("nse 32^2 vs spectral Picard", ns.problem, ns.oracle());
  o.detail << "tol " << sci(kOracleTol);
  return o;
}

// ---------------------------------------------------------------------------

Outcome taylor_green() {
  Outcome o;
  NseParams np;
  np.forcing = FieldChoice::parse("taylor_green");
  auto st = build_nse2d_stationary(np);
  const auto rs = solve_minimize(st.problem);
  const double rec = relative_error(*st.problem.space(), rs.x, st.basis->taylor_green());
  o.require(rs.certificate <= kTaylorGreenCertificateTol && rec <= kTaylorGreenCertificateTol);
  o.detail << "stationary I " << sci(rs.certificate) << " recovery " << sci(rec) << "; ";

  std::vector<double> errs, hs;
  for (int steps : {16, 32, 64}) {
    NseEvolutionParams ep;
    ep.stationary.grid = 16;
    ep.stationary.nu = 0.1;
    ep.stationary.forcing = FieldChoice::parse("zero");
    ep.steps = steps;
    auto m = build_nse2d_evolution(ep);
    const auto r = solve_path_minimize(m.problem);
    double err = 0.0;
    for (int k = 0; k <= steps; ++k)
      err = std::max(err, m.problem.space()->norm(r.path.nodes[k] - m.exact(m.problem.time(k))));
    errs.push_back(err / m.problem.space()->norm(m.problem.v0()));
    hs.push_back(m.problem.h());
    o.require(r.status == SolveStatus::converged);
  }
  double c = 0.0;
  for (std::size_t i = 0; i < errs.size(); ++i) c = std::max(c, errs[i] / hs[i]);
  o.detail << "evolution C " << sci(c) << " ratios";
  for (std::size_t i = 1; i < errs.size(); ++i) {
    const double ratio = errs[i - 1] / errs[i];
    o.require(ratio >= kRatioLo && ratio <= kRatioHi);
    o.detail << " " << sci(ratio);
  }
  return o;
}

// ---------------------------------------------------------------------------

Outcome energy_identity() {
  Outcome o;
  auto sequence = [&](const std::string& name, const std::function<PathProblem(int)>& build) {
    std::vector<double> d;
    for (int steps : {16, 32, 64}) {
      const PathProblem pp = build(steps);
      const auto r = solve_path_minimize(pp);
      d.push_back(energy_identity_defect(pp, r.path));
    }
    o.detail << name << " defects " << sci(d[0]) << "," << sci(d[1]) << "," << sci(d[2]) << " ratios";
    for (std::size_t i = 1; i < d.size(); ++i) {
      const double ratio = d[i - 1] / d[i];
      o.require(ratio >= kRatioLo && ratio <= kRatioHi);
      o.detail << " " << sci(ratio);
    }
    o.detail << "; ";
  };
  sequence("heat", [](int steps) {
    HeatParams p;
    p.steps = steps;
    return build_heat_1d(p).problem;
  });
  sequence("nse", [](int steps) {
    NseEvolutionParams p;
    p.stationary.grid = 16;
    p.stationary.nu = 0.1;
    p.stationary.forcing = FieldChoice::parse("zero");
    p.steps = steps;
    return build_nse2d_evolution(p).problem;
  });
  return o;
}

// ---------------------------------------------------------------------------

Outcome hamiltonian_algebra() {
  Outcome o;
  double above = -INFINITY, basic_abs = 0.0, sum_rule = 0.0;
  int samples = 0;
  for (int dim = 1; dim <= 8; ++dim) {
    auto sp = make_space(spd(dim, 0x700 + dim, 1.0));
    const auto psi = ConvexFunction::quadratic_form(sp, spd(dim, 0x710 + dim, 0.3), random_elements(dim, 1, 0x720 + dim)[0]);
    const auto chi = ConvexFunction::quadratic_form(sp, spd(dim, 0x730 + dim, 0.6));
    const auto L = Lagrangian::basic(psi), M = Lagrangian::basic(chi);
    const auto sum = Lagrangian::oplus(L, M);
    const auto reg = Lagrangian::lambda_regularize(L, 0.3, RegularizationPreset::proximal);
    const int count = dim == 8 ? 73 : 61;  // 500 in total
    const auto xs = random_elements(dim, count, 0x740 + dim);
    const auto ys = random_elements(dim, count, 0x750 + dim);
    for (int i = 0; i < count; ++i, ++samples) {
      const Element& x = xs[i];
      const double scale = 1.0 + sp->norm_squared(x) + std::abs(psi.eval(x)) + std::abs(chi.eval(x));
      const Element mx = -x;
      const double hl = L.hamiltonian(x, mx).value, hm = M.hamiltonian(x, mx).value;
      basic_abs = std::max({basic_abs, std::abs(hl) / scale, std::abs(hm) / scale});
      const auto numeric = HamiltonianMethod::numeric;
      for (double h : {hl, hm, sum.hamiltonian(x, mx, numeric).value, reg.hamiltonian(x, mx, numeric).value})
        above = std::max(above, h / scale);
      const double lhs = sum.hamiltonian(x, ys[i], numeric).value;
      const double rhs = L.hamiltonian(x, ys[i]).value + M.hamiltonian(x, ys[i]).value;
      sum_rule = std::max(sum_rule, std::abs(lhs - rhs) / (1.0 + std::abs(rhs)));
    }
  }
  o.require(above <= kHamiltonianTol && basic_abs <= kHamiltonianTol && sum_rule <= kSumRuleTol);
  o.detail << samples << " samples, max H(x,-x)/scale " << sci(above) << ", basic |H| " << sci(basic_abs)
           << ", sum rule " << sci(sum_rule);
  return o;
}

// ---------------------------------------------------------------------------

Outcome boundary_selfduality() {
  Outcome o;
  double defect = 0.0, min_excess = INFINITY;
  int checked = 0;
  for (int i = 0; i < 20; ++i) {
    const int dim = 1 + i % 4;
    auto sp = make_space(spd(dim, 0x800 + i, 0.5));
    const Element a = random_elements(dim, 1, 0x810 + i, 2.0)[0];
    const auto ell = BoundaryLagrangian::initial_value(sp, a);
    defect = std::max(defect, selfdual_boundary_defect(ell, random_pairs(dim, 5, 0x820 + i, 2.0)));
    for (const auto& [r, s] : random_pairs(dim, 50, 0x830 + i, 3.0)) {
      min_excess = std::min(min_excess, ell.eval(r, s) - 0.5 * (sp->norm_squared(s) - sp->norm_squared(r)));
      ++checked;
    }
  }
  o.require(defect <= kBoundaryDualityTol && min_excess >= 0.0);
  o.detail << "self-duality defect " << sci(defect) << ", min excess " << sci(min_excess) << " over " << checked
           << " samples";
  return o;
}

// ---------------------------------------------------------------------------

Outcome lambda_regularization() {
  Outcome o;
  double identity = 0.0, lipschitz = 0.0;
  for (int dim : {1, 2, 3}) {
    auto sp = make_space(spd(dim, 0x900 + dim, 0.7));
    const auto psi = ConvexFunction::quadratic_form(sp, spd(dim, 0x910 + dim, 0.4), random_elements(dim, 1, 0x920)[0]);
    for (const auto preset : {RegularizationPreset::proximal, RegularizationPreset::scaled}) {
      const double lambda = 0.7;
      const double alpha = preset == RegularizationPreset::proximal ? lambda : 1.0 / (lambda * lambda);
      const auto reg = Lagrangian::lambda_regularize(Lagrangian::basic(psi), lambda, preset);
      const auto pts = random_pairs(dim, 6, 0x930 + dim);
      for (const auto& [x, p] : pts) {
        const Element j = reg.prox_point(x, p);
        const Element predicted = sp->lower(Element((x - j) / alpha));
        Vector fd(dim);
        for (int i = 0; i < dim; ++i) {
          const double step = 1e-5 * (1.0 + std::abs(x(i)));
          Element xp = x, xm = x;
          xp(i) += step;
          xm(i) -= step;
          fd(i) = (reg(xp, p) - reg(xm, p)) / (2.0 * step);
        }
        identity = std::max(identity, (fd - predicted).norm() / (1.0 + predicted.norm()));
      }
      for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const auto& [x1, p1] = pts[i];
        const auto& [x2, p2] = pts[i + 1];
        const double num = sp->norm(reg.prox_point(x1, p1) - reg.prox_point(x2, p2));
        const double den = std::sqrt(sp->norm_squared(x1 - x2) + sp->norm_squared(p1 - p2));
        lipschitz = std::max(lipschitz, num / den);
      }
    }
  }
  o.require(identity <= kResolventIdentityTol && lipschitz <= kResolventLipschitz);
  o.detail << "resolvent identity " << sci(identity) << ", Lipschitz " << sci(lipschitz);

  for (double nu : {0.01, 1.0}) {
    HeatParams hp;
    hp.nu = nu;
    const auto model = build_heat_1d(hp);
    const auto plain = solve_path_minimize(model.problem);
    const auto flow = lambda_flow(model.problem, {1.0, 0.1, 0.01});
    double gap = 0.0;
    for (std::size_t k = 0; k < plain.path.nodes.size(); ++k)
      gap = std::max(gap, relative_error(*model.problem.space(), flow.path.nodes[k], plain.path.nodes[k]));
    if (nu == 0.01) o.require(gap <= kLambdaFlowTol && flow.status == SolveStatus::converged);
    o.detail << "; heat nu=" << nu << " flow gap " << sci(gap) << (nu == 0.01 ? "" : " (informational)");
  }
  return o;
}

// ---------------------------------------------------------------------------

Outcome minmax_diagnostic() {
  Outcome o;
  double diag = -INFINITY, sup = -INFINITY;
  auto probe = [&](const StationaryProblem& p) {
    const int n = p.space()->dim();
    const auto r = solve_minimize(p);
    for (const auto& x : random_elements(n, 100, 0xA00 + n)) {
      const double scale = 1.0 + std::abs(p.phi().eval(x)) + p.space()->norm_squared(x);
      diag = std::max(diag, minmax_value(p, x, x) / scale);
    }
    const auto probes = random_elements(n, 20, 0xA10 + n, 0.1);
    std::vector<Element> shifted;
    for (const auto& d : probes) shifted.push_back(r.x + d);
    sup = std::max(sup, minmax_sup(p, r.x, shifted).sup / r.scale);
  };
  probe(build_transport_1d(TransportParams{}).problem);
  probe(build_coupled_system_1d(CoupledParams{}).problem);
  probe(build_nse2d_stationary(NseParams{}).problem);
  NseParams perturbed;
  perturbed.grid = 16;
  perturbed.perturbation = 0.1;
  probe(build_nse2d_stationary(perturbed).problem);
  probe(build_heat_1d(HeatParams{}).problem.base());
  o.require(diag <= kDiagonalTol && sup <= kProbeSupTol);
  o.detail << "max M(x,x)/scale " << sci(diag) << ", max probe sup/scale " << sci(sup);
  return o;
}

// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome o;
  const auto root = std::filesystem::temp_directory_path() / "asdvar-acceptance-determinism";
  std::filesystem::remove_all(root);
  const std::vector<std::string> configs{
      "problem.name = nse2d-stationary\nproblem.grid = 16\nproblem.forcing = random_seeded\n",
      "problem.name = heat-1d\nproblem.initial = random_seeded\nsolver.method = lambda_flow\n",
      "problem.name = transport-1d\nproblem.n = 64\n"};
  int identical = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const RunConfig rc = parse_run_config(Config::parse_string(configs[i]), 12345);
    const auto a = execute_run(rc, (root / ("a" + std::to_string(i))).string());
    const auto b = execute_run(rc, (root / ("b" + std::to_string(i))).string());
    const bool same = slurp(root / ("a" + std::to_string(i)) / "summary.json") ==
                          slurp(root / ("b" + std::to_string(i)) / "summary.json") &&
                      a.exit_code == b.exit_code;
    identical += same;
    o.require(same);
  }
  std::filesystem::remove_all(root);
  o.detail << identical << "/" << configs.size() << " repeated runs bit-identical";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"ASD duality suite", asd_duality},
      {"Zero-infimum certificates", zero_infimum},
      {"Oracle equivalence", oracle_equivalence},
      {"Taylor-Green exactness", taylor_green},
      {"Energy identity first order", energy_identity},
      {"Hamiltonian algebra", hamiltonian_algebra},
      {"Boundary Lagrangian self-duality", boundary_selfduality},
      {"Lambda-regularization", lambda_regularization},
      {"Min-max diagnostic", minmax_diagnostic},
      {"Determinism", determinism},
  };
  int failures = 0, index = 0;
  for (const auto& c : criteria) {
    ++index;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "raised: " << e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << index << "] " << c.name << ": " << o.detail.str() << std::endl;
  }
  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria FAILED")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
