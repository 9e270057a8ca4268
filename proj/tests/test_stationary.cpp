#include "asdvar/models.hpp"
#include "asdvar/stationary.hpp"

#include <doctest.h>

using namespace asdvar;

namespace {
Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

StationaryProblem linear_problem() {
  auto sp = make_space(2);
  return StationaryProblem(sp, ConvexFunction::half_norm_squared(sp), LinearMap::zero(sp), ConservativeMap::zero(sp),
                           v2(1, 0));
}
}  // namespace

TEST_CASE("certificate of the linear case") {
  const auto p = linear_problem();
  CHECK(certificate(p, v2(-1, 0)) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  const Element x = v2(0.3, -0.7);
  CHECK(certificate(p, x) == doctest::Approx(0.5 * x.squaredNorm() + x(0) + 0.5));
  CHECK(inclusion_residual(p, v2(-1, 0)) <= 1e-10);
  CHECK(inclusion_residual(p, v2(5, 5)) >= 0.1);
}

TEST_CASE("solve_minimize on the linear case") {
  const auto r = solve_minimize(linear_problem());
  CHECK(r.status == SolveStatus::converged);
  CHECK(r.certificate <= 1e-12);
  CHECK((r.x - v2(-1, 0)).norm() <= 1e-8);
}

TEST_CASE("structural defects are refused at construction") {
  auto sp = make_space(2);
  CHECK_THROWS_AS(StationaryProblem(sp, ConvexFunction::half_norm_squared(sp), LinearMap::identity(sp),
                                    ConservativeMap::zero(sp), v2(0, 0)),
                  ProblemDefectError);
  ConservativeMap bad(sp, [](const Element& x) { return Element(x); });
  CHECK_THROWS_AS(StationaryProblem(sp, ConvexFunction::half_norm_squared(sp), LinearMap::zero(sp), bad, v2(0, 0)),
                  ProblemDefectError);
}

TEST_CASE("certificate is bounded below and its gradient matches finite differences") {
  auto tr = build_transport_1d([] {
    TransportParams p;
    p.n = 16;
    return p;
  }());
  const auto& P = tr.problem;
  for (const auto& x : random_elements(P.space()->dim(), 5, 101, 0.5)) {
    const auto ev = certificate_eval(P, x, true);
    CHECK(ev.value >= -1e-9 * ev.scale);
    const Vector g = P.space()->lower(ev.gradient);
    for (int i = 0; i < P.space()->dim(); i += 5) {
      Element xp = x, xm = x;
      xp(i) += 1e-6;
      xm(i) -= 1e-6;
      CHECK(g(i) == doctest::Approx((certificate(P, xp) - certificate(P, xm)) / 2e-6).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("solve_minimize on the transport model, with descent and residual consistency") {
  auto tr = build_transport_1d(TransportParams{});
  const auto r = solve_minimize(tr.problem);
  CHECK(r.status == SolveStatus::converged);
  CHECK(r.certificate <= 1e-8);
  CHECK(r.inclusion_residual <= 1e-7);
  for (std::size_t i = 1; i < r.history.size(); ++i)
    CHECK(r.history[i].certificate <= r.history[i - 1].certificate + 1e-14 * r.scale);
  const auto o = tr.oracle();
  REQUIRE(o.converged);
  CHECK(relative_error(*tr.problem.space(), r.x, o.x) <= 1e-6);
}

TEST_CASE("Picard agrees with minimization on stationary Navier-Stokes") {
  auto ns = build_nse2d_stationary(NseParams{});
  const auto a = solve_minimize(ns.problem);
  const auto b = solve_picard(ns.problem);
  CHECK(b.status == SolveStatus::converged);
  CHECK(relative_error(*ns.problem.space(), a.x, b.x) <= 1e-8);
}

TEST_CASE("Picard reports divergence outside its regime") {
  NseParams p;
  p.nu = 0.01;
  p.forcing = FieldChoice::parse("random_seeded(3)", 50.0);
  auto ns = build_nse2d_stationary(p);
  SolveOptions o;
  o.max_iter = 300;
  CHECK(solve_picard(ns.problem, o).status != SolveStatus::converged);
}

TEST_CASE("tiny iteration budgets end in max_iter") {
  SolveOptions o;
  o.max_iter = 1;
  const auto r = solve_minimize(build_coupled_system_1d(CoupledParams{}).problem, o);
  CHECK(r.status != SolveStatus::converged);
  CHECK(!r.history.empty());
}

TEST_CASE("min-max function diagnostics") {
  auto tr = build_transport_1d([] {
    TransportParams p;
    p.n = 32;
    return p;
  }());
  const auto& P = tr.problem;
  for (const auto& x : random_elements(P.space()->dim(), 100, 201)) CHECK(minmax_value(P, x, x) <= 1e-9 * (1 + x.squaredNorm()));
  const auto lin = linear_problem();
  const auto r = solve_minimize(lin);
  const auto probes = random_elements(2, 500, 202);
  CHECK(minmax_sup(lin, r.x, probes).sup <= 1e-6);
  const Element x = v2(0.4, 0.9);
  const auto m = minmax_sup(lin, x, probes);
  CHECK(m.sup == doctest::Approx(certificate(lin, x)).epsilon(1e-6));
}
