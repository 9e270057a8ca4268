#include "asdvar/models.hpp"
#include "asdvar/spectral.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace asdvar;

TEST_CASE("heat model matches the Fourier decay") {
  auto m = build_heat_1d(HeatParams{});
  const Element ut = m.exact(0.1);
  for (int i = 0; i < m.nodes.size(); ++i)
    CHECK(ut(i) == doctest::Approx(std::exp(-std::numbers::pi * std::numbers::pi * 0.1) * std::sin(std::numbers::pi * m.nodes(i))));
  HeatParams periodic;
  periodic.bc = HeatBoundary::periodic;
  CHECK_NOTHROW(build_heat_1d(periodic));
  HeatParams tiny;
  tiny.n = 3;
  CHECK_THROWS(build_heat_1d(tiny));
}

TEST_CASE("every built problem passes the structural checks") {
  const auto tr = build_transport_1d(TransportParams{});
  const auto co = build_coupled_system_1d(CoupledParams{});
  const auto ns = build_nse2d_stationary(NseParams{});
  for (const auto* p : {&tr.problem, &co.problem, &ns.problem}) {
    CHECK(p->defects().skew <= 1e-8);
    CHECK(p->defects().conservativity <= 1e-8);
  }
}

TEST_CASE("transport convexity condition names the failing node") {
  TransportParams p;
  p.a = [](double x) { return x; };
  p.a_prime = [](double) { return 1.0; };
  p.a0 = [](double) { return 0.0; };
  try {
    build_transport_1d(p);
    FAIL("expected a convexity error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("node 1") != std::string::npos);
  }
}

TEST_CASE("transport variants") {
  TransportParams p;
  p.m = 2;
  auto m = build_transport_1d(p);
  const auto o = m.oracle();
  CHECK(o.converged);
  p.a = [](double) { return 0.0; };
  p.convection = false;
  CHECK(build_transport_1d(p).problem.defects().skew == 0.0);
}

TEST_CASE("coupled model conservativity is exact nodewise") {
  const auto co = build_coupled_system_1d(CoupledParams{});
  for (const auto& x : random_elements(co.problem.space()->dim(), 10, 401, 2.0))
    CHECK(std::abs(co.problem.space()->inner(co.problem.lambda().apply(x), x)) <= 1e-13 * (1 + x.squaredNorm()));
  CoupledParams bad;
  bad.c = 2.0;
  CHECK_THROWS(build_coupled_system_1d(bad));
  CoupledParams zero;
  zero.f = [](double) { return 0.0; };
  zero.g = [](double) { return 0.0; };
  const auto z = build_coupled_system_1d(zero);
  CHECK(certificate(z.problem, Element(Vector::Zero(z.problem.space()->dim()))) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("spectral basis: orthonormality, projection and divergence") {
  const NseBasis b(16);
  const auto xs = random_elements(b.dim(), 3, 411);
  for (const auto& c : xs) {
    const auto u = b.velocity(c);
    CHECK((b.project(u) - c).norm() <= 1e-12 * (1 + c.norm()));
    const double energy = (u.u1.squaredNorm() + u.u2.squaredNorm()) * std::pow(2 * std::numbers::pi / 16, 2);
    CHECK(energy == doctest::Approx(c.squaredNorm()).epsilon(1e-12));
    CHECK(b.divergence_defect(Vector(b.convection(c))) <= 1e-12);
    CHECK(std::abs(c.dot(b.convection(c))) <= 1e-12 * (1 + c.squaredNorm() * c.norm()));
  }
  CHECK(b.convection(b.taylor_green()).norm() <= 1e-12);
  CHECK_THROWS(NseBasis(7));
}

TEST_CASE("stationary Navier-Stokes: zero forcing and non-mean-zero forcing") {
  NseParams p;
  p.forcing = FieldChoice::parse("zero");
  auto m = build_nse2d_stationary(p);
  CHECK(certificate(m.problem, Element(Vector::Zero(m.problem.space()->dim()))) == doctest::Approx(0.0).scale(1.0));
  const NseBasis b(32);
  auto f = b.velocity(b.taylor_green());
  f.u1.array() += 1.0;
  CHECK_THROWS(build_nse2d_stationary(NseParams{}, f));
}

TEST_CASE("field choices parse") {
  CHECK(FieldChoice::parse("random_seeded(7)").seed == 7);
  CHECK(FieldChoice::parse("taylor_green").name == "taylor_green");
  CHECK_THROWS(FieldChoice::parse("random_seeded(x)"));
  CHECK_THROWS(FieldChoice::parse("vortex"));
}

TEST_CASE("Navier-Stokes evolution oracle for decaying Taylor-Green") {
  NseEvolutionParams p;
  p.stationary.grid = 16;
  p.stationary.forcing = FieldChoice::parse("zero");
  auto m = build_nse2d_evolution(p);
  REQUIRE(m.exact);
  CHECK(m.exact(0.0) == m.problem.v0());
  p.initial = FieldChoice::parse("zero");
  auto z = build_nse2d_evolution(p);
  CHECK(!z.exact);
}

TEST_CASE("sign convention self-test") { CHECK_NOTHROW(linear_sign_self_test()); }
