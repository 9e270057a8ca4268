#include "asdvar/lagrangian.hpp"

#include <doctest.h>

#include <cmath>

using namespace asdvar;

namespace {
Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }
Vector v1(double a) { return Vector::Constant(1, a); }
}  // namespace

TEST_CASE("basic Lagrangian values") {
  auto sp = make_space(2);
  const auto L = Lagrangian::basic(ConvexFunction::half_norm_squared(sp));
  CHECK(L(v2(1, 0), v2(0, 1)) == doctest::Approx(1.0));
  CHECK(L(v2(1, 0), v2(-1, 0)) == doctest::Approx(1.0));
  CHECK(L(v2(1, 0), v2(-1, 0)) + sp->inner(v2(1, 0), v2(-1, 0)) == doctest::Approx(0.0));
  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;
  CHECK(Lagrangian::shift(L, LinearMap::dense(sp, rot))(v2(1, 0), v2(0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("shift by zero is neutral") {
  auto sp = make_space(2);
  const auto L = Lagrangian::basic(ConvexFunction::separable_power(sp, 3.0, Vector::Ones(2)));
  const auto S = Lagrangian::shift(L, LinearMap::zero(sp));
  for (const auto& [x, p] : random_pairs(2, 10, 3)) CHECK(S(x, p) == doctest::Approx(L(x, p)));
}

TEST_CASE("Hamiltonians") {
  auto sp = make_space(2);
  const auto norm2 = ConvexFunction::quadratic(sp, Matrix(2.0 * Matrix::Identity(2, 2)), Element(Vector::Zero(2)));
  CHECK(hamiltonian_eval(Lagrangian::basic(norm2), v2(1, 0), v2(0, 2)) == doctest::Approx(3.0));
  auto s1 = make_space(1);
  const auto half = Lagrangian::basic(ConvexFunction::half_norm_squared(s1));
  const auto sum = Lagrangian::oplus(half, half);
  for (double x : {-1.0, 0.3, 2.0})
    for (double y : {-0.5, 1.0}) {
      const double expected = 2.0 * (0.5 * y * y - 0.5 * x * x);
      CHECK(sum.hamiltonian(v1(x), v1(y), HamiltonianMethod::numeric).value == doctest::Approx(expected).epsilon(1e-8));
      CHECK(sum.hamiltonian(v1(x), v1(y)).value == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("shift rule for Hamiltonians") {
  Matrix g(2, 2);
  g << 1.5, 0.3, 0.3, 1;
  auto sp = make_space(g);
  Matrix s(2, 2);
  s << 0, 0.8, -0.8, 0;
  const LinearMap b = LinearMap::dense(sp, Matrix(g.ldlt().solve(s)));
  const auto L = Lagrangian::basic(ConvexFunction::quadratic_form(sp, Matrix(v2(2, 1).asDiagonal()), v2(0.1, 0.2)));
  const auto LB = Lagrangian::shift(L, b);
  for (const auto& [x, y] : random_pairs(2, 10, 7)) {
    const double closed = L.hamiltonian(x, y).value - sp->inner(b.apply(x), y);
    CHECK(LB.hamiltonian(x, y, HamiltonianMethod::numeric).value == doctest::Approx(closed).epsilon(1e-8));
  }
}

TEST_CASE("anti-self-duality of permanence operations") {
  auto s1 = make_space(1);
  const auto half = Lagrangian::basic(ConvexFunction::half_norm_squared(s1));
  const auto t = Lagrangian::basic(ConvexFunction::quadratic_form(s1, Matrix::Constant(1, 1, 3.0)));
  AsdDefectOptions opts;
  opts.grid_n = 200;
  const auto samples = random_pairs(1, 3, 11, 0.7);
  CHECK(asd_defect(half, samples, opts).defect <= 1e-6);
  CHECK(asd_defect(Lagrangian::star(half, t), samples, opts).defect <= 1e-5);
  auto s2 = make_space(2);
  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;
  const auto shifted = Lagrangian::shift(Lagrangian::basic(ConvexFunction::half_norm_squared(s2)), LinearMap::dense(s2, rot));
  CHECK(asd_defect(shifted, random_pairs(2, 2, 12, 0.5), opts).defect <= 1e-5);
}

TEST_CASE("asd defect detects a non-self-dual Lagrangian") {
  auto s1 = make_space(1);
  const auto phi = ConvexFunction::half_norm_squared(s1);
  const auto bad = Lagrangian::custom(s1, [phi](const Element& x, const Element& p) {
    LagrangianValue v;
    v.value = phi(x) + 0.25 * p.squaredNorm();
    v.grad_x = x;
    v.grad_p = 0.5 * p;
    return v;
  });
  AsdDefectOptions opts;
  opts.grid_n = 200;
  CHECK(asd_defect(bad, random_pairs(1, 3, 13, 0.7), opts).defect >= 1e-2);
}

TEST_CASE("lambda regularization resolvent") {
  auto s1 = make_space(1);
  const auto L = Lagrangian::basic(ConvexFunction::half_norm_squared(s1));
  const auto reg = Lagrangian::lambda_regularize(L, 1.0, 1.0);
  CHECK(reg.prox_point(v1(2.0), v1(0.0))(0) == doctest::Approx(1.0));
  CHECK(reg.prox_point(v1(2.0), v1(5.0))(0) == doctest::Approx(1.0));
  const double d = (reg(v1(2.0 + 1e-6), v1(0.0)) - reg(v1(2.0 - 1e-6), v1(0.0))) / 2e-6;
  CHECK(d == doctest::Approx(1.0).epsilon(1e-6));
  for (const auto& [a, b] : random_pairs(1, 20, 17, 3.0)) {
    const double q = std::abs(reg.prox_point(a, v1(0.3))(0) - reg.prox_point(b, v1(0.3))(0)) / std::abs(a(0) - b(0));
    CHECK(q <= 1.0 + 1e-8);
  }
}

TEST_CASE("regularized Lagrangian converges as lambda shrinks") {
  auto sp = make_space(2);
  const auto L = Lagrangian::basic(ConvexFunction::separable_power(sp, 3.0, Vector::Ones(2)));
  const Element x = v2(0.5, -0.4), p = v2(0.2, 0.1);
  const auto psi = ConvexFunction::separable_power(sp, 3.0, Vector::Ones(2));
  double prev_err = INFINITY, prev_env = -INFINITY;
  for (double lam : {0.1, 0.01, 0.001}) {
    const double err = std::abs(Lagrangian::lambda_regularize(L, lam, lam)(x, p) - L(x, p));
    CHECK(err < prev_err);
    prev_err = err;
    const double env = ConvexFunction::moreau_envelope(psi, lam)(x);
    CHECK(env >= prev_env);
    prev_env = env;
  }
  CHECK(prev_err <= 1e-4);
}

TEST_CASE("boundary Lagrangian") {
  auto sp = make_space(2);
  const auto zero = BoundaryLagrangian::initial_value(sp, Element(Vector::Zero(2)));
  CHECK(zero.eval(v2(1, 2), v2(3, 0)) == doctest::Approx(0.5 * 5 + 0.5 * 9));
  CHECK(selfdual_boundary_defect(zero, random_pairs(2, 10, 19)) <= 1e-14);
  const auto ell = BoundaryLagrangian::initial_value(sp, v2(1, 0));
  CHECK(selfdual_boundary_defect(ell, random_pairs(2, 10, 20)) <= 1e-10);
  for (const auto& [r, s] : random_pairs(2, 100, 21, 3.0)) {
    CHECK(ell.excess(r, s) >= -1e-12);
    CHECK(ell.excess(r, s) == doctest::Approx((r - v2(1, 0)).squaredNorm()).epsilon(1e-12));
  }
  const auto probe = BoundaryLagrangian::custom(ConvexFunction::quadratic_form(sp, Matrix(2.0 * Matrix::Identity(2, 2))),
                                                ConvexFunction::half_norm_squared(sp));
  CHECK(selfdual_boundary_defect(probe, random_pairs(2, 10, 22)) > 1e-3);
}

TEST_CASE("boundary augmentation reduces to the shift without boundary terms") {
  auto sp = make_space(2);
  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;
  const LinearMap b = LinearMap::dense(sp, rot);
  const auto L = Lagrangian::basic(ConvexFunction::half_norm_squared(sp));
  const auto trace = make_space(1);
  const auto zero_ell = BoundaryLagrangian::custom(ConvexFunction::zero(trace), ConvexFunction::zero(trace));
  const auto aug = Lagrangian::augment_boundary(L, b, BoundaryPair::none(sp), zero_ell);
  const auto sh = Lagrangian::shift(L, b);
  for (const auto& [x, p] : random_pairs(2, 10, 23)) CHECK(aug(x, p) == doctest::Approx(sh(x, p)));
  CHECK_THROWS(Lagrangian::augment_boundary(L, LinearMap::identity(sp), BoundaryPair::none(sp), zero_ell));
}
