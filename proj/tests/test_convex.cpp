#include "asdvar/convex.hpp"

#include <doctest.h>

#include <cmath>

using namespace asdvar;

namespace {
Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }
Vector v1(double a) { return Vector::Constant(1, a); }
}  // namespace

TEST_CASE("evaluation of basic kinds") {
  auto sp = make_space(2);
  const auto q = ConvexFunction::half_norm_squared(sp);
  const auto p = ConvexFunction::separable_power(sp, 4.0, Vector::Ones(2));
  CHECK(q(v2(3, 4)) == doctest::Approx(12.5));
  CHECK(p(v2(1, 1)) == doctest::Approx(0.5));
  CHECK(ConvexFunction::sum({q, p})(v2(1, 0)) == doctest::Approx(0.75));
}

TEST_CASE("conjugates in closed form") {
  auto sp2 = make_space(2), sp1 = make_space(1);
  CHECK(ConvexFunction::half_norm_squared(sp2).conjugate(v2(1, 2)) == doctest::Approx(2.5));
  CHECK(ConvexFunction::separable_power(sp1, 4.0, Vector::Ones(1)).conjugate(v1(1.0)) == doctest::Approx(0.75));
  const auto q = ConvexFunction::quadratic(sp2, Matrix(2.0 * Matrix::Identity(2, 2)), Element(Vector::Zero(2)));
  CHECK(q.conjugate(v2(2, 0)) == doctest::Approx(1.0));
}

TEST_CASE("power conjugate against a brute-force sup") {
  auto sp1 = make_space(1);
  const auto p = ConvexFunction::separable_power(sp1, 4.0, Vector::Ones(1));
  double best = -INFINITY;
  for (double x = -3.0; x <= 3.0; x += 1e-4) best = std::max(best, x - std::pow(x, 4) / 4.0);
  CHECK(p.conjugate(v1(1.0)) == doctest::Approx(best).epsilon(1e-7));
}

TEST_CASE("prox") {
  auto sp2 = make_space(2), sp1 = make_space(1);
  const Element z = ConvexFunction::half_norm_squared(sp2).prox(1.0, v2(2, 0));
  CHECK(z(0) == doctest::Approx(1.0));
  CHECK(z(1) == doctest::Approx(0.0));
  CHECK(ConvexFunction::zero(sp2).prox(1.0, v2(2, -1)) == v2(2, -1));
  const Element r = ConvexFunction::separable_power(sp1, 4.0, Vector::Ones(1)).prox(1.0, v1(2.0));
  CHECK(r(0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("gradients in the Gram pairing") {
  auto sp2 = make_space(2), sp1 = make_space(1);
  const Element g = ConvexFunction::half_norm_squared(sp2).gradient(v2(1, 2));
  CHECK((g - v2(1, 2)).norm() <= 1e-15);
  CHECK(ConvexFunction::separable_power(sp1, 4.0, Vector::Ones(1)).gradient(v1(2.0))(0) == doctest::Approx(8.0));
  auto w = make_space(Matrix(v2(3, 0.5).asDiagonal()));
  const Element gw = ConvexFunction::half_norm_squared(w).gradient(v2(1, 1));
  CHECK((gw - v2(1, 1)).norm() <= 1e-14);
}

TEST_CASE("gradient agrees with finite differences of eval") {
  Matrix g(2, 2);
  g << 2, 0.4, 0.4, 1;
  auto sp = make_space(g);
  const auto phi = ConvexFunction::sum({ConvexFunction::power_norm(sp, 3.0, 0.7),
                                        ConvexFunction::quadratic_form(sp, Matrix(v2(1, 2).asDiagonal()), v2(0.1, -0.2))});
  for (const auto& x : random_elements(2, 5, 31)) {
    const Vector lowered = sp->lower(phi.gradient(x));
    for (int i = 0; i < 2; ++i) {
      Element xp = x, xm = x;
      xp(i) += 1e-6;
      xm(i) -= 1e-6;
      CHECK(lowered(i) == doctest::Approx((phi(xp) - phi(xm)) / 2e-6).epsilon(1e-6));
    }
  }
}

TEST_CASE("Fenchel-Young inequality and equality") {
  Matrix g(3, 3);
  g << 1.5, 0.2, 0, 0.2, 1, 0.3, 0, 0.3, 2;
  auto sp = make_space(g);
  const auto phi = ConvexFunction::sum({ConvexFunction::half_norm_squared(sp),
                                        ConvexFunction::separable_power(sp, 4.0, Vector::Constant(3, 0.5))});
  const auto xs = random_elements(3, 20, 41), ps = random_elements(3, 20, 42);
  for (int i = 0; i < 20; ++i) {
    CHECK(phi(xs[i]) + phi.conjugate(ps[i]) - sp->inner(xs[i], ps[i]) >= -1e-9);
    const Element p = phi.gradient(xs[i]);
    CHECK(phi(xs[i]) + phi.conjugate(p) - sp->inner(xs[i], p) == doctest::Approx(0.0).epsilon(1e-8).scale(1.0));
  }
}

TEST_CASE("prox characterization x - z in lambda subdifferential") {
  auto sp = make_space(2);
  const auto phi = ConvexFunction::separable_power(sp, 3.0, Vector::Ones(2));
  for (const auto& x : random_elements(2, 10, 51, 2.0)) {
    const Element z = phi.prox(0.5, x);
    CHECK(((x - z) / 0.5 - phi.gradient(z)).norm() <= 1e-9);
  }
}

TEST_CASE("Moreau envelope lies below and converges as alpha shrinks") {
  auto sp = make_space(2);
  const auto phi = ConvexFunction::separable_power(sp, 4.0, Vector::Ones(2));
  const Element x = v2(0.8, -1.1);
  double prev = -INFINITY;
  for (double a : {1.0, 0.1, 0.01}) {
    const double e = ConvexFunction::moreau_envelope(phi, a)(x);
    CHECK(e <= phi(x) + 1e-12);
    CHECK(e >= prev - 1e-12);
    prev = e;
  }
  CHECK(prev == doctest::Approx(phi(x)).epsilon(0.05));
}

TEST_CASE("numeric kind matches closed form") {
  auto sp = make_space(1);
  const auto num = ConvexFunction::numeric(
      sp, [](const Element& x) { return std::pow(x(0), 4) / 4.0; }, std::nullopt, v1(-5), v1(5));
  CHECK(num.conjugate(v1(1.0)) == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("convexity sampler passes on convex kinds") {
  auto sp = make_space(3);
  CHECK(convexity_defect(ConvexFunction::power_norm(sp, 2.5), 50, 61) <= 1e-12);
}

TEST_CASE("invalid parameters are rejected") {
  auto sp = make_space(2);
  CHECK_THROWS(ConvexFunction::power_norm(sp, 1.0));
  CHECK_THROWS(ConvexFunction::half_norm_squared(sp).prox(-1.0, v2(0, 0)));
  CHECK_THROWS(ConvexFunction::separable_power(sp, 2.0, Vector::Constant(2, -1.0)));
}
