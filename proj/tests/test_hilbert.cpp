#include "asdvar/hilbert.hpp"

#include <doctest.h>

#include <sstream>

using namespace asdvar;

namespace {
Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }
}  // namespace

TEST_CASE("inner products in a weighted pairing") {
  auto id = make_space(2);
  CHECK(inner(*id, v2(1, 0), v2(0, 1)) == 0.0);
  CHECK(inner(*id, v2(3, 4), v2(3, 4)) == 25.0);
  auto w = make_space(Matrix(v2(2, 1).asDiagonal()));
  CHECK(inner(*w, v2(1, 1), v2(1, 1)) == 3.0);
  CHECK_THROWS_AS(id->inner(v2(1, 0), Vector::Zero(3)), DimensionError);
}

TEST_CASE("inner is symmetric and bilinear") {
  Matrix g(3, 3);
  g << 2, 0.5, 0, 0.5, 1, 0.1, 0, 0.1, 3;
  auto sp = make_space(g);
  const auto xs = random_elements(3, 30, 21);
  for (std::size_t i = 0; i + 2 < xs.size(); i += 3) {
    const auto &x = xs[i], &y = xs[i + 1], &z = xs[i + 2];
    CHECK(sp->inner(x, y) == doctest::Approx(sp->inner(y, x)).epsilon(1e-14));
    CHECK(sp->inner(Element(2.0 * x + z), y) ==
          doctest::Approx(2.0 * sp->inner(x, y) + sp->inner(z, y)).epsilon(1e-13));
  }
}

TEST_CASE("non-symmetric or indefinite Gram matrices are refused") {
  Matrix g(2, 2);
  g << 1, 2, 0, 1;
  CHECK_THROWS(make_space(g));
  CHECK_THROWS(make_space(Matrix(v2(1, -1).asDiagonal())));
}

TEST_CASE("skew defect") {
  auto sp = make_space(2);
  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;
  const auto pairs = random_pairs(2, 20, 3);
  CHECK(skew_defect(*sp, LinearMap::dense(sp, rot), pairs) <= 1e-15);
  const std::vector<ElementPair> one{{v2(1, 0), v2(1, 0)}};
  CHECK(skew_defect(*sp, LinearMap::identity(sp), one) == doctest::Approx(1.0));
}

TEST_CASE("boundary skew defect") {
  auto sp = make_space(3);
  Matrix rot = Matrix::Zero(3, 3);
  rot(0, 1) = 1;
  rot(1, 0) = -1;
  const auto xs = random_elements(3, 10, 5);
  CHECK(boundary_skew_defect(*sp, LinearMap::dense(sp, rot), BoundaryPair::none(sp), xs) <= 1e-15);
  const std::vector<Element> e1{(Vector(3) << 1, 0, 0).finished()};
  CHECK(boundary_skew_defect(*sp, LinearMap::identity(sp), BoundaryPair::none(sp), e1) == doctest::Approx(0.5));
}

TEST_CASE("conservativity defect and vjp") {
  auto sp = make_space(2);
  ConservativeMap lam(sp, [](const Element& x) { return Element(v2(-x(0) * x(1) * x(1), x(0) * x(0) * x(1))); });
  CHECK(conservativity_defect(*sp, lam, random_elements(2, 50, 9, 3.0)) <= 1e-14);
  CHECK(conservativity_defect(*sp, ConservativeMap::zero(sp), random_elements(2, 5, 9)) == 0.0);
  const Element g = vjp_fd(lam, v2(1, 1), v2(1, 0), 1e-6);
  CHECK(g(0) == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(g(1) == doctest::Approx(-2.0).epsilon(1e-8));
  CHECK_THROWS(vjp_fd(lam, v2(1, 1), v2(1, 0), 0.0));
  CHECK(vjp_fd(ConservativeMap::zero(sp), v2(1, 2), v2(3, 4), 1e-6).norm() == 0.0);
}

TEST_CASE("vjp of a linear skew map is the Gram adjoint") {
  Matrix g(2, 2);
  g << 2, 0.3, 0.3, 1;
  auto sp = make_space(g);
  Matrix s(2, 2);
  s << 0, 1.5, -1.5, 0;
  const LinearMap k = LinearMap::dense(sp, Matrix(g.ldlt().solve(s)));
  const auto lam = ConservativeMap::linear(k);
  const Element w = v2(0.4, -0.7);
  const Element fd = vjp_fd(lam, v2(0.3, 0.2), w, 1e-6);
  CHECK((fd - k.adjoint_apply(w)).norm() <= 1e-8);
}

TEST_CASE("adjoint in weighted pairings") {
  Matrix gd(2, 2), gc(3, 3), a(3, 2);
  gd << 1, 0.2, 0.2, 2;
  gc = Matrix::Identity(3, 3) * 1.5;
  a << 1, 2, 3, 4, 5, 6;
  const auto m = LinearMap::dense(make_space(gd), make_space(gc), a);
  std::vector<ElementPair> pairs;
  const auto xs = random_elements(2, 10, 1), ys = random_elements(3, 10, 2);
  for (int i = 0; i < 10; ++i) pairs.emplace_back(xs[i], ys[i]);
  CHECK(adjoint_defect(m, pairs) <= 1e-13);
}

TEST_CASE("operator split into skew and symmetric parts") {
  auto sp = make_space(2);
  Matrix a(2, 2);
  a << 1, 2, 0, 3;
  const auto s = split_operator(LinearMap::dense(sp, a));
  CHECK(skew_defect(*sp, s.antisymmetric, random_pairs(2, 10, 4)) <= 1e-14);
  CHECK((s.antisymmetric.to_dense() + s.symmetric.to_dense() - a).norm() <= 1e-14);
}

TEST_CASE("seeded samples are reproducible") {
  const auto a = random_elements(4, 3, 77), b = random_elements(4, 3, 77), c = random_elements(4, 3, 78);
  CHECK(a[2] == b[2]);
  CHECK(a[0] != c[0]);
}

TEST_CASE("matrix text round trip") {
  Matrix m(2, 3);
  m << 1.0 / 3.0, -2, 1e-300, 4, 5.5, -6e10;
  std::stringstream ss;
  write_matrix(ss, m);
  CHECK(read_matrix(ss) == m);
}
