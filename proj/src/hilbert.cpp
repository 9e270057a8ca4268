#include "asdvar/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace asdvar {

namespace {

std::string dim_message(const char* what, long got, long want) {
  std::ostringstream os;
  os << what << ": dimension " << got << " does not match space dimension " << want;
  return os.str();
}

}  // namespace

Space::Space(int dim) : dim_(dim), gram_(Matrix::Identity(dim, dim)), identity_(true), diagonal_(true) {
  if (dim <= 0) throw std::invalid_argument("Space: dimension must be positive");
  chol_.compute(gram_);
}

Space::Space(Matrix gram) : dim_(static_cast<int>(gram.rows())), gram_(std::move(gram)) {
  if (dim_ <= 0 || gram_.cols() != gram_.rows())
    throw std::invalid_argument("Space: gram must be a nonempty square matrix");
  const double scale = std::max(1.0, gram_.cwiseAbs().maxCoeff());
  if ((gram_ - gram_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("Space: gram matrix is not symmetric");
  chol_.compute(gram_);
  if (chol_.info() != Eigen::Success)
    throw std::invalid_argument("Space: gram matrix is not positive definite");
  const Matrix off = gram_ - Matrix(gram_.diagonal().asDiagonal());
  diagonal_ = off.cwiseAbs().maxCoeff() == 0.0;
  identity_ = diagonal_ && (gram_.diagonal().array() == 1.0).all();
}

double Space::inner(const Element& x, const Element& y) const {
  check(x, "inner(x)");
  check(y, "inner(y)");
  if (identity_) return x.dot(y);
  if (diagonal_) return (x.array() * gram_.diagonal().array() * y.array()).sum();
  return x.dot(gram_ * y);
}

double Space::norm(const Element& x) const { return std::sqrt(std::max(0.0, norm_squared(x))); }

Vector Space::lower(const Element& x) const {
  check(x, "lower");
  if (identity_) return x;
  if (diagonal_) return gram_.diagonal().cwiseProduct(x);
  return gram_ * x;
}

Element Space::raise(const Vector& g) const {
  check(g, "raise");
  if (identity_) return g;
  if (diagonal_) return g.cwiseQuotient(gram_.diagonal());
  return chol_.solve(g);
}

Matrix Space::raise(const Matrix& m) const {
  if (m.rows() != dim_) throw DimensionError(dim_message("raise", m.rows(), dim_));
  if (identity_) return m;
  if (diagonal_) return gram_.diagonal().cwiseInverse().asDiagonal() * m;
  return chol_.solve(m);
}

void Space::check(const Element& x, const char* what) const {
  if (x.size() != dim_) throw DimensionError(dim_message(what, x.size(), dim_));
}

SpacePtr make_space(int dim) { return std::make_shared<const Space>(dim); }
SpacePtr make_space(Matrix gram) { return std::make_shared<const Space>(std::move(gram)); }

SpacePtr product_space(const SpacePtr& a, const SpacePtr& b) {
  const int n = a->dim() + b->dim();
  Matrix g = Matrix::Zero(n, n);
  g.topLeftCorner(a->dim(), a->dim()) = a->gram();
  g.bottomRightCorner(b->dim(), b->dim()) = b->gram();
  return make_space(std::move(g));
}

LinearMap::LinearMap(SpacePtr domain, SpacePtr codomain, Apply apply, Apply adjoint)
    : domain_(std::move(domain)),
      codomain_(std::move(codomain)),
      apply_(std::move(apply)),
      adjoint_(std::move(adjoint)) {}

LinearMap LinearMap::dense(SpacePtr domain, SpacePtr codomain, Matrix m) {
  if (m.rows() != codomain->dim() || m.cols() != domain->dim())
    throw DimensionError("LinearMap::dense: matrix shape does not match spaces");
  // A* = G_dom^{-1} A^T G_cod
  Matrix adj = domain->raise(Matrix(m.transpose() * codomain->gram()));
  auto fwd = std::make_shared<const Matrix>(m);
  auto bwd = std::make_shared<const Matrix>(std::move(adj));
  LinearMap out(
      domain, codomain, [fwd](const Element& x) -> Element { return *fwd * x; },
      [bwd](const Element& y) -> Element { return *bwd * y; });
  out.matrix_ = std::move(m);
  return out;
}

LinearMap LinearMap::dense(const SpacePtr& space, Matrix m) { return dense(space, space, std::move(m)); }

LinearMap LinearMap::zero(SpacePtr domain, SpacePtr codomain) {
  const int n = domain->dim();
  const int m = codomain->dim();
  LinearMap out(
      domain, codomain, [m](const Element&) -> Element { return Vector::Zero(m); },
      [n](const Element&) -> Element { return Vector::Zero(n); });
  out.matrix_ = Matrix::Zero(m, n);
  return out;
}

LinearMap LinearMap::zero(const SpacePtr& space) { return zero(space, space); }

LinearMap LinearMap::identity(const SpacePtr& space) {
  LinearMap out(
      space, space, [](const Element& x) -> Element { return x; },
      [](const Element& y) -> Element { return y; });
  out.matrix_ = Matrix::Identity(space->dim(), space->dim());
  return out;
}

Element LinearMap::apply(const Element& x) const {
  domain_->check(x, "LinearMap::apply");
  return apply_(x);
}

Element LinearMap::adjoint_apply(const Element& y) const {
  codomain_->check(y, "LinearMap::adjoint_apply");
  return adjoint_(y);
}

Matrix LinearMap::to_dense() const {
  if (matrix_) return *matrix_;
  const int n = domain_->dim();
  Matrix m(codomain_->dim(), n);
  Vector e = Vector::Zero(n);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    m.col(j) = apply_(e);
    e[j] = 0.0;
  }
  return m;
}

LinearMap LinearMap::adjoint() const {
  LinearMap out(codomain_, domain_, adjoint_, apply_);
  if (matrix_) out.matrix_ = domain_->raise(Matrix(matrix_->transpose() * codomain_->gram()));
  return out;
}

LinearMap LinearMap::scaled(double s) const {
  auto f = apply_;
  auto g = adjoint_;
  LinearMap out(
      domain_, codomain_, [f, s](const Element& x) -> Element { return s * f(x); },
      [g, s](const Element& y) -> Element { return s * g(y); });
  if (matrix_) out.matrix_ = s * *matrix_;
  return out;
}

LinearMap LinearMap::operator+(const LinearMap& other) const {
  if (domain_->dim() != other.domain_->dim() || codomain_->dim() != other.codomain_->dim())
    throw DimensionError("LinearMap::operator+: incompatible maps");
  auto f1 = apply_, f2 = other.apply_;
  auto g1 = adjoint_, g2 = other.adjoint_;
  LinearMap out(
      domain_, codomain_, [f1, f2](const Element& x) -> Element { return f1(x) + f2(x); },
      [g1, g2](const Element& y) -> Element { return g1(y) + g2(y); });
  if (matrix_ && other.matrix_) out.matrix_ = *matrix_ + *other.matrix_;
  return out;
}

LinearMap LinearMap::operator-(const LinearMap& other) const { return *this + other.scaled(-1.0); }

BoundaryPair::BoundaryPair(LinearMap first, LinearMap second) : b1(std::move(first)), b2(std::move(second)) {
  if (b1.domain()->dim() != b2.domain()->dim())
    throw DimensionError("BoundaryPair: b1 and b2 must share a domain");
}

BoundaryPair BoundaryPair::none(const SpacePtr& space) {
  auto h = make_space(1);
  return BoundaryPair(LinearMap::zero(space, h), LinearMap::zero(space, h));
}

OperatorSplit split_operator(const LinearMap& a) {
  if (a.domain()->dim() != a.codomain()->dim())
    throw DimensionError("split_operator: map must be an endomorphism");
  const LinearMap adj = a.adjoint();
  return {(a - adj).scaled(0.5), (a + adj).scaled(0.5)};
}

ConservativeMap::ConservativeMap(SpacePtr space, Apply apply, std::optional<Vjp> vjp)
    : space_(std::move(space)), apply_(std::move(apply)), vjp_(std::move(vjp)) {}

ConservativeMap ConservativeMap::zero(const SpacePtr& space) {
  const int n = space->dim();
  ConservativeMap out(
      space, [n](const Element&) -> Element { return Vector::Zero(n); },
      Vjp([n](const Element&, const Element&) -> Element { return Vector::Zero(n); }));
  out.zero_ = true;
  return out;
}

ConservativeMap ConservativeMap::linear(const LinearMap& k) {
  return ConservativeMap(
      k.domain(), [k](const Element& x) { return k.apply(x); },
      Vjp([k](const Element&, const Element& w) { return k.adjoint_apply(w); }));
}

Element ConservativeMap::apply(const Element& x) const {
  space_->check(x, "ConservativeMap::apply");
  return apply_(x);
}

Element ConservativeMap::vjp(const Element& x, const Element& w) const {
  space_->check(x, "vjp(x)");
  space_->check(w, "vjp(w)");
  if (vjp_) return (*vjp_)(x, w);
  return vjp_fd(*this, x, w, default_vjp_step(*space_, x));
}

double default_vjp_step(const Space& space, const Element& x) {
  return 1e-5 * (1.0 + x.cwiseAbs().maxCoeff() + 0.0 * space.dim());
}

Element vjp_fd(const ConservativeMap& lambda, const Element& x, const Element& w, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("vjp_fd: step must be positive");
  const Space& sp = *lambda.space();
  sp.check(x, "vjp_fd(x)");
  sp.check(w, "vjp_fd(w)");
  const Vector gw = sp.lower(w);
  const int n = sp.dim();
  Vector grad(n);
  Element xp = x;
  auto g = [&](double t, int i) {
    xp[i] = x[i] + t;
    const double v = gw.dot(lambda.apply(xp));
    xp[i] = x[i];
    return v;
  };
  for (int i = 0; i < n; ++i) {
    grad[i] = (-g(2 * h, i) + 8 * g(h, i) - 8 * g(-h, i) + g(-2 * h, i)) / (12 * h);
  }
  return sp.raise(grad);
}

double inner(const Space& space, const Element& x, const Element& y) { return space.inner(x, y); }

double skew_defect(const Space& space, const LinearMap& b, std::span<const ElementPair> samples) {
  double worst = 0.0;
  for (const auto& [x, y] : samples) {
    const double v = space.inner(y, b.apply(x)) + space.inner(b.apply(y), x);
    worst = std::max(worst, std::abs(v) / (1.0 + space.norm(x) * space.norm(y)));
  }
  return worst;
}

double boundary_skew_defect(const Space& space, const LinearMap& b, const BoundaryPair& bp,
                            std::span<const Element> samples) {
  double worst = 0.0;
  for (const auto& x : samples) {
    const double lhs = space.inner(x, b.apply(x));
    const double rhs =
        0.5 * (bp.b2.codomain()->norm_squared(bp.b2.apply(x)) - bp.b1.codomain()->norm_squared(bp.b1.apply(x)));
    worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + space.norm_squared(x)));
  }
  return worst;
}

double conservativity_defect(const Space& space, const ConservativeMap& lambda,
                             std::span<const Element> samples) {
  double worst = 0.0;
  for (const auto& x : samples) {
    worst = std::max(worst, std::abs(space.inner(lambda.apply(x), x)) / (1.0 + space.norm_squared(x)));
  }
  return worst;
}

double adjoint_defect(const LinearMap& a, std::span<const ElementPair> samples) {
  const Space& dom = *a.domain();
  const Space& cod = *a.codomain();
  double worst = 0.0;
  for (const auto& [x, y] : samples) {
    const double d = cod.inner(y, a.apply(x)) - dom.inner(a.adjoint_apply(y), x);
    worst = std::max(worst, std::abs(d) / (1.0 + dom.norm(x) * cod.norm(y)));
  }
  return worst;
}

std::vector<Element> random_elements(int dim, int count, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<Element> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    Element x(dim);
    for (int i = 0; i < dim; ++i) x[i] = normal(rng);
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<ElementPair> random_pairs(int dim, int count, std::uint64_t seed, double scale) {
  auto xs = random_elements(dim, 2 * count, seed, scale);
  std::vector<ElementPair> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) out.emplace_back(std::move(xs[2 * k]), std::move(xs[2 * k + 1]));
  return out;
}

Matrix read_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size())
        throw std::invalid_argument("read_matrix: line " + std::to_string(lineno) + ": bad number '" + tok + "'");
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument("read_matrix: line " + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("read_matrix: no rows");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("read_matrix_file: cannot open " + path);
  return read_matrix(in);
}

void write_matrix(std::ostream& out, const Matrix& m) {
  const auto old = out.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << '\n';
  }
  out.precision(old);
}

}  // namespace asdvar
