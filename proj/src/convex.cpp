#include "asdvar/convex.hpp"

#include "asdvar/optim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace asdvar {

namespace detail {

using Kind = ConvexFunction::Kind;

struct ConvexNode {
  explicit ConvexNode(SpacePtr s) : space(std::move(s)) {}
  virtual ~ConvexNode() = default;

  SpacePtr space;

  virtual Kind kind() const = 0;
  virtual std::string describe() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual double value_difference(const Vector& x, const Vector& y) const { return value(x) - value(y); }
  virtual bool smooth() const { return true; }
  /// Euclidean gradient.
  virtual Vector egrad(const Vector& x) const = 0;
  virtual std::optional<Matrix> ehess(const Vector&) const { return std::nullopt; }
  /// sup_x s^T x - phi(x) for a raw covector s.
  virtual ConjugateResult conj(const Vector& s, const Vector* warm) const;
  /// Proximal map in the Gram metric.
  virtual Vector prox(double lambda, const Vector& x) const;
  /// phi(x) + phi_E*(s) - s^T x.
  virtual double gap(const Vector& x, const Vector& s, Vector* argmax, const Vector* warm) const;
};

using NodePtr = std::shared_ptr<const ConvexNode>;

namespace {

void check_finite_lambda(double lambda) {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw std::invalid_argument("prox: lambda must be positive");
}

Vector newton_start(const Vector* warm, Eigen::Index n) {
  if (warm && warm->size() == n && warm->allFinite()) return *warm;
  return Vector::Zero(n);
}

}  // namespace

ConjugateResult ConvexNode::conj(const Vector& s, const Vector* warm) const {
  const Eigen::Index n = s.size();
  ConjugateResult out;
  out.exact = false;
  Vector x0 = newton_start(warm, n);
  if (ehess(x0)) {
    auto fn = [&](const Vector& x, Vector* g, Matrix* h) {
      if (g) *g = egrad(x) - s;
      if (h) *h = *ehess(x);
      return value(x) - s.dot(x);
    };
    NewtonOptions o;
    o.max_iter = 200;
    o.gtol = 1e-13;
    auto r = newton_minimize(fn, x0, o);
    out.argmax = r.x;
    out.value = -r.value;
    out.gap = 0.5 * r.grad_norm * r.grad_norm;
    out.converged = r.converged() && std::isfinite(r.value);
    if (!std::isfinite(r.value) || r.x.norm() > 1e12) {
      out.value = kInfinity;
      out.converged = false;
    }
    return out;
  }
  Objective fn = [&](const Vector& x, Vector* g) {
    if (g) *g = egrad(x) - s;
    return value(x) - s.dot(x);
  };
  MinimizeOptions o;
  o.max_iter = 2000;
  o.gtol = 1e-12 * (1.0 + s.norm());
  auto r = lbfgs_minimize(fn, x0, o);
  out.argmax = r.x;
  out.value = -r.value;
  out.gap = r.grad_norm * (1.0 + r.x.norm());
  out.converged = r.grad_norm <= 1e-8 * (1.0 + s.norm());
  if (r.x.norm() > 1e12 || !std::isfinite(r.value)) {
    out.value = kInfinity;
    out.converged = false;
  }
  return out;
}

Vector ConvexNode::prox(double lambda, const Vector& x) const {
  check_finite_lambda(lambda);
  const Matrix& g = space->gram();
  const Vector gx = space->lower(x);
  Vector z0 = x;
  if (ehess(z0)) {
    auto fn = [&](const Vector& z, Vector* grad, Matrix* h) {
      const Vector gz = space->lower(z);
      if (grad) *grad = egrad(z) + (gz - gx) / lambda;
      if (h) *h = *ehess(z) + g / lambda;
      return value(z) + (0.5 * z.dot(gz) - z.dot(gx)) / lambda;
    };
    NewtonOptions o;
    o.gtol = 1e-14;
    auto r = newton_minimize(fn, z0, o);
    if (!r.converged()) throw ProxFailure("prox: Newton inner solve did not converge", r.grad_norm);
    return r.x;
  }
  Objective fn = [&](const Vector& z, Vector* grad) {
    const Vector gz = space->lower(z);
    if (grad) *grad = egrad(z) + (gz - gx) / lambda;
    return value(z) + (0.5 * z.dot(gz) - z.dot(gx)) / lambda;
  };
  MinimizeOptions o;
  o.max_iter = 5000;
  o.gtol = 1e-13 * (1.0 + gx.norm() / lambda);
  auto r = lbfgs_minimize(fn, z0, o);
  if (r.grad_norm > 1e-8 * (1.0 + gx.norm() / lambda))
    throw ProxFailure("prox: quasi-Newton inner solve did not converge", r.grad_norm);
  return r.x;
}

double ConvexNode::gap(const Vector& x, const Vector& s, Vector* argmax, const Vector* warm) const {
  ConjugateResult c = conj(s, warm);
  if (argmax) *argmax = c.argmax;
  if (!std::isfinite(c.value)) return kInfinity;
  // phi(x) - phi(x*) - s^T (x - x*) with phi*(s) = s^T x* - phi(x*).
  return value_difference(x, c.argmax) - s.dot(x - c.argmax);
}

namespace {

// ---------------------------------------------------------------- zero
struct ZeroNode final : ConvexNode {
  using ConvexNode::ConvexNode;
  Kind kind() const override { return Kind::zero; }
  std::string describe() const override { return "zero"; }
  double value(const Vector&) const override { return 0.0; }
  double value_difference(const Vector&, const Vector&) const override { return 0.0; }
  Vector egrad(const Vector& x) const override { return Vector::Zero(x.size()); }
  std::optional<Matrix> ehess(const Vector& x) const override { return Matrix::Zero(x.size(), x.size()); }
  ConjugateResult conj(const Vector& s, const Vector*) const override {
    ConjugateResult c;
    c.argmax = Vector::Zero(s.size());
    c.value = s.isZero(0.0) ? 0.0 : kInfinity;
    return c;
  }
  Vector prox(double lambda, const Vector& x) const override {
    check_finite_lambda(lambda);
    return x;
  }
  double gap(const Vector& x, const Vector& s, Vector* argmax, const Vector*) const override {
    if (argmax) *argmax = Vector::Zero(x.size());
    return s.isZero(0.0) ? 0.0 : kInfinity;
  }
};

// ---------------------------------------------------------------- quadratic
struct QuadraticNode final : ConvexNode {
  Matrix e;
  Vector beta;
  double c;
  Eigen::LDLT<Matrix> ldlt;
  double escale;

  QuadraticNode(SpacePtr s, Matrix e_, Vector beta_, double c_)
      : ConvexNode(std::move(s)), e(std::move(e_)), beta(std::move(beta_)), c(c_) {
    e = 0.5 * (e + e.transpose()).eval();
    ldlt.compute(e);
    escale = std::max(1e-300, e.cwiseAbs().maxCoeff());
  }
  Kind kind() const override { return Kind::quadratic; }
  std::string describe() const override {
    std::ostringstream os;
    os << "quadratic(dim=" << e.rows() << ")";
    return os.str();
  }
  double value(const Vector& x) const override { return 0.5 * x.dot(e * x) + beta.dot(x) + c; }
  double value_difference(const Vector& x, const Vector& y) const override {
    const Vector d = x - y;
    return 0.5 * d.dot(e * (x + y)) + beta.dot(d);
  }
  Vector egrad(const Vector& x) const override { return e * x + beta; }
  std::optional<Matrix> ehess(const Vector&) const override { return e; }

  bool solve(const Vector& r, Vector& y) const {
    y = ldlt.solve(r);
    if (!y.allFinite()) {
      y = Vector::Zero(r.size());
      return r.isZero(0.0);
    }
    const double res = (e * y - r).norm();
    return res <= 1e-9 * (r.norm() + escale * y.norm()) + 1e-300;
  }

  ConjugateResult conj(const Vector& s, const Vector*) const override {
    ConjugateResult out;
    const Vector r = s - beta;
    Vector y;
    const bool ok = solve(r, y);
    out.argmax = y;
    out.value = ok ? 0.5 * r.dot(y) - c : kInfinity;
    return out;
  }
  Vector prox(double lambda, const Vector& x) const override {
    check_finite_lambda(lambda);
    const Matrix& g = space->gram();
    Matrix m = e + g / lambda;
    return m.ldlt().solve(space->lower(x) / lambda - beta);
  }
  double gap(const Vector& x, const Vector& s, Vector* argmax, const Vector*) const override {
    const Vector r = s - beta;
    Vector y;
    const bool ok = solve(r, y);
    if (argmax) *argmax = y;
    if (!ok) return kInfinity;
    const Vector d = x - y;
    return 0.5 * d.dot(e * d);
  }
};

// ---------------------------------------------------------------- power of the Gram norm
struct PowerNormNode final : ConvexNode {
  double m, w;
  PowerNormNode(SpacePtr s, double m_, double w_) : ConvexNode(std::move(s)), m(m_), w(w_) {}
  Kind kind() const override { return Kind::power_norm; }
  std::string describe() const override {
    std::ostringstream os;
    os << "power_norm(m=" << m << ", weight=" << w << ")";
    return os.str();
  }
  double value(const Vector& x) const override { return w * std::pow(space->norm(x), m) / m; }
  Vector egrad(const Vector& x) const override {
    const double r = space->norm(x);
    if (r == 0) return Vector::Zero(x.size());
    return w * std::pow(r, m - 2) * space->lower(x);
  }
  std::optional<Matrix> ehess(const Vector& x) const override {
    const double r = space->norm(x);
    const Matrix& g = space->gram();
    if (r == 0) {
      if (m == 2) return w * g;
      if (m > 2) return Matrix::Zero(x.size(), x.size());
      return std::nullopt;
    }
    const Vector gx = space->lower(x);
    return w * (std::pow(r, m - 2) * g + (m - 2) * std::pow(r, m - 4) * gx * gx.transpose());
  }
  ConjugateResult conj(const Vector& s, const Vector*) const override {
    ConjugateResult out;
    const Vector p = space->raise(s);
    const double r = std::sqrt(std::max(0.0, s.dot(p)));
    const double ms = m / (m - 1);
    out.value = std::pow(w, -1.0 / (m - 1)) * std::pow(r, ms) / ms;
    out.argmax = r == 0 ? Vector::Zero(s.size()) : Vector(std::pow(r / w, 1.0 / (m - 1)) / r * p);
    return out;
  }
  Vector prox(double lambda, const Vector& x) const override {
    check_finite_lambda(lambda);
    const double r = space->norm(x);
    if (r == 0) return x;
    const double k = lambda * w;
    auto fn = [&](double t) {
      return std::pair{t + k * std::pow(t, m - 1) - r, 1.0 + k * (m - 1) * std::pow(t, m - 2)};
    };
    const double t = find_root(fn, 0.0, r);
    return (t / r) * x;
  }
};

// ---------------------------------------------------------------- separable power
double power_difference(double a, double b, double m) {
  // (|a|^m - |b|^m) / m
  const double ab = std::abs(a), bb = std::abs(b);
  if (bb > 0 && ab > 0) {
    const double t = (ab - bb) / bb;
    if (std::abs(t) < 0.5) return std::pow(bb, m) * std::expm1(m * std::log1p(t)) / m;
  }
  return (std::pow(ab, m) - std::pow(bb, m)) / m;
}

struct SeparablePowerNode final : ConvexNode {
  double m;
  Vector w;
  SeparablePowerNode(SpacePtr s, double m_, Vector w_) : ConvexNode(std::move(s)), m(m_), w(std::move(w_)) {}
  Kind kind() const override { return Kind::separable_power; }
  std::string describe() const override {
    std::ostringstream os;
    os << "separable_power(m=" << m << ")";
    return os.str();
  }
  double value(const Vector& x) const override {
    double v = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (w[i] != 0) v += w[i] * std::pow(std::abs(x[i]), m);
    return v / m;
  }
  double value_difference(const Vector& x, const Vector& y) const override {
    double v = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (w[i] != 0) v += w[i] * power_difference(x[i], y[i], m);
    return v;
  }
  Vector egrad(const Vector& x) const override {
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
      g[i] = w[i] == 0 || x[i] == 0 ? 0.0 : w[i] * std::pow(std::abs(x[i]), m - 1) * (x[i] > 0 ? 1.0 : -1.0);
    return g;
  }
  std::optional<Matrix> ehess(const Vector& x) const override {
    if (m < 2) {
      for (Eigen::Index i = 0; i < x.size(); ++i)
        if (w[i] != 0 && x[i] == 0) return std::nullopt;
    }
    Vector d(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
      d[i] = w[i] == 0 ? 0.0 : (m == 2 ? w[i] : w[i] * (m - 1) * std::pow(std::abs(x[i]), m - 2));
    return Matrix(d.asDiagonal());
  }
  ConjugateResult conj(const Vector& s, const Vector*) const override {
    ConjugateResult out;
    out.argmax = Vector::Zero(s.size());
    const double ms = m / (m - 1);
    double v = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s[i] == 0) continue;
      if (w[i] == 0) {
        out.value = kInfinity;
        return out;
      }
      const double a = std::abs(s[i]);
      v += std::pow(w[i], -1.0 / (m - 1)) * std::pow(a, ms) / ms;
      out.argmax[i] = std::copysign(std::pow(a / w[i], 1.0 / (m - 1)), s[i]);
    }
    out.value = v;
    return out;
  }
  Vector prox(double lambda, const Vector& x) const override {
    check_finite_lambda(lambda);
    if (!space->is_diagonal()) return ConvexNode::prox(lambda, x);
    const Vector gd = space->gram().diagonal();
    Vector z(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double r = std::abs(x[i]);
      const double k = lambda * w[i] / gd[i];
      if (r == 0 || k == 0) {
        z[i] = x[i];
        continue;
      }
      auto fn = [&](double t) {
        return std::pair{t + k * std::pow(t, m - 1) - r, 1.0 + k * (m - 1) * std::pow(t, m - 2)};
      };
      z[i] = std::copysign(find_root(fn, 0.0, r), x[i]);
    }
    return z;
  }
};

// ---------------------------------------------------------------- sum
struct SumNode final : ConvexNode {
  std::vector<NodePtr> terms;
  SumNode(SpacePtr s, std::vector<NodePtr> t) : ConvexNode(std::move(s)), terms(std::move(t)) {}
  Kind kind() const override { return Kind::sum; }
  std::string describe() const override {
    std::string out = "sum(";
    for (std::size_t i = 0; i < terms.size(); ++i) out += (i ? ", " : "") + terms[i]->describe();
    return out + ")";
  }
  double value(const Vector& x) const override {
    double v = 0.0;
    for (const auto& t : terms) v += t->value(x);
    return v;
  }
  double value_difference(const Vector& x, const Vector& y) const override {
    double v = 0.0;
    for (const auto& t : terms) v += t->value_difference(x, y);
    return v;
  }
  bool smooth() const override {
    return std::all_of(terms.begin(), terms.end(), [](const NodePtr& t) { return t->smooth(); });
  }
  Vector egrad(const Vector& x) const override {
    Vector g = Vector::Zero(x.size());
    for (const auto& t : terms) g += t->egrad(x);
    return g;
  }
  std::optional<Matrix> ehess(const Vector& x) const override {
    Matrix h = Matrix::Zero(x.size(), x.size());
    for (const auto& t : terms) {
      auto ht = t->ehess(x);
      if (!ht) return std::nullopt;
      h += *ht;
    }
    return h;
  }
};

// ---------------------------------------------------------------- tilt by a linear term
struct TiltedNode final : ConvexNode {
  NodePtr inner;
  Vector f;     // element
  Vector tilt;  // G f
  TiltedNode(NodePtr in, Vector f_)
      : ConvexNode(in->space), inner(std::move(in)), f(std::move(f_)), tilt(space->lower(f)) {}
  Kind kind() const override { return Kind::tilted; }
  std::string describe() const override { return "tilted(" + inner->describe() + ")"; }
  double value(const Vector& x) const override { return inner->value(x) + tilt.dot(x); }
  double value_difference(const Vector& x, const Vector& y) const override {
    return inner->value_difference(x, y) + tilt.dot(x - y);
  }
  bool smooth() const override { return inner->smooth(); }
  Vector egrad(const Vector& x) const override { return inner->egrad(x) + tilt; }
  std::optional<Matrix> ehess(const Vector& x) const override { return inner->ehess(x); }
  ConjugateResult conj(const Vector& s, const Vector* warm) const override { return inner->conj(s - tilt, warm); }
  Vector prox(double lambda, const Vector& x) const override { return inner->prox(lambda, x - lambda * f); }
  double gap(const Vector& x, const Vector& s, Vector* argmax, const Vector* warm) const override {
    return inner->gap(x, s - tilt, argmax, warm);
  }
};

// ---------------------------------------------------------------- composition with a linear map
struct PrecomposeNode final : ConvexNode {
  NodePtr inner;
  Matrix a;  // raw matrix of the map
  Vector shift;
  PrecomposeNode(SpacePtr s, NodePtr in, Matrix a_, Vector shift_)
      : ConvexNode(std::move(s)), inner(std::move(in)), a(std::move(a_)), shift(std::move(shift_)) {}
  Kind kind() const override { return Kind::linear_precompose; }
  std::string describe() const override { return "precompose(" + inner->describe() + ")"; }
  double value(const Vector& x) const override { return inner->value(a * x + shift); }
  double value_difference(const Vector& x, const Vector& y) const override {
    return inner->value_difference(a * x + shift, a * y + shift);
  }
  bool smooth() const override { return inner->smooth(); }
  Vector egrad(const Vector& x) const override { return a.transpose() * inner->egrad(a * x + shift); }
  std::optional<Matrix> ehess(const Vector& x) const override {
    auto h = inner->ehess(a * x + shift);
    if (!h) return std::nullopt;
    return Matrix(a.transpose() * *h * a);
  }
};

// ---------------------------------------------------------------- Moreau envelope
struct EnvelopeNode final : ConvexNode {
  NodePtr inner;
  double alpha;
  EnvelopeNode(NodePtr in, double a) : ConvexNode(in->space), inner(std::move(in)), alpha(a) {}
  Kind kind() const override { return Kind::moreau_envelope; }
  std::string describe() const override {
    std::ostringstream os;
    os << "moreau_envelope(" << inner->describe() << ", alpha=" << alpha << ")";
    return os.str();
  }
  double value(const Vector& x) const override {
    const Vector z = inner->prox(alpha, x);
    return inner->value(z) + space->norm_squared(x - z) / (2 * alpha);
  }
  Vector egrad(const Vector& x) const override { return space->lower(x - inner->prox(alpha, x)) / alpha; }
  ConjugateResult conj(const Vector& s, const Vector* warm) const override {
    ConjugateResult c = inner->conj(s, warm);
    const Vector p = space->raise(s);
    c.value += 0.5 * alpha * s.dot(p);
    c.argmax += alpha * p;
    return c;
  }
  Vector prox(double lambda, const Vector& x) const override {
    check_finite_lambda(lambda);
    return x + (lambda / (lambda + alpha)) * (inner->prox(lambda + alpha, x) - x);
  }
};

// ---------------------------------------------------------------- user supplied
struct NumericNode final : ConvexNode {
  ConvexFunction::ValueFn fn;
  std::optional<ConvexFunction::GradFn> grad;
  Vector lo, hi;
  NumericNode(SpacePtr s, ConvexFunction::ValueFn f, std::optional<ConvexFunction::GradFn> g, Vector l, Vector h)
      : ConvexNode(std::move(s)), fn(std::move(f)), grad(std::move(g)), lo(std::move(l)), hi(std::move(h)) {}
  Kind kind() const override { return Kind::numeric; }
  std::string describe() const override { return "numeric"; }
  double value(const Vector& x) const override { return fn(x); }
  bool smooth() const override { return grad.has_value(); }
  Vector egrad(const Vector& x) const override {
    if (grad) return space->lower((*grad)(x));
    Vector g(x.size());
    Vector xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double h = 1e-6 * (1.0 + std::abs(x[i]));
      xp[i] = x[i] + h;
      const double fp = fn(xp);
      xp[i] = x[i] - h;
      const double fm = fn(xp);
      xp[i] = x[i];
      g[i] = (fp - fm) / (2 * h);
    }
    return g;
  }

  ConjugateResult conj(const Vector& s, const Vector* warm) const override {
    const Eigen::Index n = s.size();
    std::vector<Vector> starts;
    if (warm && warm->size() == n) starts.push_back(*warm);
    starts.push_back(0.5 * (lo + hi));
    std::mt19937_64 rng(0x5eedULL + static_cast<std::uint64_t>(n));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 4; ++k) {
      Vector x(n);
      for (Eigen::Index i = 0; i < n; ++i) x[i] = lo[i] + u(rng) * (hi[i] - lo[i]);
      starts.push_back(std::move(x));
    }
    ConjugateResult best;
    best.value = -kInfinity;
    best.exact = false;
    best.converged = false;
    Objective obj = [&](const Vector& x, Vector* g) {
      if (g) *g = egrad(x) - s;
      return fn(x) - s.dot(x);
    };
    const double diam = (hi - lo).norm();
    for (const auto& x0 : starts) {
      MinimizeOptions o;
      o.max_iter = 1000;
      o.gtol = 1e-10 * (1.0 + s.norm());
      auto r = lbfgs_minimize(obj, x0, o);
      const double v = -r.value;
      if (!std::isfinite(v)) continue;
      if (v > best.value) {
        best.value = v;
        best.argmax = r.x;
        best.gap = r.grad_norm * std::max(diam, r.x.norm());
        best.converged = r.grad_norm <= 1e-7 * (1.0 + s.norm()) && r.x.norm() < 1e8 * (1.0 + diam);
      }
    }
    if (best.argmax.size() == 0) {
      best.argmax = Vector::Zero(n);
      best.value = kInfinity;
    }
    return best;
  }
};

NodePtr make_quadratic(SpacePtr s, Matrix e, Vector beta, double c) {
  return std::make_shared<QuadraticNode>(std::move(s), std::move(e), std::move(beta), c);
}

const QuadraticNode* as_quadratic(const NodePtr& n) { return dynamic_cast<const QuadraticNode*>(n.get()); }

}  // namespace
}  // namespace detail

using detail::NodePtr;

ConvexFunction::ConvexFunction(std::shared_ptr<const detail::ConvexNode> node) : node_(std::move(node)) {}

ConvexFunction ConvexFunction::zero(SpacePtr space) {
  return ConvexFunction(std::make_shared<detail::ZeroNode>(std::move(space)));
}

ConvexFunction ConvexFunction::quadratic_form(SpacePtr space, const Matrix& e, const Vector& beta, double c) {
  const int n = space->dim();
  if (e.rows() != n || e.cols() != n) throw DimensionError("quadratic_form: matrix shape mismatch");
  if (beta.size() != n) throw DimensionError("quadratic_form: linear term dimension mismatch");
  const double scale = std::max(1.0, e.cwiseAbs().maxCoeff());
  if ((e - e.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("quadratic_form: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (e + e.transpose()), Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
    throw std::invalid_argument("quadratic_form: matrix is not positive semidefinite");
  return ConvexFunction(detail::make_quadratic(std::move(space), e, beta, c));
}

ConvexFunction ConvexFunction::quadratic_form(SpacePtr space, const Matrix& e) {
  const int n = space->dim();
  return quadratic_form(std::move(space), e, Vector::Zero(n), 0.0);
}

ConvexFunction ConvexFunction::quadratic(SpacePtr space, const Matrix& q, const Element& b, double c) {
  space->check(b, "quadratic(b)");
  if (q.rows() != space->dim() || q.cols() != space->dim())
    throw DimensionError("quadratic: operator shape mismatch");
  Matrix e = space->gram() * q;
  return quadratic_form(space, e, space->lower(b), c);
}

ConvexFunction ConvexFunction::quadratic(SpacePtr space, const Matrix& q) {
  const int n = space->dim();
  return quadratic(std::move(space), q, Vector::Zero(n), 0.0);
}

ConvexFunction ConvexFunction::half_norm_squared(SpacePtr space) {
  const Matrix g = space->gram();
  return quadratic_form(std::move(space), g);
}

ConvexFunction ConvexFunction::power_norm(SpacePtr space, double m, double weight) {
  if (!(m > 1)) throw std::invalid_argument("power_norm: exponent must exceed 1");
  if (!(weight > 0)) throw std::invalid_argument("power_norm: weight must be positive");
  if (m == 2) return quadratic_form(space, weight * space->gram());
  return ConvexFunction(std::make_shared<detail::PowerNormNode>(std::move(space), m, weight));
}

ConvexFunction ConvexFunction::separable_power(SpacePtr space, double m, Vector weights) {
  if (!(m > 1)) throw std::invalid_argument("separable_power: exponent must exceed 1");
  if (weights.size() != space->dim()) throw DimensionError("separable_power: weight count mismatch");
  if ((weights.array() < 0).any()) throw std::invalid_argument("separable_power: weights must be nonnegative");
  if (m == 2) return quadratic_form(space, Matrix(weights.asDiagonal()));
  return ConvexFunction(std::make_shared<detail::SeparablePowerNode>(std::move(space), m, std::move(weights)));
}

ConvexFunction ConvexFunction::sum(const std::vector<ConvexFunction>& terms) {
  if (terms.empty()) throw std::invalid_argument("sum: no terms");
  SpacePtr space = terms.front().space();
  const int n = space->dim();
  std::vector<NodePtr> flat;
  for (const auto& t : terms) {
    if (t.space()->dim() != n) throw DimensionError("sum: terms live on different spaces");
    if (auto* s = dynamic_cast<const detail::SumNode*>(t.node().get()))
      flat.insert(flat.end(), s->terms.begin(), s->terms.end());
    else
      flat.push_back(t.node());
  }
  Matrix e = Matrix::Zero(n, n);
  Vector beta = Vector::Zero(n);
  double c = 0.0;
  bool any_quadratic = false;
  std::vector<NodePtr> rest;
  for (const auto& t : flat) {
    if (auto* q = detail::as_quadratic(t)) {
      e += q->e;
      beta += q->beta;
      c += q->c;
      any_quadratic = true;
    } else if (t->kind() != Kind::zero) {
      rest.push_back(t);
    }
  }
  if (any_quadratic) rest.insert(rest.begin(), detail::make_quadratic(space, e, beta, c));
  if (rest.empty()) return zero(space);
  if (rest.size() == 1) return ConvexFunction(rest.front());
  return ConvexFunction(std::make_shared<detail::SumNode>(space, std::move(rest)));
}

ConvexFunction ConvexFunction::tilted(const ConvexFunction& phi, const Element& f) {
  phi.space()->check(f, "tilted(f)");
  const auto& node = phi.node();
  if (auto* q = detail::as_quadratic(node))
    return ConvexFunction(detail::make_quadratic(phi.space(), q->e, q->beta + phi.space()->lower(f), q->c));
  if (auto* t = dynamic_cast<const detail::TiltedNode*>(node.get()))
    return ConvexFunction(std::make_shared<detail::TiltedNode>(t->inner, t->f + f));
  return ConvexFunction(std::make_shared<detail::TiltedNode>(node, f));
}

ConvexFunction ConvexFunction::linear_precompose(const ConvexFunction& inner, const LinearMap& a,
                                                 const Element& shift) {
  if (a.codomain()->dim() != inner.space()->dim())
    throw DimensionError("linear_precompose: map codomain does not match inner space");
  inner.space()->check(shift, "linear_precompose(shift)");
  const Matrix am = a.to_dense();
  if (auto* q = detail::as_quadratic(inner.node())) {
    Matrix e = am.transpose() * q->e * am;
    Vector beta = am.transpose() * (q->e * shift + q->beta);
    const double c = 0.5 * shift.dot(q->e * shift) + q->beta.dot(shift) + q->c;
    return ConvexFunction(detail::make_quadratic(a.domain(), 0.5 * (e + e.transpose()), beta, c));
  }
  return ConvexFunction(std::make_shared<detail::PrecomposeNode>(a.domain(), inner.node(), am, shift));
}

ConvexFunction ConvexFunction::moreau_envelope(const ConvexFunction& phi, double alpha) {
  if (!(alpha > 0)) throw std::invalid_argument("moreau_envelope: alpha must be positive");
  const auto& sp = phi.space();
  if (auto* q = detail::as_quadratic(phi.node())) {
    const Matrix& g = sp->gram();
    Eigen::LDLT<Matrix> m(g + alpha * q->e);
    Matrix ea = q->e * m.solve(g);
    ea = 0.5 * (ea + ea.transpose()).eval();
    const Vector z0 = m.solve(Vector(-alpha * q->beta));
    const Vector beta = -sp->lower(z0) / alpha;
    const double c = q->value(z0) + sp->norm_squared(z0) / (2 * alpha);
    return ConvexFunction(detail::make_quadratic(sp, ea, beta, c));
  }
  if (phi.kind() == Kind::zero) return phi;
  return ConvexFunction(std::make_shared<detail::EnvelopeNode>(phi.node(), alpha));
}

ConvexFunction ConvexFunction::numeric(SpacePtr space, ValueFn value, std::optional<GradFn> gradient, Vector box_lo,
                                       Vector box_hi) {
  if (box_lo.size() != space->dim() || box_hi.size() != space->dim())
    throw DimensionError("numeric: box dimension mismatch");
  if ((box_hi.array() <= box_lo.array()).any()) throw std::invalid_argument("numeric: empty box");
  return ConvexFunction(std::make_shared<detail::NumericNode>(std::move(space), std::move(value), std::move(gradient),
                                                              std::move(box_lo), std::move(box_hi)));
}

const SpacePtr& ConvexFunction::space() const { return node_->space; }
ConvexFunction::Kind ConvexFunction::kind() const { return node_->kind(); }
std::string ConvexFunction::describe() const { return node_->describe(); }

double ConvexFunction::eval(const Element& x) const {
  space()->check(x, "ConvexFunction::eval");
  return node_->value(x);
}

double ConvexFunction::value_difference(const Element& x, const Element& y) const {
  space()->check(x, "value_difference(x)");
  space()->check(y, "value_difference(y)");
  return node_->value_difference(x, y);
}

bool ConvexFunction::differentiable() const { return node_->smooth(); }

Element ConvexFunction::gradient(const Element& x) const {
  space()->check(x, "ConvexFunction::gradient");
  return space()->raise(node_->egrad(x));
}

SubgradientResult ConvexFunction::subgradient(const Element& x) const {
  space()->check(x, "ConvexFunction::subgradient");
  if (node_->smooth()) return {gradient(x), false};
  // Finite-difference gradient, checked against one-sided quotients.
  const Vector g = node_->egrad(x);
  Vector xp = x;
  const double f0 = node_->value(x);
  bool kink = false;
  for (Eigen::Index i = 0; i < x.size() && !kink; ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x[i]));
    xp[i] = x[i] + h;
    const double right = (node_->value(xp) - f0) / h;
    xp[i] = x[i] - h;
    const double left = (f0 - node_->value(xp)) / h;
    xp[i] = x[i];
    if (std::abs(right - left) > 1e-4 * (1.0 + std::abs(g[i]))) kink = true;
  }
  if (!kink) return {space()->raise(g), false};
  const double eps = 1e-6;
  return {(x - node_->prox(eps, x)) / eps, true};
}

std::optional<Matrix> ConvexFunction::hessian(const Element& x) const {
  space()->check(x, "ConvexFunction::hessian");
  return node_->ehess(x);
}

ConjugateResult ConvexFunction::conjugate_eval(const Element& p, const Element* warm) const {
  space()->check(p, "ConvexFunction::conjugate");
  return node_->conj(space()->lower(p), warm);
}

double ConvexFunction::conjugate(const Element& p) const {
  ConjugateResult r = conjugate_eval(p);
  if (!r.converged) {
    std::ostringstream os;
    os << "conjugate of " << describe() << " did not converge (gap estimate " << r.gap << ")";
    throw ConjugateFailure(os.str(), r.gap);
  }
  return r.value;
}

Element ConvexFunction::prox(double lambda, const Element& x) const {
  space()->check(x, "ConvexFunction::prox");
  return node_->prox(lambda, x);
}

double ConvexFunction::fenchel_gap(const Element& x, const Element& p, Element* argmax, const Element* warm) const {
  space()->check(x, "fenchel_gap(x)");
  space()->check(p, "fenchel_gap(p)");
  return node_->gap(x, space()->lower(p), argmax, warm);
}

double convexity_defect(const ConvexFunction& phi, int samples, std::uint64_t seed, double scale) {
  const int n = phi.space()->dim();
  auto pts = random_elements(n, 2 * samples, seed, scale);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double t = u(rng);
    const Element& x = pts[2 * k];
    const Element& y = pts[2 * k + 1];
    const double fx = phi.eval(x), fy = phi.eval(y);
    const double mid = phi.eval(t * x + (1 - t) * y);
    const double viol = mid - t * fx - (1 - t) * fy;
    worst = std::max(worst, viol / (1.0 + std::abs(fx) + std::abs(fy)));
  }
  return worst;
}

}  // namespace asdvar
