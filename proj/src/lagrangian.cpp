#include "asdvar/lagrangian.hpp"

#include "asdvar/optim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace asdvar {

// ====================================================================== boundary

BoundaryLagrangian BoundaryLagrangian::initial_value(SpacePtr space, Element a) {
  space->check(a, "initial_value(a)");
  BoundaryLagrangian l;
  l.kind_ = Kind::initial_value;
  l.h1_ = space;
  l.h2_ = space;
  l.a_ = std::move(a);
  return l;
}

BoundaryLagrangian BoundaryLagrangian::custom(ConvexFunction psi1, ConvexFunction psi2) {
  BoundaryLagrangian l;
  l.kind_ = Kind::custom;
  l.h1_ = psi1.space();
  l.h2_ = psi2.space();
  l.psi1_ = std::move(psi1);
  l.psi2_ = std::move(psi2);
  return l;
}

double BoundaryLagrangian::eval(const Element& r, const Element& s) const {
  h1_->check(r, "boundary(r)");
  h2_->check(s, "boundary(s)");
  if (kind_ == Kind::initial_value)
    return 0.5 * h1_->norm_squared(r) - 2 * h1_->inner(a_, r) + h1_->norm_squared(a_) + 0.5 * h2_->norm_squared(s);
  return psi1_->eval(r) + psi2_->eval(s);
}

std::pair<Element, Element> BoundaryLagrangian::gradient(const Element& r, const Element& s) const {
  h1_->check(r, "boundary(r)");
  h2_->check(s, "boundary(s)");
  if (kind_ == Kind::initial_value) return {r - 2 * a_, s};
  return {psi1_->gradient(r), psi2_->gradient(s)};
}

double BoundaryLagrangian::excess(const Element& r, const Element& s) const {
  if (kind_ == Kind::initial_value) {
    h1_->check(r, "boundary(r)");
    return h1_->norm_squared(r - a_);
  }
  return eval(r, s) - 0.5 * (h2_->norm_squared(s) - h1_->norm_squared(r));
}

double BoundaryLagrangian::conjugate(const Element& q1, const Element& q2) const {
  h1_->check(q1, "boundary conjugate(q1)");
  h2_->check(q2, "boundary conjugate(q2)");
  if (kind_ == Kind::initial_value)
    return 0.5 * h1_->norm_squared(q1 + 2 * a_) - h1_->norm_squared(a_) + 0.5 * h2_->norm_squared(q2);
  return psi1_->conjugate(q1) + psi2_->conjugate(q2);
}

double selfdual_boundary_defect(const BoundaryLagrangian& ell, std::span<const ElementPair> samples) {
  double worst = 0.0;
  for (const auto& [h1, h2] : samples) worst = std::max(worst, std::abs(ell.conjugate(-h1, h2) - ell.eval(h1, h2)));
  return worst;
}

// ====================================================================== nodes

namespace detail {

using Kind = Lagrangian::Kind;

struct LagNode {
  explicit LagNode(SpacePtr s) : space(std::move(s)) {}
  virtual ~LagNode() = default;
  SpacePtr space;
  virtual Kind kind() const = 0;
  virtual std::string describe() const = 0;
  virtual LagrangianValue eval(const Element& x, const Element& p) const = 0;
  virtual std::optional<double> hamiltonian_closed(const Element&, const Element&) const { return std::nullopt; }
  virtual std::optional<Element> prox_point(const Element&, const Element&) const { return std::nullopt; }
};

namespace {

using NodePtr = std::shared_ptr<const LagNode>;

struct InnerResult {
  Element z;
  double value;
  double grad_norm;
  bool converged;
};

// Minimizes a function of one element given its Gram-gradient.
InnerResult inner_minimize(const Space& space,
                           const std::function<double(const Element&, Element*)>& fn, const Element& z0,
                           double scale) {
  Objective obj = [&](const Vector& z, Vector* g) {
    Element gg;
    const double v = fn(z, g ? &gg : nullptr);
    if (g) *g = space.lower(gg);
    return v;
  };
  MinimizeOptions o;
  o.max_iter = 500;
  o.gtol = 1e-12 * (1.0 + scale);
  o.record_history = false;
  o.precondition = [&](const Vector& g) { return Vector(space.raise(g)); };
  auto r = lbfgs_minimize(obj, z0, o);
  return {r.x, r.value, r.grad_norm, r.grad_norm <= 1e-8 * (1.0 + scale) && std::isfinite(r.value)};
}

struct BasicNode final : LagNode {
  ConvexFunction psi;
  explicit BasicNode(ConvexFunction f) : LagNode(f.space()), psi(std::move(f)) {}
  Kind kind() const override { return Kind::basic; }
  std::string describe() const override { return "basic(" + psi.describe() + ")"; }
  LagrangianValue eval(const Element& x, const Element& p) const override {
    LagrangianValue v;
    ConjugateResult c = psi.conjugate_eval(-p);
    v.value = psi.eval(x) + c.value;
    v.grad_x = psi.subgradient(x).value;
    v.grad_p = -c.argmax;
    v.gap = c.gap;
    v.converged = c.converged;
    return v;
  }
  std::optional<double> hamiltonian_closed(const Element& x, const Element& y) const override {
    return psi.eval(-y) - psi.eval(x);
  }
};

struct ShiftNode final : LagNode {
  NodePtr inner;
  LinearMap b;
  ShiftNode(NodePtr in, LinearMap b_) : LagNode(in->space), inner(std::move(in)), b(std::move(b_)) {}
  Kind kind() const override { return Kind::shift; }
  std::string describe() const override { return "shift(" + inner->describe() + ")"; }
  LagrangianValue eval(const Element& x, const Element& p) const override {
    LagrangianValue v = inner->eval(x, b.apply(x) + p);
    v.grad_x += b.adjoint_apply(v.grad_p);
    return v;
  }
  std::optional<double> hamiltonian_closed(const Element& x, const Element& y) const override {
    auto h = inner->hamiltonian_closed(x, y);
    if (!h) return std::nullopt;
    return *h - space->inner(b.apply(x), y);
  }
};

struct OplusNode final : LagNode {
  NodePtr l, m;
  OplusNode(NodePtr a, NodePtr b) : LagNode(a->space), l(std::move(a)), m(std::move(b)) {}
  Kind kind() const override { return Kind::oplus; }
  std::string describe() const override { return "oplus(" + l->describe() + ", " + m->describe() + ")"; }
  LagrangianValue eval(const Element& x, const Element& p) const override {
    auto fn = [&](const Element& r, Element* g) {
      LagrangianValue a = l->eval(x, r);
      LagrangianValue b = m->eval(x, p - r);
      if (g) *g = a.grad_p - b.grad_p;
      return a.value + b.value;
    };
    InnerResult r = inner_minimize(*space, fn, 0.5 * p, space->norm(x) + space->norm(p));
    LagrangianValue a = l->eval(x, r.z);
    LagrangianValue b = m->eval(x, p - r.z);
    LagrangianValue v;
    v.value = a.value + b.value;
    v.grad_x = a.grad_x + b.grad_x;
    v.grad_p = b.grad_p;
    v.gap = r.grad_norm + a.gap + b.gap;
    v.converged = r.converged && a.converged && b.converged;
    return v;
  }
  std::optional<double> hamiltonian_closed(const Element& x, const Element& y) const override {
    auto a = l->hamiltonian_closed(x, y);
    auto b = m->hamiltonian_closed(x, y);
    if (!a || !b) return std::nullopt;
    return *a + *b;
  }
};

struct StarNode final : LagNode {
  NodePtr l, m;
  StarNode(NodePtr a, NodePtr b) : LagNode(a->space), l(std::move(a)), m(std::move(b)) {}
  Kind kind() const override { return Kind::star; }
  std::string describe() const override { return "star(" + l->describe() + ", " + m->describe() + ")"; }
  LagrangianValue eval(const Element& x, const Element& p) const override {
    auto fn = [&](const Element& z, Element* g) {
      LagrangianValue a = l->eval(z, p);
      LagrangianValue b = m->eval(x - z, p);
      if (g) *g = a.grad_x - b.grad_x;
      return a.value + b.value;
    };
    InnerResult r = inner_minimize(*space, fn, 0.5 * x, space->norm(x) + space->norm(p));
    LagrangianValue a = l->eval(r.z, p);
    LagrangianValue b = m->eval(x - r.z, p);
    LagrangianValue v;
    v.value = a.value + b.value;
    v.grad_x = b.grad_x;
    v.grad_p = a.grad_p + b.grad_p;
    v.gap = r.grad_norm + a.gap + b.gap;
    v.converged = r.converged && a.converged && b.converged;
    return v;
  }
};

struct LambdaRegNode final : LagNode {
  NodePtr inner;
  double alpha, beta;
  std::optional<ConvexFunction> psi, env_alpha, env_beta;

  LambdaRegNode(NodePtr in, double a, double b) : LagNode(in->space), inner(std::move(in)), alpha(a), beta(b) {
    if (auto* basic = dynamic_cast<const BasicNode*>(inner.get())) {
      psi = basic->psi;
      env_alpha = ConvexFunction::moreau_envelope(*psi, alpha);
      env_beta = ConvexFunction::moreau_envelope(*psi, beta);
    }
  }
  Kind kind() const override { return Kind::lambda_reg; }
  std::string describe() const override {
    std::ostringstream os;
    os << "lambda_reg(" << inner->describe() << ", alpha=" << alpha << ", beta=" << beta << ")";
    return os.str();
  }

  Element solve_z(const Element& x, const Element& p, double* gn, bool* ok) const {
    if (psi) {
      if (gn) *gn = 0.0;
      if (ok) *ok = true;
      return psi->prox(alpha, x);
    }
    auto fn = [&](const Element& z, Element* g) {
      LagrangianValue a = inner->eval(z, p);
      if (g) *g = a.grad_x + (z - x) / alpha;
      return a.value + space->norm_squared(x - z) / (2 * alpha);
    };
    InnerResult r = inner_minimize(*space, fn, x, space->norm(x) + space->norm(p));
    if (gn) *gn = r.grad_norm;
    if (ok) *ok = r.converged;
    return r.z;
  }

  LagrangianValue eval(const Element& x, const Element& p) const override {
    double gn = 0.0;
    bool ok = true;
    const Element z = solve_z(x, p, &gn, &ok);
    LagrangianValue a = inner->eval(z, p);
    LagrangianValue v;
    v.value = a.value + space->norm_squared(x - z) / (2 * alpha) + 0.5 * beta * space->norm_squared(p);
    v.grad_x = (x - z) / alpha;
    v.grad_p = a.grad_p + beta * p;
    v.gap = gn + a.gap;
    v.converged = ok && a.converged;
    return v;
  }
  std::optional<double> hamiltonian_closed(const Element& x, const Element& y) const override {
    if (!psi) return std::nullopt;
    return env_beta->eval(-y) - env_alpha->eval(x);
  }
  std::optional<Element> prox_point(const Element& x, const Element& p) const override {
    return solve_z(x, p, nullptr, nullptr);
  }
};

struct BoundaryAugNode final : LagNode {
  NodePtr inner;
  LinearMap b;
  BoundaryPair bp;
  BoundaryLagrangian ell;
  BoundaryAugNode(NodePtr in, LinearMap b_, BoundaryPair bp_, BoundaryLagrangian ell_)
      : LagNode(in->space), inner(std::move(in)), b(std::move(b_)), bp(std::move(bp_)), ell(std::move(ell_)) {}
  Kind kind() const override { return Kind::boundary_aug; }
  std::string describe() const override { return "boundary_aug(" + inner->describe() + ")"; }
  LagrangianValue eval(const Element& x, const Element& p) const override {
    LagrangianValue v = inner->eval(x, b.apply(x) + p);
    const Element r = bp.b1.apply(x), s = bp.b2.apply(x);
    auto [gr, gs] = ell.gradient(r, s);
    v.value += ell.eval(r, s);
    v.grad_x += b.adjoint_apply(v.grad_p) + bp.b1.adjoint_apply(gr) + bp.b2.adjoint_apply(gs);
    return v;
  }
  std::optional<double> hamiltonian_closed(const Element& x, const Element& y) const override {
    auto h = inner->hamiltonian_closed(x, y);
    if (!h) return std::nullopt;
    return *h - space->inner(b.apply(x), y) - ell.eval(bp.b1.apply(x), bp.b2.apply(x));
  }
};

struct CustomNode final : LagNode {
  Lagrangian::CustomFn fn;
  std::string name;
  CustomNode(SpacePtr s, Lagrangian::CustomFn f, std::string n)
      : LagNode(std::move(s)), fn(std::move(f)), name(std::move(n)) {}
  Kind kind() const override { return Kind::custom; }
  std::string describe() const override { return name; }
  LagrangianValue eval(const Element& x, const Element& p) const override { return fn(x, p); }
};

void require_same_space(const Lagrangian& a, const Lagrangian& b, const char* what) {
  if (a.space()->dim() != b.space()->dim()) throw DimensionError(std::string(what) + ": Lagrangians on different spaces");
}

}  // namespace
}  // namespace detail

Lagrangian::Lagrangian(std::shared_ptr<const detail::LagNode> node) : node_(std::move(node)) {}

Lagrangian Lagrangian::basic(const ConvexFunction& psi) {
  return Lagrangian(std::make_shared<detail::BasicNode>(psi));
}

Lagrangian Lagrangian::oplus(const Lagrangian& l, const Lagrangian& m) {
  detail::require_same_space(l, m, "oplus");
  return Lagrangian(std::make_shared<detail::OplusNode>(l.node(), m.node()));
}

Lagrangian Lagrangian::star(const Lagrangian& l, const Lagrangian& m) {
  detail::require_same_space(l, m, "star");
  return Lagrangian(std::make_shared<detail::StarNode>(l.node(), m.node()));
}

Lagrangian Lagrangian::shift(const Lagrangian& l, const LinearMap& b) {
  if (b.domain()->dim() != l.space()->dim() || b.codomain()->dim() != l.space()->dim())
    throw DimensionError("shift: operator does not act on the Lagrangian's space");
  return Lagrangian(std::make_shared<detail::ShiftNode>(l.node(), b));
}

Lagrangian Lagrangian::lambda_regularize(const Lagrangian& l, double alpha, double beta) {
  if (!(alpha > 0) || !(beta > 0)) throw std::invalid_argument("lambda_regularize: alpha and beta must be positive");
  return Lagrangian(std::make_shared<detail::LambdaRegNode>(l.node(), alpha, beta));
}

Lagrangian Lagrangian::lambda_regularize(const Lagrangian& l, double lambda, RegularizationPreset preset) {
  if (!(lambda > 0)) throw std::invalid_argument("lambda_regularize: lambda must be positive");
  const double a = preset == RegularizationPreset::proximal ? lambda : 1.0 / (lambda * lambda);
  return lambda_regularize(l, a, a);
}

Lagrangian Lagrangian::augment_boundary(const Lagrangian& l, const LinearMap& b, const BoundaryPair& bp,
                                        const BoundaryLagrangian& ell, double tol) {
  const auto& sp = l.space();
  if (b.domain()->dim() != sp->dim() || bp.domain()->dim() != sp->dim())
    throw DimensionError("augment_boundary: operators do not act on the Lagrangian's space");
  if (bp.b1.codomain()->dim() != ell.first_space()->dim() || bp.b2.codomain()->dim() != ell.second_space()->dim())
    throw DimensionError("augment_boundary: boundary spaces do not match the boundary Lagrangian");
  const auto samples = random_elements(sp->dim(), 20, 0xb0a7dULL);
  const double defect = boundary_skew_defect(*sp, b, bp, samples);
  if (defect > tol) {
    std::ostringstream os;
    os << "augment_boundary: boundary identity defect " << defect << " exceeds tolerance " << tol;
    throw BoundaryDefectError(os.str(), defect);
  }
  return Lagrangian(std::make_shared<detail::BoundaryAugNode>(l.node(), b, bp, ell));
}

Lagrangian Lagrangian::custom(SpacePtr space, CustomFn fn, std::string name) {
  return Lagrangian(std::make_shared<detail::CustomNode>(std::move(space), std::move(fn), std::move(name)));
}

const SpacePtr& Lagrangian::space() const { return node_->space; }
Lagrangian::Kind Lagrangian::kind() const { return node_->kind(); }
std::string Lagrangian::describe() const { return node_->describe(); }

LagrangianValue Lagrangian::evaluate(const Element& x, const Element& p) const {
  space()->check(x, "Lagrangian(x)");
  space()->check(p, "Lagrangian(p)");
  return node_->eval(x, p);
}

Element Lagrangian::prox_point(const Element& x, const Element& p) const {
  space()->check(x, "prox_point(x)");
  space()->check(p, "prox_point(p)");
  auto z = node_->prox_point(x, p);
  if (!z) throw std::logic_error("prox_point: only defined for regularized Lagrangians");
  return *z;
}

HamiltonianValue Lagrangian::hamiltonian(const Element& x, const Element& y, HamiltonianMethod method) const {
  space()->check(x, "hamiltonian(x)");
  space()->check(y, "hamiltonian(y)");
  HamiltonianValue h;
  if (method == HamiltonianMethod::automatic) {
    if (auto v = node_->hamiltonian_closed(x, y)) {
      h.value = *v;
      return h;
    }
  }
  const Space& sp = *space();
  auto fn = [&](const Element& p, Element* g) {
    LagrangianValue v = node_->eval(x, p);
    if (g) *g = v.grad_p - y;
    return v.value - sp.inner(p, y);
  };
  Objective obj = [&](const Vector& p, Vector* g) {
    Element gg;
    const double v = fn(p, g ? &gg : nullptr);
    if (g) *g = sp.lower(gg);
    return v;
  };
  MinimizeOptions o;
  o.max_iter = 1000;
  const double scale = 1.0 + sp.norm(x) + sp.norm(y);
  o.gtol = 1e-11 * scale;
  o.record_history = false;
  o.precondition = [&](const Vector& g) { return Vector(sp.raise(g)); };
  auto r = lbfgs_minimize(obj, Vector::Zero(sp.dim()), o);
  h.exact = false;
  h.argmax = r.x;
  if (!std::isfinite(r.value) || r.x.norm() > 1e10) {
    h.value = kInfinity;
    h.converged = false;
    return h;
  }
  h.value = -r.value;
  h.converged = r.grad_norm <= 1e-8 * scale;
  return h;
}

double hamiltonian_eval(const Lagrangian& l, const Element& x, const Element& y) {
  return l.hamiltonian(x, y).value;
}

double lagrangian_conjugate_local(const Lagrangian& l, const Element& q, const Element& y, const Element& x0,
                                  const Element& p0, bool* converged) {
  const Space& sp = *l.space();
  const int n = sp.dim();
  Objective obj = [&](const Vector& z, Vector* g) {
    const Element x = z.head(n), p = z.tail(n);
    LagrangianValue v = l.evaluate(x, p);
    if (g) {
      g->resize(2 * n);
      g->head(n) = sp.lower(v.grad_x - q);
      g->tail(n) = sp.lower(v.grad_p - y);
    }
    return v.value - sp.inner(q, x) - sp.inner(y, p);
  };
  Vector z0(2 * n);
  z0 << x0, p0;
  MinimizeOptions o;
  o.max_iter = 500;
  o.gtol = 1e-11 * (1.0 + sp.norm(q) + sp.norm(y));
  o.record_history = false;
  o.precondition = [&](const Vector& g) {
    Vector out(2 * n);
    out.head(n) = sp.raise(Vector(g.head(n)));
    out.tail(n) = sp.raise(Vector(g.tail(n)));
    return out;
  };
  auto r = lbfgs_minimize(obj, z0, o);
  if (converged) *converged = r.grad_norm <= 1e-7 * (1.0 + sp.norm(q) + sp.norm(y));
  return -r.value;
}

AsdDefectResult asd_defect(const Lagrangian& l, std::span<const ElementPair> samples, const AsdDefectOptions& opts) {
  const Space& sp = *l.space();
  const int n = sp.dim();
  if (n > 3) throw std::invalid_argument("asd_defect: brute-force search limited to dim <= 3");
  const int axes = 2 * n;
  const long total = static_cast<long>(opts.grid_n) * opts.grid_n;
  int per_axis = axes <= 2 ? opts.grid_n
                           : std::max(3, static_cast<int>(std::floor(std::pow(static_cast<double>(total), 1.0 / axes) + 1e-9)));
  AsdDefectResult res;
  res.points_per_axis = per_axis;
  const double lo = opts.box_lo, hi = opts.box_hi;
  const double step = (hi - lo) / (per_axis - 1);
  std::vector<int> idx(axes);
  Element x(n), p(n);
  for (const auto& [sx, spp] : samples) {
    sp.check(sx, "asd_defect(x)");
    sp.check(spp, "asd_defect(p)");
    // L*(p, x): sup over (y, r) of <p,y> + <x,r> - L(y,r).
    double best = -kInfinity;
    std::vector<int> best_idx(axes, 0);
    std::fill(idx.begin(), idx.end(), 0);
    const Vector gp = sp.lower(spp), gx = sp.lower(sx);
    while (true) {
      for (int i = 0; i < n; ++i) {
        x[i] = lo + step * idx[i];
        p[i] = lo + step * idx[n + i];
      }
      const double v = gp.dot(x) + gx.dot(p) - l.evaluate(x, p).value;
      if (v > best) {
        best = v;
        best_idx = idx;
      }
      int a = 0;
      while (a < axes && ++idx[a] == per_axis) idx[a++] = 0;
      if (a == axes) break;
    }
    Element y0(n), r0(n);
    bool on_edge = false;
    for (int i = 0; i < n; ++i) {
      y0[i] = lo + step * best_idx[i];
      r0[i] = lo + step * best_idx[n + i];
    }
    for (int a = 0; a < axes; ++a) on_edge = on_edge || best_idx[a] == 0 || best_idx[a] == per_axis - 1;
    double sup = best;
    if (opts.refine) {
      bool ok = false;
      const double refined = lagrangian_conjugate_local(l, spp, sx, y0, r0, &ok);
      if (std::isfinite(refined) && refined > sup) sup = refined;
    }
    if (on_edge) res.boundary_hit = true;
    const double target = l.evaluate(-sx, -spp).value;
    const double d = std::abs(sup - target);
    res.per_sample.push_back(d);
    res.defect = std::max(res.defect, d);
  }
  return res;
}

}  // namespace asdvar
