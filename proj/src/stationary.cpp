#include "asdvar/stationary.hpp"

#include "asdvar/optim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace asdvar {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::failed: return "failed";
  }
  return "unknown";
}

std::string coercivity_warning(const ConvexFunction& phi, std::uint64_t seed) {
  const int n = phi.space()->dim();
  auto dirs = random_elements(n, 4, seed);
  for (auto& d : dirs) {
    d /= phi.space()->norm(d);
    const double base = phi.eval(Vector::Zero(n));
    const double g2 = (phi.eval(1e2 * d) - base) / 1e2;
    const double g3 = (phi.eval(1e3 * d) - base) / 1e3;
    if (!(g3 > g2) && std::isfinite(g3)) {
      std::ostringstream os;
      os << "phi does not appear coercive along a sampled ray (slope " << g2 << " -> " << g3 << ")";
      return os.str();
    }
  }
  return {};
}

StationaryProblem::StationaryProblem(SpacePtr space, ConvexFunction phi, LinearMap b, ConservativeMap lambda,
                                     Element f, std::optional<BoundaryPair> bp,
                                     std::optional<BoundaryLagrangian> ell, double tol)
    : space_(std::move(space)),
      phi_(std::move(phi)),
      b_(std::move(b)),
      lambda_(std::move(lambda)),
      f_(std::move(f)),
      bp_(std::move(bp)),
      ell_(std::move(ell)),
      psi_(ConvexFunction::tilted(phi_, f_)) {
  const int n = space_->dim();
  space_->check(f_, "StationaryProblem(f)");
  if (phi_.space()->dim() != n || b_.domain()->dim() != n || b_.codomain()->dim() != n ||
      lambda_.space()->dim() != n)
    throw DimensionError("StationaryProblem: components live on different spaces");
  if (bp_.has_value() != ell_.has_value())
    throw std::invalid_argument("StationaryProblem: boundary pair and boundary Lagrangian go together");
  const auto samples = random_elements(n, 10, 0x5717ULL);
  if (bp_) {
    if (bp_->domain()->dim() != n) throw DimensionError("StationaryProblem: boundary pair domain mismatch");
    defects_.boundary = boundary_skew_defect(*space_, b_, *bp_, samples);
  } else {
    const auto pairs = random_pairs(n, 10, 0x5718ULL);
    defects_.skew = skew_defect(*space_, b_, pairs);
  }
  if (!lambda_.is_zero()) defects_.conservativity = conservativity_defect(*space_, lambda_, samples);
  auto fail = [&](const char* what, double d) {
    std::ostringstream os;
    os << "StationaryProblem: " << what << " defect " << d << " exceeds " << tol;
    throw ProblemDefectError(os.str(), d);
  };
  if (defects_.skew > tol) fail("skew", defects_.skew);
  if (defects_.boundary > tol) fail("boundary identity", defects_.boundary);
  if (defects_.conservativity > tol) fail("conservativity", defects_.conservativity);
  if (auto w = coercivity_warning(phi_); !w.empty()) warnings_.push_back(w);
}

Element StationaryProblem::dual_argument(const Element& x) const {
  return -lambda_.apply(x) - b_.apply(x) - f_;
}

CertificateEvaluation certificate_eval(const StationaryProblem& p, const Element& x, bool want_gradient,
                                       const Element* warm) {
  const Space& sp = *p.space();
  sp.check(x, "certificate");
  CertificateEvaluation out;
  const Element lx = p.lambda().is_zero() ? Element(Vector::Zero(sp.dim())) : p.lambda().apply(x);
  const Element bx = p.b().apply(x);
  const Element s = -lx - bx;  // argument of psi*
  const ConvexFunction& psi = p.psi();
  double gap;
  Element xs;
  if (psi.kind() == ConvexFunction::Kind::quadratic) {
    gap = psi.fenchel_gap(x, s, &xs);
  } else {
    ConjugateResult c = psi.conjugate_eval(s, warm);
    xs = c.argmax;
    out.converged = c.converged;
    gap = std::isfinite(c.value) ? psi.value_difference(x, xs) - sp.inner(s, x - xs) : kInfinity;
  }
  double value = gap - sp.inner(lx, x);
  double boundary_identity = sp.inner(x, bx);
  if (p.boundary_pair()) {
    const auto& bp = *p.boundary_pair();
    const Element r = bp.b1.apply(x), q = bp.b2.apply(x);
    boundary_identity -= 0.5 * (bp.b2.codomain()->norm_squared(q) - bp.b1.codomain()->norm_squared(r));
    value += p.boundary_lagrangian()->excess(r, q);
  }
  value -= boundary_identity;
  out.value = value;
  out.dual_point = xs;
  const double phix = p.phi().eval(x);
  const double psix = p.psi().eval(x);
  const double conj = gap - psix + sp.inner(s, x);
  out.scale = 1.0 + std::abs(phix) + (std::isfinite(conj) ? std::abs(conj) : 0.0);
  if (want_gradient) {
    Element g = psi.gradient(x) - p.b().adjoint_apply(xs);
    if (!p.lambda().is_zero()) g -= p.lambda().vjp(x, xs);
    if (p.boundary_pair()) {
      const auto& bp = *p.boundary_pair();
      auto [gr, gs] = p.boundary_lagrangian()->gradient(bp.b1.apply(x), bp.b2.apply(x));
      g += bp.b1.adjoint_apply(gr) + bp.b2.adjoint_apply(gs);
    }
    out.gradient = std::move(g);
  }
  return out;
}

double certificate(const StationaryProblem& p, const Element& x) { return certificate_eval(p, x, false).value; }

double inclusion_residual(const StationaryProblem& p, const Element& x) {
  const Space& sp = *p.space();
  const Element z = p.phi().prox(1.0, x + p.dual_argument(x));
  double r = sp.norm(x - z);
  if (p.boundary_pair()) {
    const auto& bp = *p.boundary_pair();
    r += std::sqrt(std::max(0.0, p.boundary_lagrangian()->excess(bp.b1.apply(x), bp.b2.apply(x))));
  }
  return r / (1.0 + sp.norm(x));
}

namespace {

std::function<Vector(const Vector&)> make_preconditioner(const StationaryProblem& p, const Element& x0) {
  const Space& sp = *p.space();
  auto h = p.psi().hessian(x0);
  if (h) {
    Matrix m = *h;
    const double shift = 1e-8 * std::max(1e-300, m.diagonal().cwiseAbs().maxCoeff());
    m += shift * sp.gram();
    auto ldlt = std::make_shared<Eigen::LDLT<Matrix>>(m);
    if (ldlt->info() == Eigen::Success && (ldlt->vectorD().array() > 0).all())
      return [ldlt](const Vector& g) -> Vector { return ldlt->solve(g); };
  }
  auto spc = p.space();
  return [spc](const Vector& g) -> Vector { return spc->raise(g); };
}

void finish_report(const StationaryProblem& p, SolveReport& rep, const SolveOptions& opts) {
  auto ce = certificate_eval(p, rep.x, false);
  rep.certificate = ce.value;
  rep.scale = ce.scale;
  rep.inclusion_residual = inclusion_residual(p, rep.x);
  rep.residual_constant = rep.certificate > 0 ? rep.inclusion_residual / std::sqrt(rep.certificate) : 0.0;
  if (rep.status == SolveStatus::converged && rep.certificate > opts.certificate_tol * rep.scale) {
    rep.status = SolveStatus::failed;
    rep.message += (rep.message.empty() ? "" : "; ") + std::string("certificate above acceptance threshold");
  }
  rep.warnings = p.warnings();
}

}  // namespace

SolveReport solve_minimize(const StationaryProblem& p, const SolveOptions& opts) {
  const Space& sp = *p.space();
  SolveReport rep;
  Element x0 = opts.initial ? *opts.initial : Element(Vector::Zero(sp.dim()));
  sp.check(x0, "solve_minimize(initial)");
  Element warm;
  bool inner_ok = true;
  Objective obj = [&](const Vector& x, Vector* g) {
    auto ce = certificate_eval(p, x, g != nullptr, warm.size() ? &warm : nullptr);
    if (ce.dual_point.allFinite()) warm = ce.dual_point;
    inner_ok = inner_ok && ce.converged;
    if (g) *g = sp.lower(ce.gradient);
    return ce.value;
  };
  const auto c0 = certificate_eval(p, x0, false);
  if (!std::isfinite(c0.value)) {
    rep.x = x0;
    rep.status = SolveStatus::failed;
    rep.message = "certificate is infinite at the initial point";
    finish_report(p, rep, opts);
    return rep;
  }
  MinimizeOptions mo;
  mo.max_iter = opts.max_iter;
  mo.gtol = opts.gtol * c0.scale;
  mo.memory = opts.memory;
  mo.precondition = make_preconditioner(p, x0);
  auto r = lbfgs_minimize(obj, x0, mo);
  rep.x = r.x;
  rep.iterations = r.iterations;
  for (auto [v, gn] : r.history) rep.history.push_back({v, gn});
  switch (r.status) {
    case MinimizeStatus::converged: rep.status = SolveStatus::converged; break;
    case MinimizeStatus::max_iter: rep.status = SolveStatus::max_iter; break;
    case MinimizeStatus::line_search_failed:
      if (std::isfinite(r.value) && r.value <= 1e-12 * c0.scale) {
        rep.status = SolveStatus::converged;
        rep.message = "stopped at the rounding floor of the certificate";
      } else {
        rep.status = SolveStatus::failed;
        rep.message = "line search failed";
      }
      break;
    case MinimizeStatus::non_finite:
      rep.status = SolveStatus::failed;
      rep.message = "non-finite certificate";
      break;
  }
  finish_report(p, rep, opts);
  if (!inner_ok) rep.warnings.insert(rep.warnings.begin(), "an inner conjugate maximization did not converge");
  return rep;
}

SolveReport solve_picard(const StationaryProblem& p, const SolveOptions& opts) {
  const Space& sp = *p.space();
  SolveReport rep;
  if (!(opts.damping > 0 && opts.damping <= 1)) throw std::invalid_argument("solve_picard: damping must be in (0,1]");
  Element x = opts.initial ? *opts.initial : Element(Vector::Zero(sp.dim()));
  sp.check(x, "solve_picard(initial)");
  Element warm;
  double first = -1.0, prev = kInfinity;
  int growth = 0;
  rep.status = SolveStatus::max_iter;
  for (rep.iterations = 0; rep.iterations < opts.max_iter; ++rep.iterations) {
    auto ce = certificate_eval(p, x, false, warm.size() ? &warm : nullptr);
    warm = ce.dual_point;
    const Element next = (1 - opts.damping) * x + opts.damping * ce.dual_point;
    const double step = sp.norm(next - x);
    rep.history.push_back({ce.value, step});
    if (!std::isfinite(step) || !next.allFinite()) {
      rep.status = SolveStatus::failed;
      rep.message = "Picard iteration produced non-finite values";
      break;
    }
    if (first < 0) first = step;
    growth = step > prev ? growth + 1 : 0;
    prev = step;
    x = next;
    if (step <= opts.tol * (1.0 + sp.norm(x))) {
      rep.status = SolveStatus::converged;
      ++rep.iterations;
      break;
    }
    if (growth >= 10 || step > 1e6 * std::max(first, 1e-300)) {
      rep.status = SolveStatus::failed;
      rep.message = "Picard iteration diverges (step growth)";
      ++rep.iterations;
      break;
    }
  }
  rep.x = x;
  finish_report(p, rep, opts);
  return rep;
}

double minmax_value(const StationaryProblem& p, const Element& x, const Element& y) {
  const Space& sp = *p.space();
  double v = 0.0;
  if (!p.lambda().is_zero()) v -= sp.inner(p.lambda().apply(x), y);
  v += sp.inner(x, p.b().apply(y));
  if (p.boundary_pair()) {
    const auto& bp = *p.boundary_pair();
    v -= p.boundary_lagrangian()->eval(bp.b1.apply(y), bp.b2.apply(y));
  }
  v += p.psi().value_difference(x, y);
  return v;
}

MinmaxResult minmax_sup(const StationaryProblem& p, const Element& x, std::span<const Element> probes, bool polish) {
  const Space& sp = *p.space();
  MinmaxResult res;
  res.diagonal = minmax_value(p, x, x);
  std::vector<Element> all(probes.begin(), probes.end());
  all.push_back(x);
  all.emplace_back(Vector::Zero(sp.dim()));
  const Element lx = p.lambda().is_zero() ? Element(Vector::Zero(sp.dim())) : p.lambda().apply(x);
  const Element s = -lx - p.b().apply(x);
  auto c = p.psi().conjugate_eval(s);
  if (c.argmax.allFinite()) all.push_back(c.argmax);
  res.sup = -kInfinity;
  for (const auto& y : all) {
    const double v = minmax_value(p, x, y);
    ++res.probes;
    if (v > res.sup) {
      res.sup = v;
      res.best_probe = y;
    }
  }
  if (polish) {
    const Element bstar_x = p.b().adjoint_apply(x);
    Objective obj = [&](const Vector& y, Vector* g) {
      const double v = minmax_value(p, x, y);
      if (g) {
        Element gg = lx - bstar_x + p.psi().gradient(y);
        if (p.boundary_pair()) {
          const auto& bp = *p.boundary_pair();
          auto [gr, gs] = p.boundary_lagrangian()->gradient(bp.b1.apply(y), bp.b2.apply(y));
          gg += bp.b1.adjoint_apply(gr) + bp.b2.adjoint_apply(gs);
        }
        *g = sp.lower(gg);
      }
      return -v;
    };
    MinimizeOptions mo;
    mo.max_iter = 200;
    mo.gtol = 1e-12 * (1.0 + std::abs(res.sup));
    mo.record_history = false;
    mo.precondition = make_preconditioner(p, res.best_probe);
    auto r = lbfgs_minimize(obj, res.best_probe, mo);
    if (std::isfinite(r.value) && -r.value > res.sup) {
      res.sup = -r.value;
      res.best_probe = r.x;
    }
    res.probes += r.evaluations;
  }
  return res;
}

}  // namespace asdvar
