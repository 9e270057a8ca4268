#include "asdvar/evolution.hpp"

#include "asdvar/optim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace asdvar {

PathProblem::PathProblem(StationaryProblem base, Element v0, double horizon, int steps)
    : PathProblem(std::move(base), std::move(v0), horizon, steps, nullptr, nullptr) {}

PathProblem::PathProblem(StationaryProblem base, Element v0, double horizon, int steps, PhiFamily phi_at,
                         ForceFamily f_at)
    : base_(std::move(base)),
      v0_(std::move(v0)),
      horizon_(horizon),
      steps_(steps),
      phi_at_(std::move(phi_at)),
      f_at_(std::move(f_at)) {
  if (base_.boundary_pair()) throw std::invalid_argument("PathProblem: the base problem must not carry boundaries");
  if (!(horizon_ > 0) || !std::isfinite(horizon_)) throw std::invalid_argument("PathProblem: horizon must be > 0");
  if (steps_ < 1) throw std::invalid_argument("PathProblem: need at least one step");
  base_.space()->check(v0_, "PathProblem(v0)");
  build();
}

void PathProblem::build() {
  phis_.clear();
  fs_.clear();
  psis_.clear();
  const bool varying = time_dependent();
  for (int k = 0; k <= steps_; ++k) {
    if (k > 0 && !varying) {
      phis_.push_back(phis_.front());
      fs_.push_back(fs_.front());
      psis_.push_back(psis_.front());
      continue;
    }
    const double t = time(k);
    ConvexFunction phi = phi_at_ ? phi_at_(t) : base_.phi();
    Element f = f_at_ ? f_at_(t) : base_.f();
    if (phi.space()->dim() != space()->dim()) throw DimensionError("PathProblem: phi(t) lives on another space");
    space()->check(f, "PathProblem(f(t))");
    ConvexFunction psi = ConvexFunction::tilted(phi, f);
    if (transform_) {
      psi = transform_(psi);
      phi = psi;
      f = Vector::Zero(space()->dim());
    }
    phis_.push_back(phi);
    fs_.push_back(f);
    psis_.push_back(psi);
  }
}

PathProblem PathProblem::with_psi(const std::function<ConvexFunction(const ConvexFunction&)>& transform) const {
  PathProblem out = *this;
  if (out.transform_) {
    auto inner = out.transform_;
    out.transform_ = [inner, transform](const ConvexFunction& psi) { return transform(inner(psi)); };
  } else {
    out.transform_ = transform;
  }
  out.build();
  return out;
}

PathProblem PathProblem::with_steps(int steps) const {
  if (steps < 1) throw std::invalid_argument("PathProblem::with_steps: need at least one step");
  PathProblem out = *this;
  out.steps_ = steps;
  out.build();
  return out;
}

Vector DiscretePath::flatten() const {
  if (nodes.empty()) return {};
  const Eigen::Index n = nodes.front().size();
  Vector flat(n * static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t k = 0; k < nodes.size(); ++k) flat.segment(static_cast<Eigen::Index>(k) * n, n) = nodes[k];
  return flat;
}

DiscretePath DiscretePath::unflatten(const Vector& flat, int dim, double h) {
  if (dim <= 0 || flat.size() % dim != 0) throw DimensionError("DiscretePath::unflatten: size mismatch");
  DiscretePath p;
  p.h = h;
  for (Eigen::Index k = 0; k < flat.size() / dim; ++k) p.nodes.push_back(flat.segment(k * dim, dim));
  return p;
}

DiscretePath DiscretePath::constant(const Element& v, int steps, double h) {
  DiscretePath p;
  p.h = h;
  p.nodes.assign(static_cast<std::size_t>(steps) + 1, v);
  return p;
}

namespace {

void check_path(const PathProblem& pp, const DiscretePath& path) {
  if (path.steps() != pp.steps()) throw DimensionError("path has the wrong number of nodes");
  for (const auto& u : path.nodes) pp.space()->check(u, "path node");
}

struct StepTerms {
  Element lu, bu, s;
};

// s_k = -Lambda u_k - B u_k - (u_k - u_{k-1}) / h.
StepTerms step_terms(const PathProblem& pp, const DiscretePath& path, int k) {
  const auto& base = pp.base();
  const Element& u = path.nodes[k];
  StepTerms t;
  t.lu = base.lambda().is_zero() ? Element(Vector::Zero(u.size())) : base.lambda().apply(u);
  t.bu = base.b().apply(u);
  t.s = -t.lu - t.bu - (u - path.nodes[k - 1]) / pp.h();
  return t;
}

struct GapValue {
  double gap = 0.0;
  Element argmax;
  bool converged = true;
};

GapValue fenchel_gap_at(const ConvexFunction& psi, const Space& sp, const Element& x, const Element& s,
                        const Element* warm) {
  GapValue out;
  if (psi.kind() == ConvexFunction::Kind::quadratic) {
    out.gap = psi.fenchel_gap(x, s, &out.argmax);
    return out;
  }
  ConjugateResult c = psi.conjugate_eval(s, warm);
  out.argmax = c.argmax;
  out.converged = c.converged;
  out.gap = std::isfinite(c.value) ? psi.value_difference(x, c.argmax) - sp.inner(s, x - c.argmax) : kInfinity;
  return out;
}

}  // namespace

PathCertificate path_certificate(const PathProblem& pp, const DiscretePath& path, bool want_gradient) {
  check_path(pp, path);
  const Space& sp = *pp.space();
  const int steps = pp.steps();
  const double h = pp.h();
  PathCertificate out;
  out.step_gaps.assign(static_cast<std::size_t>(steps) + 1, 0.0);
  if (want_gradient) out.gradient.assign(static_cast<std::size_t>(steps) + 1, Vector::Zero(sp.dim()));
  const Element d0 = path.nodes[0] - pp.v0();
  out.boundary = sp.norm_squared(d0);
  out.value = out.boundary;
  if (want_gradient) out.gradient[0] += 2.0 * d0;
  const Element* warm = nullptr;
  Element last;
  for (int k = 1; k <= steps; ++k) {
    const Element& u = path.nodes[k];
    const auto t = step_terms(pp, path, k);
    const auto gv = fenchel_gap_at(pp.psi(k), sp, u, t.s, warm);
    out.converged = out.converged && gv.converged;
    out.step_gaps[k] = h * gv.gap;
    out.value += h * gv.gap;
    if (gv.argmax.allFinite()) {
      last = gv.argmax;
      warm = &last;
    }
    if (want_gradient) {
      const Element diff = u - gv.argmax;
      Element g = h * (pp.psi(k).gradient(u) - t.s) + h * pp.base().b().adjoint_apply(diff) + diff;
      if (!pp.base().lambda().is_zero()) g += h * pp.base().lambda().vjp(u, diff);
      out.gradient[k] += g;
      out.gradient[k - 1] -= diff;
    }
  }
  return out;
}

double path_functional(const PathProblem& pp, const DiscretePath& path) {
  check_path(pp, path);
  const Space& sp = *pp.space();
  const auto ell = BoundaryLagrangian::initial_value(pp.space(), pp.v0());
  double value = ell.eval(path.nodes.front(), path.nodes.back());
  for (int k = 1; k <= pp.steps(); ++k) {
    const auto t = step_terms(pp, path, k);
    const auto gv = fenchel_gap_at(pp.psi(k), sp, path.nodes[k], t.s, nullptr);
    value += pp.h() * (gv.gap + sp.inner(t.s, path.nodes[k]));
  }
  return value;
}

double energy_identity_defect(const PathProblem& pp, const DiscretePath& path) {
  check_path(pp, path);
  const Space& sp = *pp.space();
  const double v2 = sp.norm_squared(pp.v0());
  const double norm = std::max(1.0, v2);
  double acc = 0.0;
  double worst = std::abs(sp.norm_squared(path.nodes[0]) - v2) / norm;
  for (int k = 1; k <= pp.steps(); ++k) {
    const auto t = step_terms(pp, path, k);
    const auto gv = fenchel_gap_at(pp.psi(k), sp, path.nodes[k], t.s, nullptr);
    acc += 2.0 * pp.h() * (gv.gap + sp.inner(t.s, path.nodes[k]));
    worst = std::max(worst, std::abs(sp.norm_squared(path.nodes[k]) - v2 + acc) / norm);
  }
  return worst;
}

double path_inclusion_residual(const PathProblem& pp, const DiscretePath& path) {
  check_path(pp, path);
  const Space& sp = *pp.space();
  double worst = sp.norm(path.nodes[0] - pp.v0()) / (1.0 + sp.norm(pp.v0()));
  for (int k = 1; k <= pp.steps(); ++k) {
    const Element& u = path.nodes[k];
    const auto t = step_terms(pp, path, k);
    const Element z = pp.phi(k).prox(1.0, u + t.s - pp.f(k));
    worst = std::max(worst, sp.norm(u - z) / (1.0 + sp.norm(u)));
  }
  return worst;
}

namespace {

// Inverse of the Hessian of the path certificate for psi quadratic with
// Hessian E and B = Lambda = 0, which is block tridiagonal in time.
class PathPreconditioner {
 public:
  PathPreconditioner(Matrix e, const Matrix& g, double h, int steps) : n_(g.rows()), steps_(steps) {
    const double shift = 1e-8 * std::max(1e-300, e.diagonal().cwiseAbs().maxCoeff());
    e += shift * g;
    const bool diag = e.isDiagonal(0.0) && g.isDiagonal(0.0);
    if (diag) {
      const Vector ed = e.diagonal(), gd = g.diagonal();
      const Vector a = gd.cwiseProduct(gd).cwiseQuotient(ed);
      off_d_ = -(gd + a / h);
      pivots_.resize(steps + 1);
      for (int k = 0; k <= steps; ++k) {
        Vector d = 2.0 * gd;
        if (k > 0) d += h * ed + a / h;
        if (k < steps) d += a / h;
        if (k > 0) d -= off_d_.cwiseProduct(off_d_).cwiseQuotient(pivots_[k - 1]);
        pivots_[k] = d;
      }
      diagonal_ = true;
      return;
    }
    Eigen::LDLT<Matrix> el(e);
    const Matrix a = g * el.solve(g);
    off_ = -(g + a / h);
    blocks_.reserve(steps + 1);
    Matrix prev_inv_off;
    for (int k = 0; k <= steps; ++k) {
      Matrix d = 2.0 * g;
      if (k > 0) d += h * e + a / h;
      if (k < steps) d += a / h;
      if (k > 0) d -= off_ * prev_inv_off;
      d = 0.5 * (d + d.transpose());
      blocks_.emplace_back(d);
      prev_inv_off = blocks_.back().solve(off_);
    }
  }

  Vector apply(const Vector& r) const {
    const Eigen::Index n = n_;
    Vector y = r;
    auto seg = [&](Vector& v, int k) { return v.segment(static_cast<Eigen::Index>(k) * n, n); };
    if (diagonal_) {
      for (int k = 1; k <= steps_; ++k)
        seg(y, k) -= off_d_.cwiseProduct(seg(y, k - 1).cwiseQuotient(pivots_[k - 1]));
      seg(y, steps_) = seg(y, steps_).cwiseQuotient(pivots_[steps_]);
      for (int k = steps_ - 1; k >= 0; --k)
        seg(y, k) = (seg(y, k) - off_d_.cwiseProduct(seg(y, k + 1))).cwiseQuotient(pivots_[k]);
      return y;
    }
    for (int k = 1; k <= steps_; ++k) {
      const Vector prev = blocks_[k - 1].solve(Vector(seg(y, k - 1)));
      seg(y, k) -= off_ * prev;
    }
    seg(y, steps_) = blocks_[steps_].solve(Vector(seg(y, steps_)));
    for (int k = steps_ - 1; k >= 0; --k) {
      const Vector rhs = seg(y, k) - off_ * seg(y, k + 1);
      seg(y, k) = blocks_[k].solve(rhs);
    }
    return y;
  }

 private:
  Eigen::Index n_;
  int steps_;
  bool diagonal_ = false;
  Vector off_d_;
  std::vector<Vector> pivots_;
  Matrix off_;
  std::vector<Eigen::LDLT<Matrix>> blocks_;
};

std::function<Vector(const Vector&)> make_path_preconditioner(const PathProblem& pp) {
  const Space& sp = *pp.space();
  auto e = pp.psi(1).hessian(pp.v0());
  if (e && e->allFinite()) {
    auto pre = std::make_shared<PathPreconditioner>(*e, sp.gram(), pp.h(), pp.steps());
    return [pre](const Vector& g) { return pre->apply(g); };
  }
  auto spc = pp.space();
  const int n = sp.dim();
  return [spc, n](const Vector& g) {
    Vector out(g.size());
    for (Eigen::Index k = 0; k < g.size() / n; ++k) out.segment(k * n, n) = spc->raise(Vector(g.segment(k * n, n)));
    return out;
  };
}

double path_scale(const PathProblem& pp) {
  const Space& sp = *pp.space();
  double s = 1.0 + sp.norm_squared(pp.v0());
  double acc = 0.0;
  for (int k = 1; k <= pp.steps(); ++k) acc += pp.h() * pp.psi(k).eval(pp.v0());
  if (std::isfinite(acc)) s += std::abs(acc);
  return s;
}

void finish_path_report(const PathProblem& pp, PathReport& rep, const PathSolveOptions& opts) {
  const auto pc = path_certificate(pp, rep.path, false);
  rep.certificate = pc.value;
  rep.step_gaps = pc.step_gaps;
  rep.boundary_term = pc.boundary;
  rep.energy_defect = energy_identity_defect(pp, rep.path);
  rep.inclusion_residual = path_inclusion_residual(pp, rep.path);
  if (rep.status == SolveStatus::converged && !(rep.certificate <= opts.certificate_tol * rep.scale)) {
    rep.status = SolveStatus::failed;
    rep.message += (rep.message.empty() ? "" : "; ") + std::string("path certificate above acceptance threshold");
  }
  rep.warnings = pp.base().warnings();
  if (!pc.converged) rep.warnings.push_back("an inner conjugate maximization did not converge");
}

}  // namespace

PathReport solve_path_minimize(const PathProblem& pp, const PathSolveOptions& opts) {
  const Space& sp = *pp.space();
  const int n = sp.dim();
  PathReport rep;
  rep.scale = path_scale(pp);
  DiscretePath init = opts.initial ? *opts.initial : DiscretePath::constant(pp.v0(), pp.steps(), pp.h());
  init.h = pp.h();
  check_path(pp, init);
  Objective obj = [&](const Vector& flat, Vector* g) {
    const auto path = DiscretePath::unflatten(flat, n, pp.h());
    const auto pc = path_certificate(pp, path, g != nullptr);
    if (g) {
      g->resize(flat.size());
      for (int k = 0; k <= pp.steps(); ++k) g->segment(static_cast<Eigen::Index>(k) * n, n) = sp.lower(pc.gradient[k]);
    }
    return pc.value;
  };
  MinimizeOptions mo;
  mo.max_iter = opts.max_iter;
  mo.gtol = opts.gtol * rep.scale;
  mo.memory = opts.memory;
  mo.precondition = make_path_preconditioner(pp);
  MinimizeResult r;
  try {
    r = lbfgs_minimize(obj, init.flatten(), mo);
  } catch (const std::exception& e) {
    rep.path = init;
    rep.status = SolveStatus::failed;
    rep.message = std::string("path minimization aborted: ") + e.what();
    finish_path_report(pp, rep, opts);
    return rep;
  }
  rep.path = DiscretePath::unflatten(r.x, n, pp.h());
  rep.iterations = r.iterations;
  for (auto [v, gn] : r.history) rep.history.push_back({v, gn});
  switch (r.status) {
    case MinimizeStatus::converged: rep.status = SolveStatus::converged; break;
    case MinimizeStatus::max_iter: rep.status = SolveStatus::max_iter; break;
    case MinimizeStatus::line_search_failed:
      if (std::isfinite(r.value) && r.value <= 1e-12 * rep.scale) {
        rep.status = SolveStatus::converged;
        rep.message = "stopped at the rounding floor of the certificate";
      } else {
        rep.status = SolveStatus::failed;
        rep.message = "line search failed";
      }
      break;
    case MinimizeStatus::non_finite:
      rep.status = SolveStatus::failed;
      rep.message = "non-finite path certificate";
      break;
  }
  finish_path_report(pp, rep, opts);
  return rep;
}

PathReport solve_marching_prox(const PathProblem& pp, const PathSolveOptions& opts) {
  const Space& sp = *pp.space();
  const double h = pp.h();
  PathReport rep;
  rep.scale = path_scale(pp);
  rep.path.h = h;
  rep.path.nodes.push_back(pp.v0());
  rep.status = SolveStatus::converged;
  const auto inertia = ConvexFunction::quadratic_form(pp.space(), sp.gram() / h);
  const auto& base = pp.base();
  for (int k = 1; k <= pp.steps(); ++k) {
    const Element& prev = rep.path.nodes.back();
    SolveOptions so = opts.step;
    so.initial = prev;
    std::string failure;
    SolveReport sr;
    try {
      StationaryProblem step(pp.space(), ConvexFunction::sum({pp.phi(k), inertia}), base.b(), base.lambda(),
                             Element(pp.f(k) - prev / h), std::nullopt, std::nullopt, kInfinity);
      sr = solve_minimize(step, so);
      if (sr.status != SolveStatus::converged) failure = std::string(to_string(sr.status)) + " " + sr.message;
    } catch (const std::exception& e) {
      failure = e.what();
    }
    rep.iterations += sr.iterations;
    if (!failure.empty()) {
      std::ostringstream os;
      os << "step " << k << " failed: " << failure;
      rep.status = SolveStatus::failed;
      rep.message = os.str();
      while (static_cast<int>(rep.path.nodes.size()) <= pp.steps()) rep.path.nodes.push_back(rep.path.nodes.back());
      break;
    }
    rep.path.nodes.push_back(sr.x);
    rep.history.push_back({sr.certificate, sr.inclusion_residual});
  }
  finish_path_report(pp, rep, opts);
  return rep;
}

PathReport lambda_flow(const PathProblem& pp, const std::vector<double>& schedule, const PathSolveOptions& opts,
                       RegularizationPreset preset) {
  if (schedule.empty()) throw std::invalid_argument("lambda_flow: empty schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] > 0)) throw std::invalid_argument("lambda_flow: schedule entries must be positive");
    if (i > 0 && !(schedule[i] < schedule[i - 1])) throw std::invalid_argument("lambda_flow: schedule must decrease");
  }
  const Space& sp = *pp.space();
  const Element g0 = pp.psi(0).subgradient(pp.v0()).value;
  if (!g0.allFinite()) throw std::invalid_argument("lambda_flow: v0 is not in the domain of the subdifferential");
  PathReport out;
  std::optional<DiscretePath> warm = opts.initial;
  double first_velocity = 0.0;
  for (double lambda : schedule) {
    const double alpha = preset == RegularizationPreset::proximal ? lambda : 1.0 / (lambda * lambda);
    const PathProblem reg = pp.with_psi([alpha](const ConvexFunction& psi) {
      return ConvexFunction::moreau_envelope(psi, alpha);
    });
    PathSolveOptions o = opts;
    o.initial = warm;
    PathReport r = solve_path_minimize(reg, o);
    double vmax = 0.0;
    for (int k = 1; k <= pp.steps(); ++k)
      vmax = std::max(vmax, sp.norm(r.path.nodes[k] - r.path.nodes[k - 1]) / pp.h());
    if (first_velocity == 0.0) first_velocity = vmax;
    out.lambdas.push_back(lambda);
    out.certificates.push_back(r.certificate);
    out.unregularized_certificates.push_back(path_certificate(pp, r.path).value);
    out.velocity_bounds.push_back(vmax);
    warm = r.path;
    const auto lambdas = std::move(out.lambdas);
    const auto certs = std::move(out.certificates);
    const auto unreg = std::move(out.unregularized_certificates);
    const auto vel = std::move(out.velocity_bounds);
    out = std::move(r);
    out.lambdas = lambdas;
    out.certificates = certs;
    out.unregularized_certificates = unreg;
    out.velocity_bounds = vel;
  }
  for (std::size_t i = 1; i < out.unregularized_certificates.size(); ++i) {
    if (!(out.unregularized_certificates[i] < out.unregularized_certificates[i - 1])) {
      out.warnings.push_back("certificates did not decrease along the regularization schedule");
      break;
    }
  }
  if (first_velocity > 0 && !out.velocity_bounds.empty()) {
    std::ostringstream os;
    os << "velocity ratio " << out.velocity_bounds.back() / first_velocity;
    out.message += (out.message.empty() ? "" : "; ") + os.str();
  }
  return out;
}

void write_path_csv(std::ostream& out, const DiscretePath& path, const std::vector<double>& gaps) {
  if (path.nodes.empty()) return;
  const Eigen::Index n = path.nodes.front().size();
  out << "t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",u" << i;
  out << ",gap\n";
  const auto old = out.precision(17);
  for (std::size_t k = 0; k < path.nodes.size(); ++k) {
    out << static_cast<double>(k) * path.h;
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << path.nodes[k](i);
    out << ',' << (k < gaps.size() ? gaps[k] : 0.0) << '\n';
  }
  out.precision(old);
}

SbpTimeDerivative sbp_time_derivative(const SpacePtr& node_space, int steps, double horizon) {
  if (steps < 1 || !(horizon > 0)) throw std::invalid_argument("sbp_time_derivative: bad grid");
  const int n = node_space->dim();
  const int m = steps + 1;
  const double h = horizon / steps;
  Vector w = Vector::Constant(m, h);
  w(0) = w(m - 1) = 0.5 * h;
  Matrix q = Matrix::Zero(m, m);
  q(0, 0) = -0.5;
  q(m - 1, m - 1) = 0.5;
  for (int k = 0; k + 1 < m; ++k) {
    q(k, k + 1) = 0.5;
    q(k + 1, k) = -0.5;
  }
  const Matrix dt = w.cwiseInverse().asDiagonal() * q;
  Matrix gram = Matrix::Zero(m * n, m * n);
  Matrix d = Matrix::Zero(m * n, m * n);
  for (int a = 0; a < m; ++a) {
    gram.block(a * n, a * n, n, n) = w(a) * node_space->gram();
    for (int b = 0; b < m; ++b)
      if (dt(a, b) != 0.0) d.block(a * n, b * n, n, n) = dt(a, b) * Matrix::Identity(n, n);
  }
  auto ps = make_space(gram);
  Matrix t0 = Matrix::Zero(n, m * n), t1 = Matrix::Zero(n, m * n);
  t0.leftCols(n).setIdentity();
  t1.rightCols(n).setIdentity();
  return {ps, LinearMap::dense(ps, d),
          BoundaryPair(LinearMap::dense(ps, node_space, t0), LinearMap::dense(ps, node_space, t1)), w};
}

ConvexFunction lift_quadratic_to_path(const ConvexFunction& psi, const SbpTimeDerivative& sbp) {
  if (psi.kind() != ConvexFunction::Kind::quadratic && psi.kind() != ConvexFunction::Kind::zero)
    throw std::invalid_argument("lift_quadratic_to_path: psi must be quadratic");
  const Space& sp = *psi.space();
  const int n = sp.dim();
  const Vector zero = Vector::Zero(n);
  const Matrix e = psi.hessian(zero).value_or(Matrix::Zero(n, n));
  const Vector beta = sp.lower(psi.gradient(zero));
  const double c = psi.eval(zero);
  const Eigen::Index m = sbp.weights.size();
  Matrix ep = Matrix::Zero(m * n, m * n);
  Vector bp(m * n);
  for (Eigen::Index k = 0; k < m; ++k) {
    ep.block(k * n, k * n, n, n) = sbp.weights(k) * e;
    bp.segment(k * n, n) = sbp.weights(k) * beta;
  }
  return ConvexFunction::quadratic_form(sbp.path_space, ep, bp, c * sbp.weights.sum());
}

double path_functional_sbp(const PathProblem& pp, const DiscretePath& path) {
  check_path(pp, path);
  const Space& sp = *pp.space();
  const auto sbp = sbp_time_derivative(pp.space(), pp.steps(), pp.horizon());
  const int n = sp.dim();
  const Vector du = sbp.derivative.apply(path.flatten());
  const auto ell = BoundaryLagrangian::initial_value(pp.space(), pp.v0());
  double value = ell.eval(path.nodes.front(), path.nodes.back());
  const auto& base = pp.base();
  for (int k = 0; k <= pp.steps(); ++k) {
    const Element& u = path.nodes[k];
    Element q = base.b().apply(u) + du.segment(static_cast<Eigen::Index>(k) * n, n);
    if (!base.lambda().is_zero()) q += base.lambda().apply(u);
    const auto gv = fenchel_gap_at(pp.psi(k), sp, u, -q, nullptr);
    value += sbp.weights(k) * (gv.gap - sp.inner(q, u));
  }
  return value;
}

}  // namespace asdvar
