#include "asdvar/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace asdvar {

const char* to_string(MinimizeStatus s) {
  switch (s) {
    case MinimizeStatus::converged: return "converged";
    case MinimizeStatus::max_iter: return "max_iter";
    case MinimizeStatus::line_search_failed: return "line_search_failed";
    case MinimizeStatus::non_finite: return "non_finite";
  }
  return "unknown";
}

namespace {

struct Trial {
  double alpha = 0.0;
  double value = 0.0;
  double slope = 0.0;
  Vector x;
  Vector grad;
};

class LineSearch {
 public:
  LineSearch(const Objective& f, const Vector& x, const Vector& d, double f0, double slope0, int& evals)
      : f_(f), x_(x), d_(d), f0_(f0), slope0_(slope0), evals_(evals) {
    eps_f_ = 1e-12 * std::abs(f0) + 1e-300;
  }

  bool run(double alpha0, double alpha_max, Trial& out) {
    Trial prev{0.0, f0_, slope0_, x_, Vector()};
    Trial best = prev;
    double alpha = std::min(alpha0, alpha_max);
    for (int i = 0; i < 40; ++i) {
      Trial t = eval(alpha);
      if (!std::isfinite(t.value)) {
        alpha = prev.alpha + 0.25 * (alpha - prev.alpha);
        if (alpha - prev.alpha < 1e-20) break;
        continue;
      }
      if (t.value < best.value) best = t;
      if (approx_wolfe(t)) {
        out = std::move(t);
        return true;
      }
      if (!armijo(t) || (i > 0 && t.value >= prev.value)) return zoom(prev, t, best, out);
      if (std::abs(t.slope) <= -c2_ * slope0_) {
        out = std::move(t);
        return true;
      }
      if (t.slope >= 0) return zoom(t, prev, best, out);
      if (alpha >= alpha_max) break;
      prev = std::move(t);
      alpha = std::min(4.0 * alpha, alpha_max);
    }
    return fallback(best, out);
  }

 private:
  Trial eval(double alpha) {
    Trial t;
    t.alpha = alpha;
    t.x = x_ + alpha * d_;
    t.grad.resize(x_.size());
    t.value = f_(t.x, &t.grad);
    ++evals_;
    t.slope = t.grad.dot(d_);
    if (!std::isfinite(t.slope)) t.value = std::numeric_limits<double>::infinity();
    return t;
  }

  bool armijo(const Trial& t) const { return t.value <= f0_ + c1_ * t.alpha * slope0_; }

  bool approx_wolfe(const Trial& t) const {
    return t.value <= f0_ + eps_f_ && t.slope >= c2_ * slope0_ && t.slope <= (2 * c1_approx_ - 1) * slope0_ &&
           t.alpha > 0;
  }

  bool zoom(Trial lo, Trial hi, Trial& best, Trial& out) {
    for (int i = 0; i < 60; ++i) {
      const double a = lo.alpha, b = hi.alpha;
      const double width = std::abs(b - a);
      if (width <= 1e-16 * std::max(std::abs(a), std::abs(b))) break;
      double trial = cubic(lo, hi);
      const double l = std::min(a, b) + 0.1 * width, u = std::max(a, b) - 0.1 * width;
      if (!(trial > l && trial < u)) trial = 0.5 * (a + b);
      Trial t = eval(trial);
      if (!std::isfinite(t.value)) {
        hi = std::move(t);
        continue;
      }
      if (t.value < best.value) best = t;
      if (approx_wolfe(t)) {
        out = std::move(t);
        return true;
      }
      if (!armijo(t) || t.value >= lo.value) {
        hi = std::move(t);
      } else {
        if (std::abs(t.slope) <= -c2_ * slope0_) {
          out = std::move(t);
          return true;
        }
        if (t.slope * (hi.alpha - lo.alpha) >= 0) hi = lo;
        lo = std::move(t);
      }
    }
    return fallback(best, out);
  }

  static double cubic(const Trial& p, const Trial& q) {
    if (!std::isfinite(q.value) || !std::isfinite(p.value)) return 0.5 * (p.alpha + q.alpha);
    const double d1 = p.slope + q.slope - 3 * (p.value - q.value) / (p.alpha - q.alpha);
    const double disc = d1 * d1 - p.slope * q.slope;
    if (disc < 0) return 0.5 * (p.alpha + q.alpha);
    const double d2 = std::copysign(std::sqrt(disc), q.alpha - p.alpha);
    const double denom = q.slope - p.slope + 2 * d2;
    if (denom == 0) return 0.5 * (p.alpha + q.alpha);
    return q.alpha - (q.alpha - p.alpha) * (q.slope + d2 - d1) / denom;
  }

  bool fallback(const Trial& best, Trial& out) const {
    if (best.alpha > 0 && best.value < f0_) {
      out = best;
      return true;
    }
    return false;
  }

  const Objective& f_;
  const Vector& x_;
  const Vector& d_;
  double f0_, slope0_;
  int& evals_;
  double eps_f_;
  static constexpr double c1_ = 1e-4;
  static constexpr double c1_approx_ = 0.1;
  static constexpr double c2_ = 0.9;
};

}  // namespace

MinimizeResult lbfgs_minimize(const Objective& f, Vector x0, const MinimizeOptions& opts) {
  MinimizeResult r;
  const auto precond = [&](const Vector& g) -> Vector { return opts.precondition ? opts.precondition(g) : g; };
  r.x = std::move(x0);
  r.gradient.resize(r.x.size());
  r.value = f(r.x, &r.gradient);
  r.evaluations = 1;
  if (!std::isfinite(r.value) || !r.gradient.allFinite()) {
    r.status = MinimizeStatus::non_finite;
    return r;
  }
  Vector pg = precond(r.gradient);
  r.grad_norm = std::sqrt(std::max(0.0, r.gradient.dot(pg)));
  if (opts.record_history) r.history.emplace_back(r.value, r.grad_norm);

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  bool reset_once = false;

  for (r.iterations = 0; r.iterations < opts.max_iter; ++r.iterations) {
    if (r.grad_norm <= opts.gtol) {
      r.status = MinimizeStatus::converged;
      return r;
    }
    // Two-loop recursion.
    Vector q = r.gradient;
    const int m = static_cast<int>(s_hist.size());
    std::vector<double> a(m);
    for (int i = m - 1; i >= 0; --i) {
      a[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= a[i] * y_hist[i];
    }
    Vector d = precond(q);
    if (m > 0) {
      const Vector py = precond(y_hist.back());
      const double yy = y_hist.back().dot(py);
      if (yy > 0) d *= 1.0 / (rho_hist.back() * yy);
    }
    for (int i = 0; i < m; ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(d);
      d += (a[i] - b) * s_hist[i];
    }
    d = -d;
    double slope = r.gradient.dot(d);
    if (!(slope < 0) || !std::isfinite(slope)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -pg;
      slope = r.gradient.dot(d);
      if (!(slope < 0)) {
        r.status = MinimizeStatus::line_search_failed;
        return r;
      }
    }
    const double dnorm = std::sqrt(std::max(0.0, -slope));
    double alpha0 = 1.0;
    if (m == 0) alpha0 = std::min(1.0, 1.0 / std::max(dnorm, 1e-300));
    const double alpha_max = opts.max_step / std::max(dnorm, 1e-300);

    Trial t;
    LineSearch ls(f, r.x, d, r.value, slope, r.evaluations);
    if (!ls.run(alpha0, std::max(alpha_max, alpha0), t)) {
      if (!s_hist.empty() && !reset_once) {
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        reset_once = true;
        --r.iterations;
        continue;
      }
      r.status = MinimizeStatus::line_search_failed;
      return r;
    }
    reset_once = false;
    Vector s = t.x - r.x;
    Vector y = t.grad - r.gradient;
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm() && sy > 0) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    r.x = std::move(t.x);
    r.value = t.value;
    r.gradient = std::move(t.grad);
    pg = precond(r.gradient);
    r.grad_norm = std::sqrt(std::max(0.0, r.gradient.dot(pg)));
    if (opts.record_history) r.history.emplace_back(r.value, r.grad_norm);
  }
  r.status = r.grad_norm <= opts.gtol ? MinimizeStatus::converged : MinimizeStatus::max_iter;
  return r;
}

MinimizeResult newton_minimize(const SecondOrderObjective& f, Vector x0, const NewtonOptions& opts) {
  MinimizeResult r;
  const Eigen::Index n = x0.size();
  r.x = std::move(x0);
  Vector g(n);
  Matrix h(n, n);
  r.value = f(r.x, &g, &h);
  r.evaluations = 1;
  if (!std::isfinite(r.value) || !g.allFinite()) {
    r.status = MinimizeStatus::non_finite;
    r.gradient = g;
    return r;
  }
  r.history.emplace_back(r.value, g.norm());
  Eigen::LDLT<Matrix> ldlt;
  for (r.iterations = 0; r.iterations < opts.max_iter; ++r.iterations) {
    Vector d;
    double shift = 0.0;
    const double hscale = std::max(1e-300, h.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 20; ++attempt) {
      Matrix hs = h;
      if (shift > 0) hs.diagonal().array() += shift;
      ldlt.compute(hs);
      if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0).all()) {
        d = -ldlt.solve(g);
        if (d.allFinite() && g.dot(d) < 0) break;
      }
      d.resize(0);
      shift = shift == 0 ? 1e-12 * hscale : shift * 100;
    }
    if (d.size() == 0) d = -g;
    const double decrement2 = -g.dot(d);
    r.grad_norm = std::sqrt(std::max(0.0, decrement2));
    const bool small = r.grad_norm <= opts.gtol * std::sqrt(1.0 + std::abs(r.value)) || g.norm() == 0.0;

    // Backtracking on the value, with acceptance of gradient reduction at
    // the rounding floor.
    double alpha = 1.0;
    bool accepted = false;
    Vector xn, gn(n);
    Matrix hn(n, n);
    double fn = 0.0;
    for (int k = 0; k < 60; ++k) {
      xn = r.x + alpha * d;
      fn = f(xn, &gn, &hn);
      ++r.evaluations;
      if (std::isfinite(fn) && gn.allFinite()) {
        const bool armijo = fn <= r.value + 1e-4 * alpha * g.dot(d);
        const bool floor = fn <= r.value + 1e-13 * (1.0 + std::abs(r.value)) && gn.norm() < g.norm();
        if (armijo || floor) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (accepted) {
      r.x = std::move(xn);
      r.value = fn;
      g = gn;
      h = hn;
      r.history.emplace_back(r.value, g.norm());
    }
    if (small) {
      r.status = MinimizeStatus::converged;
      ++r.iterations;
      r.gradient = g;
      return r;
    }
    if (!accepted) {
      r.status = MinimizeStatus::line_search_failed;
      r.gradient = g;
      return r;
    }
  }
  r.gradient = g;
  r.status = MinimizeStatus::max_iter;
  return r;
}

double find_root(const std::function<std::pair<double, double>(double)>& fn, double lo, double hi, double xtol,
                 int max_iter) {
  auto [flo, dlo] = fn(lo);
  auto [fhi, dhi] = fn(hi);
  (void)dlo;
  (void)dhi;
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  if (flo > 0 || fhi < 0) throw std::invalid_argument("find_root: root not bracketed");
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < max_iter; ++i) {
    auto [fx, dx] = fn(x);
    if (fx == 0) return x;
    if (fx < 0)
      lo = x;
    else
      hi = x;
    double next = x - fx / dx;
    if (!(dx > 0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= xtol * std::max(1.0, std::abs(x)) || hi - lo <= xtol * std::max(1.0, std::abs(x)))
      return next;
    x = next;
  }
  return x;
}

}  // namespace asdvar
