#pragma once

// Evolution problems u' + B u + Lambda u + d phi(t, u) + f(t) ∋ 0, u(0) = v0,
// solved by minimizing a discretized self-dual path functional.  Time is
// discretized by backward differences with all other terms implicit.

#include "asdvar/lagrangian.hpp"
#include "asdvar/stationary.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace asdvar {

class PathProblem {
 public:
  using PhiFamily = std::function<ConvexFunction(double t)>;
  using ForceFamily = std::function<Element(double t)>;

  /// base supplies phi, B, Lambda and f (no boundary pair); N >= 1 steps over [0, T].
  PathProblem(StationaryProblem base, Element v0, double horizon, int steps);
  /// Time-dependent phi(t, .) and f(t); base.phi() and base.f() are then unused.
  PathProblem(StationaryProblem base, Element v0, double horizon, int steps, PhiFamily phi_at,
              ForceFamily f_at);

  const StationaryProblem& base() const { return base_; }
  const SpacePtr& space() const { return base_.space(); }
  const Element& v0() const { return v0_; }
  double horizon() const { return horizon_; }
  int steps() const { return steps_; }
  double h() const { return horizon_ / steps_; }
  double time(int k) const { return k * h(); }
  bool time_dependent() const { return static_cast<bool>(phi_at_) || static_cast<bool>(f_at_); }
  /// phi(t_k, .) + <f(t_k), .>.
  const ConvexFunction& psi(int k) const { return psis_[k]; }
  const ConvexFunction& phi(int k) const { return phis_[k]; }
  const Element& f(int k) const { return fs_[k]; }
  /// Same problem with psi(t_k, .) replaced by transform(psi(t_k, .)) and f = 0.
  PathProblem with_psi(const std::function<ConvexFunction(const ConvexFunction&)>& transform) const;
  /// Same problem with a different step count.
  PathProblem with_steps(int steps) const;

 private:
  void build();

  StationaryProblem base_;
  Element v0_;
  double horizon_;
  int steps_;
  PhiFamily phi_at_;
  ForceFamily f_at_;
  std::function<ConvexFunction(const ConvexFunction&)> transform_;
  std::vector<ConvexFunction> phis_;
  std::vector<Element> fs_;
  std::vector<ConvexFunction> psis_;
};

struct DiscretePath {
  std::vector<Element> nodes;
  double h = 1.0;

  int steps() const { return static_cast<int>(nodes.size()) - 1; }
  Vector flatten() const;
  static DiscretePath unflatten(const Vector& flat, int dim, double h);
  static DiscretePath constant(const Element& v, int steps, double h);
};

struct PathCertificate {
  double value = 0.0;
  /// h [psi(u_k) + psi*(s_k) - <s_k, u_k>] for k = 1..N (index 0 unused, set to 0).
  std::vector<double> step_gaps;
  /// |u_0 - v_0|^2, the excess of the initial-value boundary Lagrangian.
  double boundary = 0.0;
  /// Gram-gradients per node, when requested.
  std::vector<Element> gradient;
  bool converged = true;
};

struct PathReport {
  DiscretePath path;
  double certificate = 0.0;
  std::vector<double> step_gaps;
  double boundary_term = 0.0;
  double energy_defect = 0.0;
  /// Largest per-step inclusion residual (and initial mismatch).
  double inclusion_residual = 0.0;
  double scale = 1.0;
  SolveStatus status = SolveStatus::failed;
  int iterations = 0;
  std::vector<HistoryEntry> history;
  std::string message;
  std::vector<std::string> warnings;
  // Regularization schedule diagnostics.
  std::vector<double> lambdas;
  std::vector<double> certificates;
  std::vector<double> unregularized_certificates;
  std::vector<double> velocity_bounds;
};

/// Raw discretized functional sum_k h L(u_k, Lambda u_k + B u_k + (u_k - u_{k-1})/h) + l(u_0, u_N)
/// with l the initial-value boundary Lagrangian anchored at v0.
double path_functional(const PathProblem& pp, const DiscretePath& path);

/// sum_k step_gap_k + |u_0 - v_0|^2, which is the raw functional plus
/// 1/2 sum_k |u_k - u_{k-1}|^2; zero exactly on the implicit Euler path.
PathCertificate path_certificate(const PathProblem& pp, const DiscretePath& path, bool want_gradient = false);

struct PathSolveOptions {
  int max_iter = 20000;
  double gtol = 1e-11;
  double certificate_tol = 1e-6;
  int memory = 20;
  std::optional<DiscretePath> initial;
  /// Options for the per-step stationary solves of the marching scheme.
  SolveOptions step;
};

PathReport solve_path_minimize(const PathProblem& pp, const PathSolveOptions& opts = {});
PathReport solve_marching_prox(const PathProblem& pp, const PathSolveOptions& opts = {});

/// max_k | |u_k|^2 - |v0|^2 + 2 sum_{j<=k} h L(u_j, Lambda u_j + B u_j + u'_j) | / max(1, |v0|^2).
double energy_identity_defect(const PathProblem& pp, const DiscretePath& path);

/// Max per-step inclusion residual of a path, including |u_0 - v_0| / (1 + |v_0|).
double path_inclusion_residual(const PathProblem& pp, const DiscretePath& path);

/// Solves the path problem with psi replaced by its regularization at each
/// lambda of a decreasing schedule, warm-starting from the previous path.
PathReport lambda_flow(const PathProblem& pp, const std::vector<double>& schedule, const PathSolveOptions& opts = {},
                       RegularizationPreset preset = RegularizationPreset::proximal);

/// Per-node CSV: t, coordinates..., step gap.
void write_path_csv(std::ostream& out, const DiscretePath& path, const std::vector<double>& gaps);

/// Summation-by-parts time derivative on N+1 nodes of a node space, with
/// trapezoid weights in the path Gram matrix and endpoint traces b1 = u_0,
/// b2 = u_N, so that <u, D u> = 1/2(|u_N|^2 - |u_0|^2) exactly.
struct SbpTimeDerivative {
  SpacePtr path_space;
  LinearMap derivative;
  BoundaryPair traces;
  Vector weights;
};
SbpTimeDerivative sbp_time_derivative(const SpacePtr& node_space, int steps, double horizon);

/// sum_k w_k psi(u_k) on the path space for a quadratic psi (trapezoid weights).
ConvexFunction lift_quadratic_to_path(const ConvexFunction& psi, const SbpTimeDerivative& sbp);

/// sum_k w_k L(u_k, Lambda u_k + B u_k + (D u)_k) + l(u_0, u_N) with the SBP derivative.
double path_functional_sbp(const PathProblem& pp, const DiscretePath& path);

}  // namespace asdvar
