#pragma once

// Smooth unconstrained minimization in Euclidean coordinates: limited-memory
// BFGS with a Wolfe line search, damped Newton for problems that expose a
// Hessian, and a safeguarded scalar root finder.

#include "asdvar/hilbert.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace asdvar {

/// Returns f(x); writes the Euclidean gradient when grad is non-null.
using Objective = std::function<double(const Vector& x, Vector* grad)>;
/// Returns f(x); writes gradient and Hessian when the pointers are non-null.
using SecondOrderObjective = std::function<double(const Vector& x, Vector* grad, Matrix* hess)>;

enum class MinimizeStatus { converged, max_iter, line_search_failed, non_finite };

const char* to_string(MinimizeStatus s);

struct MinimizeOptions {
  int max_iter = 1000;
  /// Stop when sqrt(g^T P g) <= gtol (P the preconditioner, identity if unset).
  double gtol = 1e-10;
  int memory = 12;
  /// Approximate inverse Hessian applied to a gradient.
  std::function<Vector(const Vector&)> precondition;
  /// Largest admissible step length in the preconditioned metric.
  double max_step = 1e10;
  bool record_history = true;
};

struct MinimizeResult {
  Vector x;
  double value = 0.0;
  Vector gradient;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  MinimizeStatus status = MinimizeStatus::max_iter;
  /// (value, gradient norm) per accepted iterate, starting with x0.
  std::vector<std::pair<double, double>> history;

  bool converged() const { return status == MinimizeStatus::converged; }
};

MinimizeResult lbfgs_minimize(const Objective& f, Vector x0, const MinimizeOptions& opts = {});

struct NewtonOptions {
  int max_iter = 100;
  /// Stop when the Newton decrement sqrt(g^T H^{-1} g) or |g| falls below gtol.
  double gtol = 1e-13;
};

/// Damped Newton for smooth convex objectives with a semidefinite Hessian.
MinimizeResult newton_minimize(const SecondOrderObjective& f, Vector x0, const NewtonOptions& opts = {});

/// Root of a monotone increasing scalar function on [lo, hi] with f(lo) <= 0 <= f(hi).
/// fn returns (value, derivative).
double find_root(const std::function<std::pair<double, double>(double)>& fn, double lo, double hi,
                 double xtol = 1e-15, int max_iter = 200);

}  // namespace asdvar
