#pragma once

// Lagrangians L(x, p) on X x X*, their Hamiltonians, self-dual boundary
// Lagrangians and the constructions that preserve anti-selfduality.

#include "asdvar/convex.hpp"
#include "asdvar/hilbert.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace asdvar {

/// ASD-preserving regularization presets: alpha = beta = lambda, or
/// alpha = beta = 1 / lambda^2.
enum class RegularizationPreset { proximal, scaled };

struct LagrangianValue {
  double value = 0.0;
  /// Gram-gradients in each slot (partial subgradients for nonsmooth parts).
  Element grad_x;
  Element grad_p;
  /// Optimality estimate of inner infima (0 when evaluated in closed form).
  double gap = 0.0;
  bool converged = true;
};

struct HamiltonianValue {
  double value = 0.0;
  bool exact = true;
  bool converged = true;
  /// Maximizing p for numerically evaluated suprema.
  Element argmax;
};

enum class HamiltonianMethod { automatic, numeric };

class InnerSolveFailure : public std::runtime_error {
 public:
  InnerSolveFailure(const std::string& what, double gap) : std::runtime_error(what), gap_(gap) {}
  double gap() const { return gap_; }

 private:
  double gap_;
};

class BoundaryDefectError : public std::invalid_argument {
 public:
  BoundaryDefectError(const std::string& what, double defect) : std::invalid_argument(what), defect_(defect) {}
  double defect() const { return defect_; }

 private:
  double defect_;
};

/// l(r, s) on H1 x H2.
class BoundaryLagrangian {
 public:
  enum class Kind { initial_value, custom };

  /// 1/2|r|^2 - 2<a,r> + |a|^2 + 1/2|s|^2 on H x H.
  static BoundaryLagrangian initial_value(SpacePtr space, Element a);
  /// psi1(r) + psi2(s).
  static BoundaryLagrangian custom(ConvexFunction psi1, ConvexFunction psi2);

  Kind kind() const { return kind_; }
  const SpacePtr& first_space() const { return h1_; }
  const SpacePtr& second_space() const { return h2_; }
  const Element& anchor() const { return a_; }

  double eval(const Element& r, const Element& s) const;
  double operator()(const Element& r, const Element& s) const { return eval(r, s); }
  /// Gram-gradients (d/dr, d/ds).
  std::pair<Element, Element> gradient(const Element& r, const Element& s) const;
  /// l(r,s) - 1/2(|s|^2 - |r|^2) >= 0; equals |r - a|^2 for the initial-value kind.
  double excess(const Element& r, const Element& s) const;
  /// l*(q1, q2) = sup <q1,r> + <q2,s> - l(r,s).
  double conjugate(const Element& q1, const Element& q2) const;

 private:
  BoundaryLagrangian() = default;
  Kind kind_ = Kind::initial_value;
  SpacePtr h1_, h2_;
  Element a_;
  std::optional<ConvexFunction> psi1_, psi2_;
};

/// max |l*(-h1, h2) - l(h1, h2)| over the sample pairs (h1, h2).
double selfdual_boundary_defect(const BoundaryLagrangian& ell, std::span<const ElementPair> samples);

namespace detail {
struct LagNode;
}

class Lagrangian {
 public:
  enum class Kind { basic, oplus, star, shift, lambda_reg, boundary_aug, custom };
  using CustomFn = std::function<LagrangianValue(const Element& x, const Element& p)>;

  /// psi(x) + psi*(-p).
  static Lagrangian basic(const ConvexFunction& psi);
  /// inf_r L(x, r) + M(x, p - r).
  static Lagrangian oplus(const Lagrangian& l, const Lagrangian& m);
  /// inf_z L(z, p) + M(x - z, p).
  static Lagrangian star(const Lagrangian& l, const Lagrangian& m);
  /// L(x, B x + p).
  static Lagrangian shift(const Lagrangian& l, const LinearMap& b);
  /// inf_z L(z, p) + |x - z|^2 / (2 alpha) + beta |p|^2 / 2.
  static Lagrangian lambda_regularize(const Lagrangian& l, double alpha, double beta);
  static Lagrangian lambda_regularize(const Lagrangian& l, double lambda, RegularizationPreset preset);
  /// L(x, B x + p) + l(b1 x, b2 x); refuses when the boundary identity of
  /// (B, b1, b2) is violated by more than tol.
  static Lagrangian augment_boundary(const Lagrangian& l, const LinearMap& b, const BoundaryPair& bp,
                                     const BoundaryLagrangian& ell, double tol = 1e-8);
  /// Arbitrary Lagrangian supplied as a value-and-gradient callback.
  static Lagrangian custom(SpacePtr space, CustomFn fn, std::string name = "custom");

  const SpacePtr& space() const;
  Kind kind() const;
  std::string describe() const;

  LagrangianValue evaluate(const Element& x, const Element& p) const;
  double operator()(const Element& x, const Element& p) const { return evaluate(x, p).value; }

  /// Minimizer J(x, p) of the inner problem of a regularized Lagrangian.
  Element prox_point(const Element& x, const Element& p) const;

  /// sup_p <p, y> - L(x, p).
  HamiltonianValue hamiltonian(const Element& x, const Element& y,
                               HamiltonianMethod method = HamiltonianMethod::automatic) const;

  const std::shared_ptr<const detail::LagNode>& node() const { return node_; }
  explicit Lagrangian(std::shared_ptr<const detail::LagNode> node);

 private:
  std::shared_ptr<const detail::LagNode> node_;
};

double hamiltonian_eval(const Lagrangian& l, const Element& x, const Element& y);

struct AsdDefectOptions {
  double box_lo = -3.0;
  double box_hi = 3.0;
  /// Grid resolution: grid_n^2 points in total for a one-dimensional space,
  /// spread evenly over the 2*dim axes otherwise.
  int grid_n = 400;
  bool refine = true;
};

struct AsdDefectResult {
  double defect = 0.0;
  /// True when a supremum sits on the box boundary (box likely too small).
  bool boundary_hit = false;
  int points_per_axis = 0;
  std::vector<double> per_sample;
};

/// max over samples (x, p) of |L*(p, x) - L(-x, -p)| with L* from a grid
/// search over a box followed by local quasi-Newton refinement.
AsdDefectResult asd_defect(const Lagrangian& l, std::span<const ElementPair> samples,
                           const AsdDefectOptions& opts = {});

/// Partial conjugate L*(q, y) = sup_{x,p} <q,x> + <y,p> - L(x,p) by local
/// quasi-Newton search from the given start.
double lagrangian_conjugate_local(const Lagrangian& l, const Element& q, const Element& y, const Element& x0,
                                  const Element& p0, bool* converged = nullptr);

}  // namespace asdvar
