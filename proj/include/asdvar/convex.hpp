#pragma once

// Closed convex functionals on a Space with Legendre-Fenchel conjugates,
// proximal maps and subgradients.  All dual quantities use the Gram pairing:
// phi*(p) = sup_x <p,x> - phi(x), and gradients are Gram-gradients
// (the element g with D phi(x)[d] = <g,d>).

#include "asdvar/hilbert.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace asdvar {

class ConjugateFailure : public std::runtime_error {
 public:
  ConjugateFailure(const std::string& what, double gap) : std::runtime_error(what), gap_(gap) {}
  double gap() const { return gap_; }

 private:
  double gap_;
};

class ProxFailure : public std::runtime_error {
 public:
  ProxFailure(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct ConjugateResult {
  double value = 0.0;
  /// Maximizer of <p,x> - phi(x); equals the gradient of phi* at p.
  Element argmax;
  /// Optimality estimate of the inner maximization (0 for closed forms).
  double gap = 0.0;
  bool converged = true;
  bool exact = true;
};

struct SubgradientResult {
  Element value;
  /// True when the returned element is a prox-based approximation at a kink.
  bool approximate = false;
};

constexpr double kInfinity = std::numeric_limits<double>::infinity();

namespace detail {
struct ConvexNode;
}

class ConvexFunction {
 public:
  enum class Kind {
    zero,
    quadratic,
    power_norm,
    separable_power,
    sum,
    tilted,
    linear_precompose,
    moreau_envelope,
    numeric
  };

  using ValueFn = std::function<double(const Element&)>;
  using GradFn = std::function<Element(const Element&)>;

  static ConvexFunction zero(SpacePtr space);
  /// 1/2 <x, Q x> + <b, x> + c with Q self-adjoint and positive semidefinite
  /// in the Gram pairing.
  static ConvexFunction quadratic(SpacePtr space, const Matrix& q_operator, const Element& b, double c = 0.0);
  static ConvexFunction quadratic(SpacePtr space, const Matrix& q_operator);
  /// 1/2 x^T E x + beta^T x + c in raw coordinates (E symmetric PSD).
  static ConvexFunction quadratic_form(SpacePtr space, const Matrix& e, const Vector& beta, double c = 0.0);
  static ConvexFunction quadratic_form(SpacePtr space, const Matrix& e);
  /// 1/2 |x|^2.
  static ConvexFunction half_norm_squared(SpacePtr space);
  /// weight * |x|^m / m with |.| the Gram norm, m > 1.
  static ConvexFunction power_norm(SpacePtr space, double m, double weight = 1.0);
  /// sum_i w_i |x_i|^m / m, m > 1, w_i >= 0 (quadrature weights).
  static ConvexFunction separable_power(SpacePtr space, double m, Vector weights);
  static ConvexFunction sum(const std::vector<ConvexFunction>& terms);
  /// phi(x) + <f, x>.
  static ConvexFunction tilted(const ConvexFunction& phi, const Element& f);
  /// inner(A x + shift); A maps this space into inner's space.
  static ConvexFunction linear_precompose(const ConvexFunction& inner, const LinearMap& a, const Element& shift);
  /// inf_z phi(z) + |x - z|^2 / (2 alpha).
  static ConvexFunction moreau_envelope(const ConvexFunction& phi, double alpha);
  /// User-supplied convex function; the box bounds multi-start searches.
  static ConvexFunction numeric(SpacePtr space, ValueFn value, std::optional<GradFn> gradient, Vector box_lo,
                                Vector box_hi);

  const SpacePtr& space() const;
  Kind kind() const;
  std::string describe() const;

  double eval(const Element& x) const;
  double operator()(const Element& x) const { return eval(x); }
  /// phi(x) - phi(y), evaluated without cancellation where the kind allows.
  double value_difference(const Element& x, const Element& y) const;

  bool differentiable() const;
  Element gradient(const Element& x) const;
  SubgradientResult subgradient(const Element& x) const;
  /// Euclidean Hessian in raw coordinates, when the kind provides one.
  std::optional<Matrix> hessian(const Element& x) const;

  /// phi*(p) with maximizer; warm is an optional starting point for inner solves.
  ConjugateResult conjugate_eval(const Element& p, const Element* warm = nullptr) const;
  /// phi*(p); throws ConjugateFailure if an inner maximization did not converge.
  double conjugate(const Element& p) const;

  /// argmin_z phi(z) + |x - z|^2 / (2 lambda).  Throws ProxFailure.
  Element prox(double lambda, const Element& x) const;

  /// phi(x) + phi*(p) - <p, x> >= 0, evaluated in a cancellation-free form
  /// where possible.  The conjugate maximizer is written to argmax if given.
  double fenchel_gap(const Element& x, const Element& p, Element* argmax = nullptr,
                     const Element* warm = nullptr) const;

  const std::shared_ptr<const detail::ConvexNode>& node() const { return node_; }
  explicit ConvexFunction(std::shared_ptr<const detail::ConvexNode> node);

 private:
  std::shared_ptr<const detail::ConvexNode> node_;
};

/// Max over sampled triples of the convexity violation
/// phi(t x + (1-t) y) - t phi(x) - (1-t) phi(y), normalized by 1 + |values|.
double convexity_defect(const ConvexFunction& phi, int samples, std::uint64_t seed, double scale = 1.0);

}  // namespace asdvar
