#pragma once

// Finite-dimensional Hilbert spaces and the operator abstractions the rest
// of the library is written against.
//
// A Space carries a symmetric positive-definite Gram matrix G; every duality
// pairing is <x, y> = x^T G y.  Primal and dual elements share coordinates
// (the dual of a space is identified with the space through G), so an
// "Element" is just a coordinate vector whose meaning is fixed by the Space
// it is checked against.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace asdvar {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Element = Eigen::VectorXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Space {
 public:
  /// Euclidean space of the given dimension (identity Gram).
  explicit Space(int dim);
  /// Throws std::invalid_argument unless gram is symmetric (1e-12 relative)
  /// and admits a Cholesky factorization.
  explicit Space(Matrix gram);

  int dim() const { return dim_; }
  const Matrix& gram() const { return gram_; }
  bool is_identity() const { return identity_; }
  bool is_diagonal() const { return diagonal_; }

  double inner(const Element& x, const Element& y) const;
  double norm_squared(const Element& x) const { return inner(x, x); }
  double norm(const Element& x) const;

  /// G x: the Euclidean covector representing the functional <x, .>.
  Vector lower(const Element& x) const;
  /// G^{-1} g: the element representing a Euclidean covector g.
  Element raise(const Vector& g) const;
  /// G^{-1} M for a matrix of covector columns.
  Matrix raise(const Matrix& m) const;

  void check(const Element& x, const char* what = "element") const;

 private:
  int dim_;
  Matrix gram_;
  Eigen::LLT<Matrix> chol_;
  bool identity_ = false;
  bool diagonal_ = false;
};

using SpacePtr = std::shared_ptr<const Space>;

SpacePtr make_space(int dim);
SpacePtr make_space(Matrix gram);
/// Cartesian product with block-diagonal Gram.
SpacePtr product_space(const SpacePtr& a, const SpacePtr& b);

/// Linear map between two spaces.  The adjoint is taken with respect to the
/// Gram pairings of domain and codomain: <y, A x>_cod = <A* y, x>_dom.
class LinearMap {
 public:
  using Apply = std::function<Element(const Element&)>;

  LinearMap(SpacePtr domain, SpacePtr codomain, Apply apply, Apply adjoint);

  static LinearMap dense(SpacePtr domain, SpacePtr codomain, Matrix m);
  static LinearMap dense(const SpacePtr& space, Matrix m);
  static LinearMap zero(SpacePtr domain, SpacePtr codomain);
  static LinearMap zero(const SpacePtr& space);
  static LinearMap identity(const SpacePtr& space);

  const SpacePtr& domain() const { return domain_; }
  const SpacePtr& codomain() const { return codomain_; }

  Element apply(const Element& x) const;
  Element operator()(const Element& x) const { return apply(x); }
  Element adjoint_apply(const Element& y) const;

  /// Coordinate matrix, when the map was built from one.
  const std::optional<Matrix>& matrix() const { return matrix_; }
  /// Coordinate matrix, assembled column by column if necessary.
  Matrix to_dense() const;

  LinearMap adjoint() const;
  LinearMap scaled(double s) const;
  LinearMap operator+(const LinearMap& other) const;
  LinearMap operator-(const LinearMap& other) const;

 private:
  SpacePtr domain_;
  SpacePtr codomain_;
  Apply apply_;
  Apply adjoint_;
  std::optional<Matrix> matrix_;
};

/// Boundary operators (b1, b2) into two auxiliary Hilbert spaces.
struct BoundaryPair {
  LinearMap b1;
  LinearMap b2;

  BoundaryPair(LinearMap first, LinearMap second);
  const SpacePtr& domain() const { return b1.domain(); }
  /// Zero maps into one-dimensional boundary spaces.
  static BoundaryPair none(const SpacePtr& space);
};

/// A = A_anti + A_sym with A_anti* = -A_anti and A_sym* = A_sym in the Gram
/// pairing.
struct OperatorSplit {
  LinearMap antisymmetric;
  LinearMap symmetric;
};
OperatorSplit split_operator(const LinearMap& a);

enum class VjpMode { analytic, finite_difference };

/// Nonlinear map with <Lambda x, x> = 0.  The vector-Jacobian product is
/// (D Lambda(x))* w, adjoint in the Gram pairing.
class ConservativeMap {
 public:
  using Apply = std::function<Element(const Element&)>;
  using Vjp = std::function<Element(const Element& x, const Element& w)>;

  ConservativeMap(SpacePtr space, Apply apply, std::optional<Vjp> vjp = std::nullopt);

  static ConservativeMap zero(const SpacePtr& space);
  /// A linear skew map viewed as a conservative map.
  static ConservativeMap linear(const LinearMap& k);

  const SpacePtr& space() const { return space_; }
  VjpMode vjp_mode() const { return vjp_ ? VjpMode::analytic : VjpMode::finite_difference; }
  bool is_zero() const { return zero_; }

  Element apply(const Element& x) const;
  Element operator()(const Element& x) const { return apply(x); }
  /// Analytic when supplied, otherwise 4th-order central differences with
  /// step 1e-5 * (1 + |x|).
  Element vjp(const Element& x, const Element& w) const;

 private:
  SpacePtr space_;
  Apply apply_;
  std::optional<Vjp> vjp_;
  bool zero_ = false;
};

/// Finite-difference (D Lambda(x))* w using the 4th-order central stencil
/// on x -> <w, Lambda(x)>.  Throws std::invalid_argument for h <= 0.
Element vjp_fd(const ConservativeMap& lambda, const Element& x, const Element& w, double h);

/// Default step used by ConservativeMap::vjp when no analytic form exists.
double default_vjp_step(const Space& space, const Element& x);

double inner(const Space& space, const Element& x, const Element& y);

using ElementPair = std::pair<Element, Element>;

/// max |<y,Bx> + <By,x>| / (1 + |x||y|) over the sample pairs.
double skew_defect(const Space& space, const LinearMap& b, std::span<const ElementPair> samples);

/// max |<x,Bx> - (|b2 x|^2 - |b1 x|^2)/2| / (1 + |x|^2).
double boundary_skew_defect(const Space& space, const LinearMap& b, const BoundaryPair& bp,
                            std::span<const Element> samples);

/// max |<Lambda x, x>| / (1 + |x|^2).
double conservativity_defect(const Space& space, const ConservativeMap& lambda,
                             std::span<const Element> samples);

/// max |<y,Ax> - <A*y,x>| / (1 + |x||y|).
double adjoint_defect(const LinearMap& a, std::span<const ElementPair> samples);

// Deterministic standard-normal samples.
std::vector<Element> random_elements(int dim, int count, std::uint64_t seed, double scale = 1.0);
std::vector<ElementPair> random_pairs(int dim, int count, std::uint64_t seed, double scale = 1.0);

/// Rows of whitespace-separated decimals; blank lines and '#' comments skipped.
Matrix read_matrix(std::istream& in);
Matrix read_matrix_file(const std::string& path);
void write_matrix(std::ostream& out, const Matrix& m);

}  // namespace asdvar
