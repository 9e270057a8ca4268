#pragma once

// Self-dual variational solver for 0 in d phi(x) + B x + Lambda x + f,
// optionally with a boundary pair (b1, b2) and boundary Lagrangian l.
//
// The certificate I(x) = phi(x) + <f,x> + phi*(-Lambda x - B x - f)
// (+ l(b1 x, b2 x) with boundaries) is nonnegative and vanishes exactly at
// solutions.

#include "asdvar/convex.hpp"
#include "asdvar/hilbert.hpp"
#include "asdvar/lagrangian.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace asdvar {

class ProblemDefectError : public std::invalid_argument {
 public:
  ProblemDefectError(const std::string& what, double defect) : std::invalid_argument(what), defect_(defect) {}
  double defect() const { return defect_; }

 private:
  double defect_;
};

struct ProblemDefects {
  double skew = 0.0;
  double boundary = 0.0;
  double conservativity = 0.0;
};

class StationaryProblem {
 public:
  /// Measures the structural defects of B and Lambda on seeded samples and
  /// throws ProblemDefectError when any exceeds tol.
  StationaryProblem(SpacePtr space, ConvexFunction phi, LinearMap b, ConservativeMap lambda, Element f,
                    std::optional<BoundaryPair> bp = std::nullopt,
                    std::optional<BoundaryLagrangian> ell = std::nullopt, double tol = 1e-8);

  const SpacePtr& space() const { return space_; }
  const ConvexFunction& phi() const { return phi_; }
  const LinearMap& b() const { return b_; }
  const ConservativeMap& lambda() const { return lambda_; }
  const Element& f() const { return f_; }
  const std::optional<BoundaryPair>& boundary_pair() const { return bp_; }
  const std::optional<BoundaryLagrangian>& boundary_lagrangian() const { return ell_; }
  const ProblemDefects& defects() const { return defects_; }
  /// phi + <f, .>.
  const ConvexFunction& psi() const { return psi_; }
  /// The basic Lagrangian psi(x) + psi*(-p).
  Lagrangian lagrangian() const { return Lagrangian::basic(psi_); }
  /// -Lambda x - B x - f.
  Element dual_argument(const Element& x) const;

  /// Warnings collected at construction (e.g. apparent lack of coercivity).
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  SpacePtr space_;
  ConvexFunction phi_;
  LinearMap b_;
  ConservativeMap lambda_;
  Element f_;
  std::optional<BoundaryPair> bp_;
  std::optional<BoundaryLagrangian> ell_;
  ConvexFunction psi_;
  ProblemDefects defects_;
  std::vector<std::string> warnings_;
};

struct CertificateEvaluation {
  double value = 0.0;
  /// Gram-gradient of I.
  Element gradient;
  /// Maximizer of the conjugate at -Lambda x - B x - f.
  Element dual_point;
  /// 1 + |phi(x)| + |phi*(.)|.
  double scale = 1.0;
  bool converged = true;
};

/// I(x) in the cancellation-free form gap + boundary excess - <Lambda x, x>
/// - (<x,Bx> - 1/2(|b2 x|^2 - |b1 x|^2)).
double certificate(const StationaryProblem& p, const Element& x);
CertificateEvaluation certificate_eval(const StationaryProblem& p, const Element& x, bool want_gradient,
                                       const Element* warm = nullptr);

enum class SolveStatus { converged, max_iter, failed };
const char* to_string(SolveStatus s);

struct HistoryEntry {
  double certificate;
  double grad_norm;
};

struct SolveOptions {
  int max_iter = 5000;
  /// Gradient tolerance relative to the certificate scale.
  double gtol = 1e-10;
  /// Certificate acceptance threshold relative to the scale.
  double certificate_tol = 1e-6;
  std::optional<Element> initial;
  /// Picard damping in (0, 1].
  double damping = 1.0;
  /// Picard step tolerance.
  double tol = 1e-12;
  int memory = 12;
};

struct SolveReport {
  Element x;
  double certificate = 0.0;
  double inclusion_residual = 0.0;
  int iterations = 0;
  std::vector<HistoryEntry> history;
  SolveStatus status = SolveStatus::failed;
  double scale = 1.0;
  /// inclusion_residual / sqrt(certificate) at the returned point.
  double residual_constant = 0.0;
  std::string message;
  std::vector<std::string> warnings;
};

SolveReport solve_minimize(const StationaryProblem& p, const SolveOptions& opts = {});
SolveReport solve_picard(const StationaryProblem& p, const SolveOptions& opts = {});

/// |x - prox_phi(x - Lambda x - B x - f)| / (1 + |x|), plus the square root
/// of the boundary excess when a boundary Lagrangian is present.
double inclusion_residual(const StationaryProblem& p, const Element& x);

/// M(x, y) = -<Lambda x, y> + <x, B y> - l(b1 y, b2 y) + psi(x) - psi(y).
double minmax_value(const StationaryProblem& p, const Element& x, const Element& y);

struct MinmaxResult {
  double sup = 0.0;
  double diagonal = 0.0;  // M(x, x)
  Element best_probe;
  int probes = 0;
};

/// Lower bound on sup_y M(x, y) over the supplied probes plus structured
/// probes (x, 0, the conjugate maximizer), polished by concave ascent.
MinmaxResult minmax_sup(const StationaryProblem& p, const Element& x, std::span<const Element> probes,
                        bool polish = true);

/// Checks growth of phi along seeded rays; returns a warning message or empty.
std::string coercivity_warning(const ConvexFunction& phi, std::uint64_t seed = 7);

}  // namespace asdvar
