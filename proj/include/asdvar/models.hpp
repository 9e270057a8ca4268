#pragma once

// Discretized model problems in the canonical form 0 ∈ d phi(x) + B x +
// Lambda x + f, each paired with an independent classical oracle.

#include "asdvar/evolution.hpp"
#include "asdvar/spectral.hpp"
#include "asdvar/stationary.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace asdvar {

enum class OracleKind { newton, picard_spectral, exact_formula, resolvent };
const char* to_string(OracleKind k);

struct OracleResult {
  Element x;
  bool converged = false;
  int iterations = 0;
  /// Final residual norm reported by the oracle.
  double residual = 0.0;
};

/// Named forcing or initial data: "taylor_green", "zero", "random_seeded(<seed>)",
/// and for 1D problems "sine".
struct FieldChoice {
  std::string name = "zero";
  std::uint64_t seed = 0;
  double amplitude = 1.0;

  static FieldChoice parse(const std::string& text, double amplitude = 1.0);
  std::string describe() const;
};

/// Relative L2 distance |x - y| / max(|y|, tiny) in a space's norm.
double relative_error(const Space& space, const Element& x, const Element& y);

// ---------------------------------------------------------------------------
// Heat equation u' = nu u'' on (0, 1).

enum class HeatBoundary { dirichlet, periodic };

struct HeatParams {
  int n = 32;  // intervals
  double nu = 1.0;
  HeatBoundary bc = HeatBoundary::dirichlet;
  double horizon = 0.1;
  int steps = 32;
  FieldChoice initial{"sine"};
};

struct HeatModel {
  PathProblem problem;
  /// Node coordinates of the unknowns.
  Vector nodes;
  /// K with phi(u) = 1/2 nu u^T K u.
  Matrix stiffness;
  /// Continuum solution for sine initial data, in unknown coordinates.
  std::function<Element(double)> exact;
  /// Semi-discrete solution (exact in space-discrete form) for sine data.
  std::function<Element(double)> semi_discrete;
  /// Implicit Euler recursion u_k = (G + h nu K)^{-1} G u_{k-1}, node by node.
  DiscretePath resolvent_path() const;
};

HeatModel build_heat_1d(const HeatParams& params);
PathProblem build_heat_1d(int n, double nu, HeatBoundary bc);

// ---------------------------------------------------------------------------
// Steady transport-reaction-diffusion on (0, 1) with homogeneous Dirichlet data:
// -nu u'' + a u' + a0 u + |u|^{m-2} u + conv(u) + f = 0.

struct TransportParams {
  int n = 128;  // intervals
  double nu = 0.1;
  double m = 4.0;
  std::function<double(double)> a = [](double) { return 1.0; };
  std::function<double(double)> a_prime = [](double) { return 0.0; };
  std::function<double(double)> a0 = [](double) { return 0.0; };
  std::function<double(double)> forcing = [](double x) { return std::sin(2.0 * 3.141592653589793 * x); };
  /// Adds the conservative Burgers-type convection u u'.
  bool convection = true;
};

struct TransportModel {
  StationaryProblem problem;
  Vector nodes;
  std::function<OracleResult()> oracle;
};

/// Throws std::invalid_argument naming the node where a0 - a'/2 < 0.
TransportModel build_transport_1d(const TransportParams& params);

// ---------------------------------------------------------------------------
// 2D periodic Navier-Stokes on divergence-free mean-zero fields.

struct NseParams {
  int grid = 32;
  double nu = 1.0;
  /// "taylor_green" selects f = -2 nu u_TG, whose solution is u_TG.
  FieldChoice forcing{"random_seeded", 1};
  /// Size of an optional bounded skew + symmetric perturbation of the Stokes operator.
  double perturbation = 0.0;
  std::uint64_t perturbation_seed = 11;
};

struct NseModel {
  StationaryProblem problem;
  std::shared_ptr<const NseBasis> basis;
  Element forcing;
  std::function<OracleResult()> oracle;
};

NseModel build_nse2d_stationary(const NseParams& params);
/// Forcing supplied as grid fields; must be mean-zero and divergence-free.
NseModel build_nse2d_stationary(const NseParams& params, const VelocityField& forcing);
/// The named field itself (Taylor-Green velocity, zero or seeded random low modes), scaled by the amplitude.
Element nse_field(const NseBasis& basis, const FieldChoice& choice);

struct NseEvolutionParams {
  NseParams stationary;
  FieldChoice initial{"taylor_green"};
  double horizon = 1.0;
  int steps = 32;
};

struct NseEvolutionModel {
  PathProblem problem;
  std::shared_ptr<const NseBasis> basis;
  /// e^{-2 nu t} u_TG when the data are the decaying Taylor-Green vortex.
  std::function<Element(double)> exact;
  /// Implicit Euler closed form c_k = c_{k-1} / (1 + 2 nu h) for the same data.
  std::function<Element(int)> discrete_exact;
};

NseEvolutionModel build_nse2d_evolution(const NseEvolutionParams& params);

// ---------------------------------------------------------------------------
// Coupled transport-diffusion system for a pair of fields (u, v) on (0, 1)
// with Dirichlet data.

struct CoupledParams {
  int n = 64;  // intervals
  double p = 4.0;
  double q = 4.0;
  int m = 2;
  double c = 1.0;
  double b1 = 1.0;
  double b2 = 0.5;
  std::function<double(double)> f = [](double x) { return 0.5 * std::sin(3.141592653589793 * x); };
  std::function<double(double)> g = [](double x) { return 0.3 * std::sin(2.0 * 3.141592653589793 * x); };
};

struct CoupledModel {
  StationaryProblem problem;
  Vector nodes;
  std::function<OracleResult()> oracle;
};

CoupledModel build_coupled_system_1d(const CoupledParams& params);

/// Verifies the sign convention on a small linear problem; throws on failure.
void linear_sign_self_test();

}  // namespace asdvar
