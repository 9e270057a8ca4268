#pragma once

// Divergence-free, mean-zero Fourier discretization of 2D periodic velocity
// fields on [0, 2pi]^2.  Coordinates are coefficients in the real
// L2-orthonormal basis grad^perp cos(k.x) / (pi sqrt2 |k|) and
// grad^perp sin(k.x) / (pi sqrt2 |k|) over the half plane of wavenumbers
// with |kx|, |ky| <= K = floor((N - 1) / 3), so quadratic products are
// computed alias-free on the N x N grid.

#include "asdvar/hilbert.hpp"

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

namespace asdvar {

namespace detail {
struct NseFft;
}

struct FourierMode {
  int kx = 0;
  int ky = 0;
  bool sine = false;
  double k2() const { return static_cast<double>(kx) * kx + static_cast<double>(ky) * ky; }
};

/// Grid fields are N*N arrays with entry ix * N + iy at (2 pi ix / N, 2 pi iy / N).
struct VelocityField {
  Vector u1;
  Vector u2;
};

class NseBasis {
 public:
  /// grid >= 4, even.
  explicit NseBasis(int grid);
  ~NseBasis();
  NseBasis(const NseBasis&) = delete;
  NseBasis& operator=(const NseBasis&) = delete;

  int grid() const { return n_; }
  int cutoff() const { return cutoff_; }
  int dim() const { return static_cast<int>(modes_.size()); }
  const std::vector<FourierMode>& modes() const { return modes_; }
  /// |k|^2 per coordinate.
  const Vector& k2() const { return k2_; }

  VelocityField velocity(const Vector& coeffs) const;
  /// L2 projection of a grid field onto the span of the basis (Leray
  /// projection followed by truncation).
  Vector project(const VelocityField& w) const;
  /// Leray-projected convection P[(u . grad) u].
  Vector convection(const Vector& coeffs) const;
  /// (D convection(u))^* w = P[(grad u)^T w - (u . grad) w].
  Vector convection_vjp(const Vector& coeffs, const Vector& w) const;
  /// max_k |k . w_hat(k)| / (1 + max_k |w_hat(k)|) for the grid field of coeffs.
  double divergence_defect(const Vector& coeffs) const;
  /// Mean of each velocity component over the grid.
  std::pair<double, double> mean(const VelocityField& w) const;
  /// max_k |k . w_hat(k)| / (1 + max_k |w_hat(k)|) for a grid field.
  double divergence_defect(const VelocityField& w) const;

  /// (sin x cos y, -cos x sin y).
  Vector taylor_green() const;
  /// Seeded random field on modes with |k|^2 <= max_k2, unit L2 norm times amplitude.
  Vector random_field(std::uint64_t seed, double max_k2, double amplitude) const;

  struct PicardResult {
    Vector coeffs;
    int iterations = 0;
    bool converged = false;
    double last_step = 0.0;
  };
  /// Vorticity fixed point nu (-Delta) w + (u . grad) w + curl f = 0 on the
  /// truncated square, returned as velocity coefficients.
  PicardResult vorticity_picard(const Vector& forcing, double nu, int max_iter = 500, double tol = 1e-14) const;

 private:
  int n_;
  int cutoff_;
  std::vector<FourierMode> modes_;
  Vector k2_;
  std::unique_ptr<detail::NseFft> impl_;
};

}  // namespace asdvar
