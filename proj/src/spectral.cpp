#include "asdvar/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>

namespace asdvar {

namespace {

using cplx = std::complex<double>;

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

using RealBuf = std::unique_ptr<double, FftwFree>;
using CplxBuf = std::unique_ptr<fftw_complex, FftwFree>;

RealBuf real_buf(std::size_t n) { return RealBuf(fftw_alloc_real(n)); }
CplxBuf cplx_buf(std::size_t n) { return CplxBuf(fftw_alloc_complex(n)); }

}  // namespace

namespace detail {

struct NseFft {
  int n;
  int nh;  // n / 2 + 1
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;

  explicit NseFft(int grid) : n(grid), nh(grid / 2 + 1) {
    auto r = real_buf(static_cast<std::size_t>(n) * n);
    auto c = cplx_buf(static_cast<std::size_t>(n) * nh);
    std::lock_guard<std::mutex> lock(planner_mutex());
    r2c = fftw_plan_dft_r2c_2d(n, n, r.get(), c.get(), FFTW_ESTIMATE);
    c2r = fftw_plan_dft_c2r_2d(n, n, c.get(), r.get(), FFTW_ESTIMATE);
    if (!r2c || !c2r) throw std::runtime_error("NseBasis: FFT planning failed");
  }
  ~NseFft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(r2c);
    fftw_destroy_plan(c2r);
  }

  std::size_t csize() const { return static_cast<std::size_t>(n) * nh; }
  std::size_t rsize() const { return static_cast<std::size_t>(n) * n; }
  int index(int kx, int ky) const { return ((kx % n + n) % n) * nh + ky; }
  int kx_of(int ix) const { return ix <= n / 2 ? ix : ix - n; }

  using Spectrum = std::vector<cplx>;

  Vector to_grid(const Spectrum& s) const {
    auto c = cplx_buf(csize());
    auto r = real_buf(rsize());
    std::copy(s.begin(), s.end(), reinterpret_cast<cplx*>(c.get()));
    fftw_execute_dft_c2r(c2r, c.get(), r.get());
    return Eigen::Map<const Vector>(r.get(), static_cast<Eigen::Index>(rsize()));
  }

  // Coefficients s_k with f(x) = sum_k s_k e^{i k.x}.
  Spectrum from_grid(const Vector& f) const {
    auto r = real_buf(rsize());
    auto c = cplx_buf(csize());
    std::copy(f.data(), f.data() + f.size(), r.get());
    fftw_execute_dft_r2c(r2c, r.get(), c.get());
    const cplx* p = reinterpret_cast<const cplx*>(c.get());
    const double scale = 1.0 / (static_cast<double>(n) * n);
    Spectrum s(csize());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = p[i] * scale;
    return s;
  }

  // Multiplies by (i kx)^dx (i ky)^dy.
  Spectrum derivative(const Spectrum& s, int dx, int dy) const {
    Spectrum out(s.size());
    for (int ix = 0; ix < n; ++ix) {
      const double kx = kx_of(ix);
      for (int iy = 0; iy < nh; ++iy) {
        cplx f(1.0, 0.0);
        for (int d = 0; d < dx; ++d) f *= cplx(0.0, kx);
        for (int d = 0; d < dy; ++d) f *= cplx(0.0, static_cast<double>(iy));
        out[ix * nh + iy] = f * s[ix * nh + iy];
      }
    }
    return out;
  }
};

}  // namespace detail

using detail::NseFft;

NseBasis::NseBasis(int grid) : n_(grid), cutoff_((grid - 1) / 3) {
  if (grid < 4 || grid % 2 != 0) throw std::invalid_argument("NseBasis: grid must be even and >= 4");
  for (int ky = 0; ky <= cutoff_; ++ky) {
    for (int kx = -cutoff_; kx <= cutoff_; ++kx) {
      if (ky == 0 && kx <= 0) continue;
      modes_.push_back({kx, ky, false});
      modes_.push_back({kx, ky, true});
    }
  }
  k2_.resize(dim());
  for (int j = 0; j < dim(); ++j) k2_(j) = modes_[j].k2();
  impl_ = std::make_unique<NseFft>(grid);
}

NseBasis::~NseBasis() = default;

namespace {

double basis_scale(const FourierMode& m) { return 1.0 / (std::numbers::pi * std::sqrt(2.0 * m.k2())); }

}  // namespace

// Stream-function spectrum of a coefficient vector.
static std::vector<cplx> stream_spectrum(const NseBasis& b, const NseFft& im, const Vector& c) {
  if (c.size() != b.dim()) throw DimensionError("NseBasis: coefficient vector has the wrong size");
  std::vector<cplx> s(im.csize(), cplx(0.0, 0.0));
  const auto& modes = b.modes();
  for (int j = 0; j < b.dim(); ++j) {
    const auto& m = modes[j];
    const double w = basis_scale(m) * 0.5 * c(j);
    const cplx v = m.sine ? cplx(0.0, -w) : cplx(w, 0.0);
    s[im.index(m.kx, m.ky)] += v;
    if (m.ky == 0) s[im.index(-m.kx, 0)] += std::conj(v);
  }
  return s;
}

VelocityField NseBasis::velocity(const Vector& coeffs) const {
  const auto psi = stream_spectrum(*this, *impl_, coeffs);
  // u = (d_y psi, -d_x psi)
  auto u2 = impl_->derivative(psi, 1, 0);
  for (auto& v : u2) v = -v;
  return {impl_->to_grid(impl_->derivative(psi, 0, 1)), impl_->to_grid(u2)};
}

Vector NseBasis::project(const VelocityField& w) const {
  const std::size_t rs = impl_->rsize();
  if (static_cast<std::size_t>(w.u1.size()) != rs || static_cast<std::size_t>(w.u2.size()) != rs)
    throw DimensionError("NseBasis::project: grid field has the wrong size");
  const auto w1 = impl_->from_grid(w.u1);
  const auto w2 = impl_->from_grid(w.u2);
  const double area = 4.0 * std::numbers::pi * std::numbers::pi;
  Vector out(dim());
  for (int j = 0; j < dim(); ++j) {
    const auto& m = modes_[j];
    const int idx = impl_->index(m.kx, m.ky);
    // curl w = d_x w2 - d_y w1
    const cplx curl = cplx(0.0, m.kx) * w2[idx] - cplx(0.0, m.ky) * w1[idx];
    out(j) = basis_scale(m) * area * (m.sine ? -curl.imag() : curl.real());
  }
  return out;
}

namespace {

struct Gradients {
  Vector dx1, dy1, dx2, dy2;
};

Gradients grid_gradients(const NseFft& im, const std::vector<cplx>& psi) {
  // u1 = d_y psi, u2 = -d_x psi
  auto neg = [](std::vector<cplx> v) {
    for (auto& x : v) x = -x;
    return v;
  };
  Gradients g;
  g.dx1 = im.to_grid(im.derivative(psi, 1, 1));
  g.dy1 = im.to_grid(im.derivative(psi, 0, 2));
  g.dx2 = im.to_grid(neg(im.derivative(psi, 2, 0)));
  g.dy2 = -g.dx1;
  return g;
}

}  // namespace

Vector NseBasis::convection(const Vector& coeffs) const {
  const auto psi = stream_spectrum(*this, *impl_, coeffs);
  const auto u = velocity(coeffs);
  const auto g = grid_gradients(*impl_, psi);
  VelocityField w;
  w.u1 = u.u1.cwiseProduct(g.dx1) + u.u2.cwiseProduct(g.dy1);
  w.u2 = u.u1.cwiseProduct(g.dx2) + u.u2.cwiseProduct(g.dy2);
  return project(w);
}

Vector NseBasis::convection_vjp(const Vector& coeffs, const Vector& wc) const {
  const auto u = velocity(coeffs);
  const auto gu = grid_gradients(*impl_, stream_spectrum(*this, *impl_, coeffs));
  const auto w = velocity(wc);
  const auto gw = grid_gradients(*impl_, stream_spectrum(*this, *impl_, wc));
  VelocityField r;
  r.u1 = w.u1.cwiseProduct(gu.dx1) + w.u2.cwiseProduct(gu.dx2) - u.u1.cwiseProduct(gw.dx1) -
         u.u2.cwiseProduct(gw.dy1);
  r.u2 = w.u1.cwiseProduct(gu.dy1) + w.u2.cwiseProduct(gu.dy2) - u.u1.cwiseProduct(gw.dx2) -
         u.u2.cwiseProduct(gw.dy2);
  return project(r);
}

double NseBasis::divergence_defect(const VelocityField& w) const {
  const auto w1 = impl_->from_grid(w.u1);
  const auto w2 = impl_->from_grid(w.u2);
  double div = 0.0, mag = 0.0;
  for (int ix = 0; ix < n_; ++ix) {
    const double kx = impl_->kx_of(ix);
    for (int iy = 0; iy < impl_->nh; ++iy) {
      const int idx = ix * impl_->nh + iy;
      div = std::max(div, std::abs(kx * w1[idx] + static_cast<double>(iy) * w2[idx]));
      mag = std::max({mag, std::abs(w1[idx]), std::abs(w2[idx])});
    }
  }
  return div / (1.0 + mag);
}

double NseBasis::divergence_defect(const Vector& coeffs) const { return divergence_defect(velocity(coeffs)); }

std::pair<double, double> NseBasis::mean(const VelocityField& w) const { return {w.u1.mean(), w.u2.mean()}; }

Vector NseBasis::taylor_green() const {
  VelocityField w;
  w.u1.resize(n_ * n_);
  w.u2.resize(n_ * n_);
  const double dx = 2.0 * std::numbers::pi / n_;
  for (int ix = 0; ix < n_; ++ix)
    for (int iy = 0; iy < n_; ++iy) {
      const double x = ix * dx, y = iy * dx;
      w.u1(ix * n_ + iy) = std::sin(x) * std::cos(y);
      w.u2(ix * n_ + iy) = -std::cos(x) * std::sin(y);
    }
  return project(w);
}

Vector NseBasis::random_field(std::uint64_t seed, double max_k2, double amplitude) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector c = Vector::Zero(dim());
  for (int j = 0; j < dim(); ++j)
    if (modes_[j].k2() <= max_k2) c(j) = normal(rng);
  const double nrm = c.norm();
  if (nrm > 0) c *= amplitude / nrm;
  return c;
}

NseBasis::PicardResult NseBasis::vorticity_picard(const Vector& forcing, double nu, int max_iter, double tol) const {
  if (!(nu > 0)) throw std::invalid_argument("vorticity_picard: nu must be positive");
  const auto& im = *impl_;
  const int nh = im.nh;
  std::vector<double> k2(im.csize(), 0.0);
  std::vector<char> keep(im.csize(), 0);
  for (int ix = 0; ix < n_; ++ix) {
    const int kx = im.kx_of(ix);
    for (int iy = 0; iy < nh; ++iy) {
      k2[ix * nh + iy] = static_cast<double>(kx) * kx + static_cast<double>(iy) * iy;
      keep[ix * nh + iy] = std::abs(kx) <= cutoff_ && iy <= cutoff_ && !(kx == 0 && iy == 0);
    }
  }
  // curl f = -Delta (stream function of f)
  auto curl_f = stream_spectrum(*this, im, forcing);
  for (std::size_t i = 0; i < curl_f.size(); ++i) curl_f[i] *= k2[i];
  std::vector<cplx> omega(im.csize(), cplx(0.0, 0.0));
  for (std::size_t i = 0; i < omega.size(); ++i)
    if (keep[i]) omega[i] = -curl_f[i] / (nu * k2[i]);
  PicardResult res;
  for (res.iterations = 1; res.iterations <= max_iter; ++res.iterations) {
    std::vector<cplx> psi(omega.size());
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = keep[i] ? omega[i] / k2[i] : cplx(0.0, 0.0);
    auto u2s = im.derivative(psi, 1, 0);
    for (auto& v : u2s) v = -v;
    const Vector u1 = im.to_grid(im.derivative(psi, 0, 1));
    const Vector u2 = im.to_grid(u2s);
    const Vector wx = im.to_grid(im.derivative(omega, 1, 0));
    const Vector wy = im.to_grid(im.derivative(omega, 0, 1));
    const auto adv = im.from_grid(u1.cwiseProduct(wx) + u2.cwiseProduct(wy));
    double step = 0.0, mag = 0.0;
    for (std::size_t i = 0; i < omega.size(); ++i) {
      const cplx next = keep[i] ? -(adv[i] + curl_f[i]) / (nu * k2[i]) : cplx(0.0, 0.0);
      step = std::max(step, std::abs(next - omega[i]));
      mag = std::max(mag, std::abs(next));
      omega[i] = next;
    }
    res.last_step = step;
    if (!std::isfinite(step)) break;
    if (step <= tol * (1.0 + mag)) {
      res.converged = true;
      break;
    }
  }
  res.iterations = std::min(res.iterations, max_iter);
  res.coeffs.resize(dim());
  for (int j = 0; j < dim(); ++j) {
    const auto& m = modes_[j];
    const cplx psi = omega[im.index(m.kx, m.ky)] / m.k2();
    res.coeffs(j) = (m.sine ? -2.0 * psi.imag() : 2.0 * psi.real()) / basis_scale(m);
  }
  return res;
}

}  // namespace asdvar
