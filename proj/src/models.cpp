#include "asdvar/models.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace asdvar {

const char* to_string(OracleKind k) {
  switch (k) {
    case OracleKind::newton: return "newton";
    case OracleKind::picard_spectral: return "picard_spectral";
    case OracleKind::exact_formula: return "exact_formula";
    case OracleKind::resolvent: return "resolvent";
  }
  return "unknown";
}

FieldChoice FieldChoice::parse(const std::string& text, double amplitude) {
  FieldChoice c;
  c.amplitude = amplitude;
  const std::string prefix = "random_seeded(";
  if (text.rfind(prefix, 0) == 0 && text.size() > prefix.size() && text.back() == ')') {
    const std::string num = text.substr(prefix.size(), text.size() - prefix.size() - 1);
    std::size_t used = 0;
    unsigned long long seed = 0;
    try {
      seed = std::stoull(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != num.size() || num.empty()) throw std::invalid_argument("bad seed in field choice '" + text + "'");
    c.name = "random_seeded";
    c.seed = seed;
    return c;
  }
  if (text == "taylor_green" || text == "zero" || text == "sine") {
    c.name = text;
    return c;
  }
  throw std::invalid_argument("unknown field choice '" + text + "'");
}

std::string FieldChoice::describe() const {
  if (name == "random_seeded") return "random_seeded(" + std::to_string(seed) + ")";
  return name;
}

double relative_error(const Space& space, const Element& x, const Element& y) {
  return space.norm(x - y) / std::max(space.norm(y), 1e-300);
}

namespace {

void ensure_sign_convention() {
  static std::once_flag once;
  std::call_once(once, linear_sign_self_test);
}

Matrix second_difference(int m) {
  Matrix t = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    t(i, i) = 2.0;
    if (i > 0) t(i, i - 1) = -1.0;
    if (i + 1 < m) t(i, i + 1) = -1.0;
  }
  return t;
}

// Damped Newton on a square system with backtracking on |R|.
OracleResult newton_system(const std::function<Vector(const Vector&)>& residual,
                           const std::function<Matrix(const Vector&)>& jacobian, Vector x, double tol,
                           int max_iter = 100) {
  OracleResult out;
  Vector r = residual(x);
  double rn = r.norm();
  for (out.iterations = 0; out.iterations < max_iter && rn > tol; ++out.iterations) {
    const Vector dx = jacobian(x).partialPivLu().solve(-r);
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      const Vector xn = x + t * dx;
      const Vector rn_vec = residual(xn);
      if (rn_vec.allFinite() && rn_vec.norm() < (1.0 - 1e-4 * t) * rn) {
        x = xn;
        r = rn_vec;
        rn = r.norm();
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  out.x = x;
  out.residual = rn;
  out.converged = rn <= tol;
  return out;
}

double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

}  // namespace

void linear_sign_self_test() {
  auto sp = make_space(2);
  Matrix q(2, 2);
  q << 2.0, 0.5, 0.5, 1.0;
  const Vector f = (Vector(2) << 1.0, -2.0).finished();
  StationaryProblem p(sp, ConvexFunction::quadratic_form(sp, q), LinearMap::zero(sp), ConservativeMap::zero(sp), f);
  const Element x = q.ldlt().solve(-f);
  const double at_solution = certificate(p, x);
  const double at_flipped = certificate(p, Element(-x));
  if (!(std::abs(at_solution) <= 1e-12 && at_flipped > 1e-3))
    throw std::logic_error("sign convention self-test failed: certificate does not vanish at Qx + f = 0");
}

// ---------------------------------------------------------------------------

DiscretePath HeatModel::resolvent_path() const {
  const Space& sp = *problem.space();
  const double h = problem.h();
  const Matrix e = *problem.phi(1).hessian(problem.v0());
  Eigen::LDLT<Matrix> step(sp.gram() + h * e);
  DiscretePath path;
  path.h = h;
  path.nodes.push_back(problem.v0());
  for (int k = 1; k <= problem.steps(); ++k) path.nodes.push_back(step.solve(sp.gram() * path.nodes.back()));
  return path;
}

HeatModel build_heat_1d(const HeatParams& prm) {
  ensure_sign_convention();
  if (prm.n < 4) throw std::invalid_argument("build_heat_1d: n must be at least 4");
  if (!(prm.nu > 0)) throw std::invalid_argument("build_heat_1d: nu must be positive");
  const double hx = 1.0 / prm.n;
  const double pi = std::numbers::pi;
  Matrix basis;  // columns map unknowns to node values
  Vector x;
  Matrix k;
  double wave = 0.0;
  if (prm.bc == HeatBoundary::dirichlet) {
    const int m = prm.n - 1;
    x = Vector::LinSpaced(m, hx, 1.0 - hx);
    k = second_difference(m) / hx;
    basis = Matrix::Identity(m, m);
    wave = pi;
  } else {
    const int m = prm.n;
    x = Vector::LinSpaced(m, 0.0, 1.0 - hx);
    Matrix kp = second_difference(m);
    kp(0, m - 1) = kp(m - 1, 0) = -1.0;
    kp /= hx;
    // Orthonormal basis of the mean-zero node vectors.
    Eigen::HouseholderQR<Matrix> qr(Vector::Ones(m));
    const Matrix qfull = qr.householderQ() * Matrix::Identity(m, m);
    basis = qfull.rightCols(m - 1);
    k = basis.transpose() * kp * basis;
    wave = 2.0 * pi;
  }
  const int dim = static_cast<int>(basis.cols());
  auto sp = make_space(Matrix(hx * Matrix::Identity(dim, dim)));
  k = 0.5 * (k + k.transpose());
  const auto phi = ConvexFunction::quadratic_form(sp, prm.nu * k);
  StationaryProblem base(sp, phi, LinearMap::zero(sp), ConservativeMap::zero(sp), Vector::Zero(dim));
  const Vector profile = (wave * x).array().sin().matrix();
  Element v0;
  if (prm.initial.name == "sine") {
    v0 = prm.initial.amplitude * basis.transpose() * profile;
  } else if (prm.initial.name == "zero") {
    v0 = Vector::Zero(dim);
  } else if (prm.initial.name == "random_seeded") {
    std::mt19937_64 rng(prm.initial.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    v0.resize(dim);
    for (int i = 0; i < dim; ++i) v0(i) = normal(rng);
    v0 *= prm.initial.amplitude / sp->norm(v0);
  } else {
    throw std::invalid_argument("build_heat_1d: unsupported initial data '" + prm.initial.describe() + "'");
  }
  HeatModel model{PathProblem(base, v0, prm.horizon, prm.steps), x, k, nullptr, nullptr};
  if (prm.initial.name == "sine") {
    const Element shape = prm.initial.amplitude * basis.transpose() * profile;
    const double rate = prm.nu * wave * wave;
    const double sd = prm.bc == HeatBoundary::dirichlet ? std::sin(pi * hx / 2.0) : std::sin(pi * hx);
    const double discrete_rate = prm.nu * 4.0 * sd * sd / (hx * hx);
    model.exact = [shape, rate](double t) { return Element(std::exp(-rate * t) * shape); };
    model.semi_discrete = [shape, discrete_rate](double t) { return Element(std::exp(-discrete_rate * t) * shape); };
  }
  return model;
}

PathProblem build_heat_1d(int n, double nu, HeatBoundary bc) {
  HeatParams p;
  p.n = n;
  p.nu = nu;
  p.bc = bc;
  return build_heat_1d(p).problem;
}

// ---------------------------------------------------------------------------

namespace {

// (1/(6h)) [u_i (u_{i+1} - u_{i-1}) + u_{i+1}^2 - u_{i-1}^2] with zero end values.
Vector burgers(const Vector& u, double h) {
  const Eigen::Index m = u.size();
  Vector out(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double l = i > 0 ? u(i - 1) : 0.0, r = i + 1 < m ? u(i + 1) : 0.0;
    out(i) = (u(i) * (r - l) + r * r - l * l) / (6.0 * h);
  }
  return out;
}

Vector burgers_vjp(const Vector& u, const Vector& w, double h) {
  const Eigen::Index m = u.size();
  Vector out(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double ul = j > 0 ? u(j - 1) : 0.0, ur = j + 1 < m ? u(j + 1) : 0.0;
    const double wl = j > 0 ? w(j - 1) : 0.0, wr = j + 1 < m ? w(j + 1) : 0.0;
    out(j) = ((-ur - 2.0 * u(j)) * wr + (ur - ul) * w(j) + (ul + 2.0 * u(j)) * wl) / (6.0 * h);
  }
  return out;
}

Matrix burgers_jacobian(const Vector& u, double h) {
  const Eigen::Index m = u.size();
  Matrix j = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double l = i > 0 ? u(i - 1) : 0.0, r = i + 1 < m ? u(i + 1) : 0.0;
    j(i, i) = (r - l) / (6.0 * h);
    if (i > 0) j(i, i - 1) = (-u(i) - 2.0 * l) / (6.0 * h);
    if (i + 1 < m) j(i, i + 1) = (u(i) + 2.0 * r) / (6.0 * h);
  }
  return j;
}

// Skew central difference for a u' + a'/2 u on interior nodes (coefficients
// sampled at all n + 1 grid points).
Matrix skew_transport(const Vector& a_all, double h) {
  const Eigen::Index m = a_all.size() - 2;
  Matrix b = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index g = i + 1;
    if (i + 1 < m) b(i, i + 1) = (a_all(g) + a_all(g + 1)) / (4.0 * h);
    if (i > 0) b(i, i - 1) = -(a_all(g) + a_all(g - 1)) / (4.0 * h);
  }
  return b;
}

}  // namespace

TransportModel build_transport_1d(const TransportParams& prm) {
  ensure_sign_convention();
  if (prm.n < 4) throw std::invalid_argument("build_transport_1d: n must be at least 4");
  if (!(prm.nu > 0)) throw std::invalid_argument("build_transport_1d: nu must be positive");
  if (!(prm.m > 1)) throw std::invalid_argument("build_transport_1d: m must exceed 1");
  const int m = prm.n - 1;
  const double h = 1.0 / prm.n;
  const Vector all = Vector::LinSpaced(prm.n + 1, 0.0, 1.0);
  const Vector x = all.segment(1, m);
  Vector a_all(prm.n + 1), c(m), f(m);
  for (int i = 0; i <= prm.n; ++i) a_all(i) = prm.a(all(i));
  for (int i = 0; i < m; ++i) {
    c(i) = prm.a0(x(i)) - 0.5 * prm.a_prime(x(i));
    if (c(i) < -1e-14) {
      std::ostringstream os;
      os << "build_transport_1d: convexity condition a0 - a'/2 >= 0 fails at node " << i + 1 << " (x = " << x(i)
         << ", value " << c(i) << ")";
      throw std::invalid_argument(os.str());
    }
    c(i) = std::max(c(i), 0.0);
    f(i) = prm.forcing(x(i));
  }
  auto sp = make_space(Matrix(h * Matrix::Identity(m, m)));
  const Matrix t = second_difference(m);
  Matrix e = prm.nu * t / h;
  e.diagonal() += h * c;
  std::vector<ConvexFunction> terms{ConvexFunction::quadratic_form(sp, e)};
  terms.push_back(ConvexFunction::separable_power(sp, prm.m, Vector::Constant(m, h)));
  const auto phi = ConvexFunction::sum(terms);
  const Matrix bmat = skew_transport(a_all, h);
  auto lambda = prm.convection
                    ? ConservativeMap(
                          sp, [h](const Element& u) { return Element(burgers(u, h)); },
                          [h](const Element& u, const Element& w) { return Element(burgers_vjp(u, w, h)); })
                    : ConservativeMap::zero(sp);
  StationaryProblem problem(sp, phi, LinearMap::dense(sp, bmat), lambda, f);

  const double nu = prm.nu, mexp = prm.m;
  const bool conv = prm.convection;
  auto oracle = [=]() {
    auto residual = [&](const Vector& u) -> Vector {
      Vector r = nu * (t * u) / (h * h) + c.cwiseProduct(u) + bmat * u + f;
      for (int i = 0; i < m; ++i) r(i) += std::pow(std::abs(u(i)), mexp - 2.0) * u(i);
      if (conv) r += burgers(u, h);
      return r;
    };
    auto jacobian = [&](const Vector& u) -> Matrix {
      Matrix j = nu * t / (h * h) + bmat;
      j.diagonal() += c;
      for (int i = 0; i < m; ++i) j(i, i) += (mexp - 1.0) * std::pow(std::abs(u(i)), mexp - 2.0);
      if (conv) j += burgers_jacobian(u, h);
      return j;
    };
    return newton_system(residual, jacobian, Vector::Zero(m), 1e-12 * (1.0 + f.norm()));
  };
  return {problem, x, oracle};
}

// ---------------------------------------------------------------------------

Element nse_field(const NseBasis& basis, const FieldChoice& choice) {
  if (choice.name == "taylor_green") return choice.amplitude * basis.taylor_green();
  if (choice.name == "zero") return Vector::Zero(basis.dim());
  if (choice.name == "random_seeded") return basis.random_field(choice.seed, 10.0, choice.amplitude);
  throw std::invalid_argument("unsupported Navier-Stokes field '" + choice.describe() + "'");
}

namespace {

NseModel assemble_nse(const NseParams& prm, std::shared_ptr<const NseBasis> basis, Element forcing) {
  ensure_sign_convention();
  if (!(prm.nu > 0)) throw std::invalid_argument("build_nse2d: nu must be positive");
  const int dim = basis->dim();
  auto sp = make_space(dim);
  Matrix e = Matrix(prm.nu * basis->k2().asDiagonal());
  LinearMap b = LinearMap::zero(sp);
  if (prm.perturbation != 0.0) {
    std::mt19937_64 rng(prm.perturbation_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix pm(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) pm(i, j) = normal(rng);
    pm *= prm.perturbation / (2.0 * std::sqrt(static_cast<double>(dim)));
    b = LinearMap::dense(sp, Matrix(0.5 * (pm - pm.transpose())));
    e += 0.5 * (pm + pm.transpose());
    const double lowest = Eigen::SelfAdjointEigenSolver<Matrix>(e, Eigen::EigenvaluesOnly).eigenvalues()(0);
    if (!(lowest > 0))
      throw std::invalid_argument("build_nse2d: perturbation destroys coercivity (reduce its size or raise nu)");
  }
  const auto phi = ConvexFunction::quadratic_form(sp, e);
  ConservativeMap lambda(
      sp, [basis](const Element& c) { return Element(basis->convection(c)); },
      [basis](const Element& c, const Element& w) { return Element(basis->convection_vjp(c, w)); });
  StationaryProblem problem(sp, phi, b, lambda, forcing);
  const double nu = prm.nu;
  const bool perturbed = prm.perturbation != 0.0;
  auto oracle = [basis, forcing, nu, perturbed]() {
    OracleResult out;
    if (perturbed) return out;
    auto r = basis->vorticity_picard(forcing, nu, 2000, 1e-15);
    out.x = r.coeffs;
    out.converged = r.converged;
    out.iterations = r.iterations;
    out.residual = r.last_step;
    return out;
  };
  return {problem, basis, forcing, oracle};
}

}  // namespace

NseModel build_nse2d_stationary(const NseParams& prm) {
  auto basis = std::make_shared<const NseBasis>(prm.grid);
  Element f = nse_field(*basis, prm.forcing);
  if (prm.forcing.name == "taylor_green") f *= -2.0 * prm.nu;
  return assemble_nse(prm, basis, f);
}

NseModel build_nse2d_stationary(const NseParams& prm, const VelocityField& forcing) {
  auto basis = std::make_shared<const NseBasis>(prm.grid);
  const double scale = 1.0 + std::max(forcing.u1.cwiseAbs().maxCoeff(), forcing.u2.cwiseAbs().maxCoeff());
  const auto [m1, m2] = basis->mean(forcing);
  if (std::abs(m1) > 1e-12 * scale || std::abs(m2) > 1e-12 * scale)
    throw std::invalid_argument("build_nse2d_stationary: forcing must have zero mean");
  if (basis->divergence_defect(forcing) > 1e-10)
    throw std::invalid_argument("build_nse2d_stationary: forcing must be divergence-free");
  return assemble_nse(prm, basis, basis->project(forcing));
}

NseEvolutionModel build_nse2d_evolution(const NseEvolutionParams& prm) {
  NseParams sp = prm.stationary;
  auto nse = build_nse2d_stationary(sp);
  const Element v0 = nse_field(*nse.basis, prm.initial);
  NseEvolutionModel model{PathProblem(nse.problem, v0, prm.horizon, prm.steps), nse.basis, nullptr, nullptr};
  if (prm.initial.name == "taylor_green" && sp.forcing.name == "zero" && sp.perturbation == 0.0) {
    const double nu = sp.nu, h = model.problem.h();
    model.exact = [v0, nu](double t) { return Element(std::exp(-2.0 * nu * t) * v0); };
    model.discrete_exact = [v0, nu, h](int k) { return Element(std::pow(1.0 + 2.0 * nu * h, -k) * v0); };
  }
  return model;
}

// ---------------------------------------------------------------------------

CoupledModel build_coupled_system_1d(const CoupledParams& prm) {
  ensure_sign_convention();
  if (prm.n < 4) throw std::invalid_argument("build_coupled_system_1d: n must be at least 4");
  if (!(prm.p > 1) || !(prm.q > 1)) throw std::invalid_argument("build_coupled_system_1d: p and q must exceed 1");
  if (prm.m < 2) throw std::invalid_argument("build_coupled_system_1d: m must be an integer >= 2");
  if (std::abs(prm.c * prm.c - 1.0) > 1e-12)
    throw std::invalid_argument("build_coupled_system_1d: the coupling is skew only for c^2 = 1");
  const int m = prm.n - 1;
  const double h = 1.0 / prm.n;
  const Vector x = Vector::LinSpaced(m, h, 1.0 - h);
  auto sp = make_space(Matrix(h * Matrix::Identity(2 * m, 2 * m)));
  const Matrix t = second_difference(m);
  const Matrix lap = -t / (h * h);
  const Matrix s1 = skew_transport(Vector::Constant(prm.n + 1, prm.b1), h);
  const Matrix s2 = skew_transport(Vector::Constant(prm.n + 1, prm.b2), h);
  Matrix bmat(2 * m, 2 * m);
  bmat << -s1, -lap, prm.c * prm.c * lap, -s2;
  Matrix e = Matrix::Zero(2 * m, 2 * m);
  e.topLeftCorner(m, m) = t / h;
  e.bottomRightCorner(m, m) = t / h;
  std::vector<ConvexFunction> terms{ConvexFunction::quadratic_form(sp, e)};
  Vector wu = Vector::Zero(2 * m), wv = Vector::Zero(2 * m);
  wu.head(m).setConstant(h);
  wv.tail(m).setConstant(h);
  if (prm.p == prm.q) {
    terms.push_back(ConvexFunction::separable_power(sp, prm.p, Vector::Constant(2 * m, h)));
  } else {
    terms.push_back(ConvexFunction::separable_power(sp, prm.p, wu));
    terms.push_back(ConvexFunction::separable_power(sp, prm.q, wv));
  }
  const auto phi = ConvexFunction::sum(terms);
  Vector force(2 * m);
  for (int i = 0; i < m; ++i) {
    force(i) = prm.f(x(i));
    force(m + i) = prm.g(x(i));
  }
  const int mm = prm.m;
  auto apply = [m, mm](const Element& z) {
    Element out(2 * m);
    for (int i = 0; i < m; ++i) {
      const double u = z(i), v = z(m + i);
      out(i) = ipow(u, mm - 1) * ipow(v, mm);
      out(m + i) = -ipow(u, mm) * ipow(v, mm - 1);
    }
    return out;
  };
  auto vjp = [m, mm](const Element& z, const Element& w) {
    Element out(2 * m);
    for (int i = 0; i < m; ++i) {
      const double u = z(i), v = z(m + i), wu_ = w(i), wv_ = w(m + i);
      const double cross = mm * ipow(u, mm - 1) * ipow(v, mm - 1);
      out(i) = (mm - 1) * ipow(u, mm - 2) * ipow(v, mm) * wu_ - cross * wv_;
      out(m + i) = cross * wu_ - (mm - 1) * ipow(u, mm) * ipow(v, mm - 2) * wv_;
    }
    return out;
  };
  StationaryProblem problem(sp, phi, LinearMap::dense(sp, bmat), ConservativeMap(sp, apply, vjp), force);

  const double p = prm.p, q = prm.q;
  auto oracle = [=]() {
    auto residual = [&](const Vector& z) -> Vector {
      Vector r(2 * m);
      r.head(m) = t * z.head(m) / (h * h);
      r.tail(m) = t * z.tail(m) / (h * h);
      for (int i = 0; i < m; ++i) {
        const double u = z(i), v = z(m + i);
        r(i) += std::pow(std::abs(u), p - 2.0) * u + ipow(u, mm - 1) * ipow(v, mm);
        r(m + i) += std::pow(std::abs(v), q - 2.0) * v - ipow(u, mm) * ipow(v, mm - 1);
      }
      return r + bmat * z + force;
    };
    auto jacobian = [&](const Vector& z) -> Matrix {
      Matrix j = bmat;
      j.topLeftCorner(m, m) += t / (h * h);
      j.bottomRightCorner(m, m) += t / (h * h);
      for (int i = 0; i < m; ++i) {
        const double u = z(i), v = z(m + i);
        j(i, i) += (p - 1.0) * std::pow(std::abs(u), p - 2.0) + (mm - 1) * ipow(u, mm - 2) * ipow(v, mm);
        j(i, m + i) += mm * ipow(u, mm - 1) * ipow(v, mm - 1);
        j(m + i, i) += -mm * ipow(u, mm - 1) * ipow(v, mm - 1);
        j(m + i, m + i) += (q - 1.0) * std::pow(std::abs(v), q - 2.0) - (mm - 1) * ipow(u, mm) * ipow(v, mm - 2);
      }
      return j;
    };
    return newton_system(residual, jacobian, Vector::Zero(2 * m), 1e-12 * (1.0 + force.norm()));
  };
  return {problem, x, oracle};
}

}  // namespace asdvar
