#include "effdiff/system.hpp"

#include <cmath>

#include "effdiff/errors.hpp"

namespace effdiff {

SystemParams SystemParams::standard_dimer(int n_particles, double density) {
  SystemParams p;
  p.n_particles = n_particles;
  p.box_len = std::sqrt(n_particles / density);
  p.r0 = std::pow(2.0, 1.0 / 6.0) * p.r_cap;
  return p;
}

void SystemParams::validate() const {
  if (n_particles < 2) throw ConfigError("system needs at least the two dimer particles");
  if (!(box_len > 0) || !(beta > 0) || !(eps > 0) || !(r_cap > 0) || !(r0 > 0) || !(w > 0) ||
      !(barrier_h > 0))
    throw ConfigError("system lengths and energies must be strictly positive");
}

double wrap_coord(double x, double box_len) {
  double y = x - box_len * std::floor(x / box_len);
  // floor can round x/L up to an integer for tiny negative x
  if (y >= box_len) y -= box_len;
  if (y < 0.0) y = 0.0;
  return y;
}

void wrap(Vector& q, double box_len) {
  for (Eigen::Index i = 0; i < q.size(); ++i) q[i] = wrap_coord(q[i], box_len);
}

double min_image_1d(double dx, double box_len) {
  double y = dx - box_len * std::floor(dx / box_len + 0.5);
  if (y >= 0.5 * box_len) y -= box_len;
  return y;
}

Vec2 min_image(const Vec2& qi, const Vec2& qj, double box_len) {
  return {min_image_1d(qi[0] - qj[0], box_len), min_image_1d(qi[1] - qj[1], box_len)};
}

double wca(const SystemParams& p, double r) {
  if (!(r > 0)) throw std::domain_error("wca: distance must be positive");
  if (r >= p.r0) return 0.0;
  const double s6 = std::pow(p.r_cap / r, 6);
  return 4.0 * p.eps * (s6 * s6 - s6) + p.eps;
}

double wca_deriv(const SystemParams& p, double r) {
  if (!(r > 0)) throw std::domain_error("wca_deriv: distance must be positive");
  if (r >= p.r0) return 0.0;
  const double s6 = std::pow(p.r_cap / r, 6);
  return 4.0 * p.eps * (-12.0 * s6 * s6 + 6.0 * s6) / r;
}

double dw(const SystemParams& p, double r) {
  if (!(r > 0)) throw std::domain_error("dw: distance must be positive");
  const double u = (r - p.r0 - p.w) / p.w;
  const double s = 1.0 - u * u;
  return p.barrier_h * s * s;
}

double dw_deriv(const SystemParams& p, double r) {
  if (!(r > 0)) throw std::domain_error("dw_deriv: distance must be positive");
  const double u = (r - p.r0 - p.w) / p.w;
  return -4.0 * p.barrier_h * (1.0 - u * u) * u / p.w;
}

namespace {

// Inlined WCA kernel on squared distance; returns (energy, dV/dr / r).
inline void wca_pair(const SystemParams& p, double r2, double r0sq, double& e, double& fr) {
  if (r2 >= r0sq) {
    e = 0.0;
    fr = 0.0;
    return;
  }
  const double inv2 = p.r_cap * p.r_cap / r2;
  const double s6 = inv2 * inv2 * inv2;
  e = 4.0 * p.eps * (s6 * s6 - s6) + p.eps;
  fr = 4.0 * p.eps * (-12.0 * s6 * s6 + 6.0 * s6) / r2;
}

}  // namespace

double energy_and_gradient(const SystemParams& p, const Vector& q, Vector& grad) {
  const int n = p.n_particles;
  const double L = p.box_len;
  const double r0sq = p.r0 * p.r0;
  grad.setZero(p.dim());
  double v = 0.0;
  for (int i = 0; i < n; ++i) {
    const double xi = q[2 * i], yi = q[2 * i + 1];
    for (int j = i + 1; j < n; ++j) {
      const double dx = min_image_1d(xi - q[2 * j], L);
      const double dy = min_image_1d(yi - q[2 * j + 1], L);
      const double r2 = dx * dx + dy * dy;
      double e, fr;
      if (i == 0 && j == 1) {
        const double r = std::sqrt(r2);
        if (r == 0.0) throw NumericalError("dimer particles coincide");
        e = dw(p, r);
        fr = dw_deriv(p, r) / r;
      } else {
        if (r2 == 0.0) throw NumericalError("coincident particles");
        wca_pair(p, r2, r0sq, e, fr);
      }
      v += e;
      grad[2 * i] += fr * dx;
      grad[2 * i + 1] += fr * dy;
      grad[2 * j] -= fr * dx;
      grad[2 * j + 1] -= fr * dy;
    }
  }
  return v;
}

double potential_energy(const SystemParams& p, const Vector& q) {
  const int n = p.n_particles;
  double v = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double r = min_image(particle(q, i), particle(q, j), p.box_len).norm();
      v += (i == 0 && j == 1) ? dw(p, r) : wca(p, r);
    }
  }
  return v;
}

Vector potential_gradient(const SystemParams& p, const Vector& q) {
  Vector g;
  energy_and_gradient(p, q, g);
  return g;
}

Vector lattice_config(const SystemParams& p) {
  const int n = p.n_particles;
  const double a = p.box_len / std::sqrt(static_cast<double>(n));
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  Vector q(p.dim());
  for (int i = 0; i < n; ++i) {
    q[2 * i] = a * (0.5 + i / side);
    q[2 * i + 1] = a * (0.5 + i % side);
  }
  q[3] = q[1] + p.r0;
  wrap(q, p.box_len);
  return q;
}

// ---------------------------------------------------------------------------

Vector CvEval::full_grad(int dim) const {
  Vector g = Vector::Zero(dim);
  g.head(block()) = grad;
  return g;
}

Matrix CvEval::full_hess(int dim) const {
  Matrix h = Matrix::Zero(dim, dim);
  h.topLeftCorner(block(), block()) = hess;
  return h;
}

double DimerBondCv::value(const Vector& q) const {
  const double r = min_image(particle(q, 0), particle(q, 1), box_len_).norm();
  return (r - r0_) / (2.0 * w_);
}

CvEval DimerBondCv::eval(const Vector& q) const {
  const Vec2 delta = min_image(particle(q, 0), particle(q, 1), box_len_);
  const double r = delta.norm();
  if (r == 0.0) throw SingularCvError("dimer particles coincide; collective variable is singular");
  const double c = 1.0 / (2.0 * w_ * r);
  CvEval out;
  out.value = (r - r0_) / (2.0 * w_);
  out.grad.resize(4);
  out.grad << c * delta[0], c * delta[1], -c * delta[0], -c * delta[1];
  const Eigen::Matrix2d b =
      c * (Eigen::Matrix2d::Identity() - delta * delta.transpose() / (r * r));
  out.hess.resize(4, 4);
  out.hess.topLeftCorner<2, 2>() = b;
  out.hess.topRightCorner<2, 2>() = -b;
  out.hess.bottomLeftCorner<2, 2>() = -b;
  out.hess.bottomRightCorner<2, 2>() = b;
  out.grad_norm_sq = 1.0 / (2.0 * w_ * w_);
  out.laplacian = 1.0 / (w_ * r);
  return out;
}

}  // namespace effdiff
