#include "effdiff/diffusion.hpp"

#include <cmath>
#include <sstream>

#include "effdiff/errors.hpp"

namespace effdiff {

AValue DiffusionSpec::a_alpha(double z) const {
  const double f = model->free_energy(z);
  const double expo = alpha * beta * f;
  if (!(expo <= kMaxExponent)) {
    std::ostringstream msg;
    msg << "diffusion overflow: alpha*beta*F(" << z << ") = " << expo << "; reduce alpha";
    throw NumericalError(msg.str());
  }
  const double e = std::exp(expo);
  AValue out;
  if (sigma == SigmaConvention::Unit) {
    out.a = e;
    out.prime = alpha * beta * model->mean_force(z) * e;
  } else {
    const double s2 = model->eff_diffusion(z);
    out.a = e / s2;
    out.prime = beta * e / (s2 * s2) * ((alpha - 1.0) * s2 * model->mean_force(z) - model->eff_drift(z));
  }
  if (!std::isfinite(out.a) || !std::isfinite(out.prime) || !(out.a > 0))
    throw NumericalError("diffusion factor is not finite and positive");
  return out;
}

void DiffusionSpec::validate() const {
  if (!model) throw ConfigError("diffusion needs a latent model");
  if (!(kappa > 0) || !std::isfinite(kappa)) throw ConfigError("kappa must be positive");
  if (!(beta > 0)) throw ConfigError("beta must be positive");
}

Matrix projector(const CvEval& cv, int dim) {
  const Vector g = cv.full_grad(dim);
  return g * g.transpose() / cv.grad_norm_sq;
}

BlockVector divergence(const DiffusionSpec& spec, const CvEval& cv, const AValue& a, bool fast_path) {
  const double s = cv.grad_norm_sq;
  const double am1 = a.a - 1.0;
  BlockVector out = (spec.kappa * (am1 * cv.laplacian / s + a.prime)) * cv.grad;
  if (!fast_path) {
    const BlockVector hg = cv.hess * cv.grad;
    out += spec.kappa * am1 * (hg / s - (2.0 * cv.grad.dot(hg) / (s * s)) * cv.grad);
  }
  return out;
}

DiffusionEval eval_diffusion(const DiffusionSpec& spec, const CvEval& cv, int dim, bool fast_path) {
  DiffusionEval ev;
  const AValue a = spec.a_alpha(cv.value);
  ev.a = a.a;
  ev.a_prime = a.prime;
  const double k = spec.kappa;
  const double sa = std::sqrt(a.a);
  ev.d = {k, a.a - 1.0};
  ev.sqrt = {std::sqrt(k), sa - 1.0};
  ev.inv = {1.0 / k, 1.0 / a.a - 1.0};
  ev.inv_sqrt = {1.0 / std::sqrt(k), 1.0 / sa - 1.0};
  ev.log_det = dim * std::log(k) + std::log(a.a);
  ev.divergence = divergence(spec, cv, a, fast_path);
  return ev;
}

void apply(const Structured& m, const CvEval& cv, const Vector& v, Vector& out) {
  const int k = cv.block();
  const double c = m.coef * v.head(k).dot(cv.grad) / cv.grad_norm_sq;
  out = m.scale * v;
  out.head(k) += (m.scale * c) * cv.grad;
}

Vector apply(const Structured& m, const CvEval& cv, const Vector& v) {
  Vector out;
  apply(m, cv, v, out);
  return out;
}

double quadratic_form(const Structured& m, const CvEval& cv, const Vector& v) {
  const double gv = v.head(cv.block()).dot(cv.grad);
  return m.scale * (v.squaredNorm() + m.coef * gv * gv / cv.grad_norm_sq);
}

Matrix dense(const Structured& m, const CvEval& cv, int dim) {
  return m.scale * (Matrix::Identity(dim, dim) + m.coef * projector(cv, dim));
}

double kappa_alpha(const DiffusionSpec& spec, int dim) {
  const LatentGrid& g = spec.model->grid();
  const double dz = g.width();
  double integral = 0.0;
  for (int i = 0; i < g.n_bins; ++i) {
    const double z = g.center(i);
    const double a = spec.a_alpha(z).a;
    integral += std::sqrt(dim - 1.0 + a * a) * std::exp(-spec.beta * spec.model->free_energy(z)) * dz;
  }
  if (!(integral > 0) || !std::isfinite(integral))
    throw NumericalError("normalization integral is not finite and positive");
  return 1.0 / integral;
}

}  // namespace effdiff
