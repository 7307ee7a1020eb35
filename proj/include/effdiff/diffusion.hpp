#pragma once

#include <memory>

#include "effdiff/latent.hpp"

namespace effdiff {

enum class SigmaConvention {
  Unit,   // sigma^2 = 1; a' = alpha beta F' a
  Exact,  // sigma^2 and b taken from the latent model
};

struct AValue {
  double a = 1.0;
  double prime = 0.0;
};

/// D(q) = kappa (I + (a(xi(q)) - 1) P(q)), a(z) = exp(alpha beta F(z)) / sigma^2(z).
struct DiffusionSpec {
  double alpha = 0.0;
  double beta = 1.0;
  double kappa = 1.0;
  std::shared_ptr<const LatentModel> model;
  SigmaConvention sigma = SigmaConvention::Unit;

  /// Throws NumericalError when alpha beta F(z) exceeds kMaxExponent.
  AValue a_alpha(double z) const;
  void validate() const;

  static constexpr double kMaxExponent = 700.0;
};

/// Matrix s (I + c P): every derived matrix of D shares this form.
struct Structured {
  double scale = 1.0;
  double coef = 0.0;
};

struct DiffusionEval {
  double a = 1.0;
  double a_prime = 0.0;
  Structured d, sqrt, inv, inv_sqrt;
  double log_det = 0.0;
  BlockVector divergence;  // leading CV block; zero elsewhere
};

/// Rank-one projector onto grad xi.
Matrix projector(const CvEval& cv, int dim);

DiffusionEval eval_diffusion(const DiffusionSpec& spec, const CvEval& cv, int dim, bool fast_path);

/// Block part of div D; the remaining components are zero.
BlockVector divergence(const DiffusionSpec& spec, const CvEval& cv, const AValue& a, bool fast_path);

/// out = M v for M = scale (I + coef P).
void apply(const Structured& m, const CvEval& cv, const Vector& v, Vector& out);
Vector apply(const Structured& m, const CvEval& cv, const Vector& v);
/// v^T M v without forming M v.
double quadratic_form(const Structured& m, const CvEval& cv, const Vector& v);

Matrix dense(const Structured& m, const CvEval& cv, int dim);

/// Left-Riemann (bin centers) approximation of
/// (int sqrt(d - 1 + a(z)^2) exp(-beta F(z)) dz)^-1 over the model grid.
double kappa_alpha(const DiffusionSpec& spec, int dim);

}  // namespace effdiff
