#pragma once

#include <memory>
#include <vector>

#include "effdiff/linalg.hpp"

namespace effdiff {

/// Physical and box constants of the dimer-in-solvent system.
struct SystemParams {
  int n_particles = 16;
  double box_len = 0.0;  // set by standard_dimer() or by the caller
  double beta = 1.0;
  double eps = 1.0;
  double r_cap = 1.0;
  double r0 = 0.0;
  double w = 0.7;
  double barrier_h = 2.0;

  int dim() const { return 2 * n_particles; }

  /// Standard preset: N particles at density 0.7, r0 = 2^{1/6} R.
  static SystemParams standard_dimer(int n_particles = 16, double density = 0.7);

  /// Throws ConfigError on nonpositive lengths/energies or N < 2.
  void validate() const;
};

/// Reduce every coordinate into [0, box_len).
void wrap(Vector& q, double box_len);
double wrap_coord(double x, double box_len);

/// Representative of qi - qj with each component in [-box_len/2, box_len/2).
Vec2 min_image(const Vec2& qi, const Vec2& qj, double box_len);
double min_image_1d(double dx, double box_len);

inline Vec2 particle(const Vector& q, int i) { return {q[2 * i], q[2 * i + 1]}; }

double wca(const SystemParams& p, double r);
double wca_deriv(const SystemParams& p, double r);
double dw(const SystemParams& p, double r);
double dw_deriv(const SystemParams& p, double r);

/// Double-well on the dimer pair (0,1) plus WCA on every other pair.
double potential_energy(const SystemParams& p, const Vector& q);

/// Energy and gradient in one pass. grad is resized to dim().
double energy_and_gradient(const SystemParams& p, const Vector& q, Vector& grad);

Vector potential_gradient(const SystemParams& p, const Vector& q);

/// Canonical start: solvent on a square lattice, dimer compact (xi = 0).
Vector lattice_config(const SystemParams& p);

// ---------------------------------------------------------------------------
// Collective variables

/// Value and derivatives of a scalar CV that depends only on the leading
/// block_size coordinates.
struct CvEval {
  double value = 0.0;
  BlockVector grad;  // leading block of the full gradient
  BlockMatrix hess;  // leading block of the full Hessian
  double grad_norm_sq = 0.0;
  double laplacian = 0.0;

  int block() const { return static_cast<int>(grad.size()); }
  Vector full_grad(int dim) const;
  Matrix full_hess(int dim) const;
};

class CollectiveVariable {
 public:
  virtual ~CollectiveVariable() = default;
  virtual CvEval eval(const Vector& q) const = 0;
  virtual int block_size() const = 0;
  /// True when the gradient norm does not depend on q; enables the reduced
  /// divergence / Hamiltonian gradient formulas.
  virtual bool constant_grad_norm() const { return false; }
};

/// Normalized dimer bond length (|q1 - q0| - r0) / (2w).
class DimerBondCv final : public CollectiveVariable {
 public:
  explicit DimerBondCv(const SystemParams& p) : box_len_(p.box_len), r0_(p.r0), w_(p.w) {}

  CvEval eval(const Vector& q) const override;
  int block_size() const override { return 4; }
  bool constant_grad_norm() const override { return true; }

  double value(const Vector& q) const;
  double bond_length(double z) const { return r0_ + 2.0 * w_ * z; }

 private:
  double box_len_, r0_, w_;
};

}  // namespace effdiff
