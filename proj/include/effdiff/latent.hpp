#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "effdiff/system.hpp"

namespace effdiff {

/// Uniform binning of [z_min, z_max); bins are left-closed, right-open.
struct LatentGrid {
  double z_min = -0.2;
  double z_max = 1.225;
  int n_bins = 100;

  static constexpr int kOutside = -1;

  double width() const { return (z_max - z_min) / n_bins; }
  double center(int i) const { return z_min + (i + 0.5) * width(); }
  int bin_index(double z) const;
  void validate() const;
  bool operator==(const LatentGrid& o) const = default;
};

/// Per-bin running sums and visit counts of one observable.
class BinnedEstimator {
 public:
  BinnedEstimator() = default;
  BinnedEstimator(const LatentGrid& grid, double default_value);

  void accumulate(double z, double value);

  const LatentGrid& grid() const { return grid_; }
  std::int64_t count(int bin) const { return counts_[bin]; }
  double sum(int bin) const { return sums_[bin]; }
  /// sum / count, or the default when count < n_min (or count == 0).
  double estimate(int bin, std::int64_t n_min = 1) const;
  double default_value() const { return default_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }

 private:
  LatentGrid grid_;
  std::vector<double> sums_;
  std::vector<std::int64_t> counts_;
  double default_ = 0.0;
};

/// Piecewise-constant grid function with a constant value outside the grid.
struct Profile {
  LatentGrid grid;
  std::vector<double> values;
  std::vector<std::int64_t> counts;  // optional; empty when not tracked
  double outside = 0.0;

  Profile() = default;
  Profile(const LatentGrid& g, double fill, double outside_value);

  double operator()(double z) const;
  void validate() const;

  static Profile from_estimator(const BinnedEstimator& est, std::int64_t n_min);
};

/// Free energy consistent with a piecewise-constant mean force: continuous,
/// piecewise linear with slope F'_i in bin i, constant outside the grid.
/// Stored values are at bin centers and their minimum is 0.
class FreeEnergy {
 public:
  FreeEnergy() = default;
  explicit FreeEnergy(const Profile& mean_force);

  double operator()(double z) const;
  /// Derivative of operator(); 0 outside the grid.
  double derivative(double z) const;

  const LatentGrid& grid() const { return mean_force_.grid; }
  const Profile& mean_force() const { return mean_force_; }
  /// Bin-center values as a Profile (outside value = nearest edge value).
  const Profile& centers() const { return centers_; }

 private:
  Profile mean_force_;
  Profile centers_;
  double left_edge_ = 0.0;
  double right_edge_ = 0.0;
};

/// Cumulative integral of a mean-force profile, min-shifted to 0.
FreeEnergy integrate_mean_force(const Profile& mean_force);

/// Latent quantities feeding the diffusion: F, F', sigma^2 and b.
class LatentModel {
 public:
  virtual ~LatentModel() = default;
  virtual double free_energy(double z) const = 0;
  virtual double mean_force(double z) const = 0;
  virtual double eff_diffusion(double z) const = 0;
  virtual double eff_drift(double z) const = 0;
  /// Nodes used by the left-Riemann rule for normalization integrals.
  virtual const LatentGrid& grid() const = 0;
};

class ProfileModel final : public LatentModel {
 public:
  /// Flat model: F = 0, sigma^2 = 1, b = 0.
  explicit ProfileModel(const LatentGrid& grid);
  ProfileModel(const Profile& mean_force, Profile sigma2, Profile drift);
  explicit ProfileModel(const Profile& mean_force);

  double free_energy(double z) const override { return fe_(z); }
  double mean_force(double z) const override { return fe_.derivative(z); }
  double eff_diffusion(double z) const override { return sigma2_(z); }
  double eff_drift(double z) const override { return drift_(z); }
  const LatentGrid& grid() const override { return fe_.grid(); }

  const FreeEnergy& fe() const { return fe_; }
  const Profile& sigma2() const { return sigma2_; }
  const Profile& drift() const { return drift_; }

 private:
  FreeEnergy fe_;
  Profile sigma2_;
  Profile drift_;
};

class AnalyticModel final : public LatentModel {
 public:
  using Fn = std::function<double(double)>;
  AnalyticModel(LatentGrid grid, Fn f, Fn fprime, Fn sigma2, Fn drift)
      : grid_(grid), f_(std::move(f)), fp_(std::move(fprime)), s2_(std::move(sigma2)),
        b_(std::move(drift)) {}

  double free_energy(double z) const override { return f_(z); }
  double mean_force(double z) const override { return fp_(z); }
  double eff_diffusion(double z) const override { return s2_(z); }
  double eff_drift(double z) const override { return b_(z); }
  const LatentGrid& grid() const override { return grid_; }

 private:
  LatentGrid grid_;
  Fn f_, fp_, s2_, b_;
};

// ---------------------------------------------------------------------------
// Conditional-expectation integrands

/// f = grad V . grad xi / |grad xi|^2 - beta^-1 div(grad xi / |grad xi|^2).
/// The fast path assumes |grad xi| constant.
double local_mean_force(double beta, const Vector& grad_v, const CvEval& cv, bool fast_path);

/// -grad V . grad xi + beta^-1 Laplacian xi.
double effective_drift_integrand(double beta, const Vector& grad_v, const CvEval& cv);

inline double effective_noise_integrand(const CvEval& cv) { return cv.grad_norm_sq; }

/// Euler-Maruyama step of the effective dynamics modulated by a(z).
/// a_fn returns (a(z), a'(z)).
double effective_sde_step(double z, const std::function<std::pair<double, double>(double)>& a_fn,
                          const LatentModel& model, double beta, double dt, double noise);

}  // namespace effdiff
