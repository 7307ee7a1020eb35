#include "effdiff/latent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "effdiff/errors.hpp"

namespace effdiff {

int LatentGrid::bin_index(double z) const {
  if (!(z >= z_min) || !(z < z_max)) return kOutside;
  const int i = static_cast<int>(std::floor((z - z_min) / width()));
  return std::min(i, n_bins - 1);
}

void LatentGrid::validate() const {
  if (!(z_min < z_max)) throw ConfigError("latent grid requires z_min < z_max");
  if (n_bins < 1) throw ConfigError("latent grid requires at least one bin");
}

BinnedEstimator::BinnedEstimator(const LatentGrid& grid, double default_value)
    : grid_(grid), sums_(grid.n_bins, 0.0), counts_(grid.n_bins, 0), default_(default_value) {
  grid.validate();
}

void BinnedEstimator::accumulate(double z, double value) {
  const int i = grid_.bin_index(z);
  if (i == LatentGrid::kOutside) return;
  sums_[i] += value;
  ++counts_[i];
}

double BinnedEstimator::estimate(int bin, std::int64_t n_min) const {
  const std::int64_t c = counts_[bin];
  if (c == 0 || c < n_min) return default_;
  return sums_[bin] / static_cast<double>(c);
}

Profile::Profile(const LatentGrid& g, double fill, double outside_value)
    : grid(g), values(g.n_bins, fill), outside(outside_value) {}

double Profile::operator()(double z) const {
  const int i = grid.bin_index(z);
  return i == LatentGrid::kOutside ? outside : values[i];
}

void Profile::validate() const {
  grid.validate();
  if (static_cast<int>(values.size()) != grid.n_bins)
    throw ConfigError("profile has " + std::to_string(values.size()) + " values for " +
                      std::to_string(grid.n_bins) + " bins");
  for (double v : values)
    if (!std::isfinite(v)) throw ConfigError("profile contains non-finite values");
}

Profile Profile::from_estimator(const BinnedEstimator& est, std::int64_t n_min) {
  Profile p(est.grid(), est.default_value(), est.default_value());
  p.counts = est.counts();
  for (int i = 0; i < est.grid().n_bins; ++i) p.values[i] = est.estimate(i, n_min);
  return p;
}

FreeEnergy::FreeEnergy(const Profile& mean_force) : mean_force_(mean_force) {
  mean_force_.validate();
  const LatentGrid& g = mean_force_.grid;
  const double dz = g.width();
  centers_ = Profile(g, 0.0, 0.0);
  centers_.counts = mean_force_.counts;
  double acc = 0.0;  // F at the left edge of bin i
  for (int i = 0; i < g.n_bins; ++i) {
    centers_.values[i] = acc + 0.5 * dz * mean_force_.values[i];
    acc += dz * mean_force_.values[i];
  }
  const double shift = *std::min_element(centers_.values.begin(), centers_.values.end());
  for (double& v : centers_.values) v -= shift;
  left_edge_ = centers_.values.front() - 0.5 * dz * mean_force_.values.front();
  right_edge_ = centers_.values.back() + 0.5 * dz * mean_force_.values.back();
  mean_force_.outside = 0.0;
  centers_.outside = 0.0;
}

double FreeEnergy::operator()(double z) const {
  const LatentGrid& g = mean_force_.grid;
  if (z < g.z_min) return left_edge_;
  const int i = g.bin_index(z);
  if (i == LatentGrid::kOutside) return right_edge_;
  return centers_.values[i] + mean_force_.values[i] * (z - g.center(i));
}

double FreeEnergy::derivative(double z) const { return mean_force_(z); }

FreeEnergy integrate_mean_force(const Profile& mean_force) { return FreeEnergy(mean_force); }

ProfileModel::ProfileModel(const LatentGrid& grid)
    : fe_(Profile(grid, 0.0, 0.0)), sigma2_(grid, 1.0, 1.0), drift_(grid, 0.0, 0.0) {}

ProfileModel::ProfileModel(const Profile& mean_force)
    : fe_(mean_force), sigma2_(mean_force.grid, 1.0, 1.0), drift_(mean_force.grid, 0.0, 0.0) {}

ProfileModel::ProfileModel(const Profile& mean_force, Profile sigma2, Profile drift)
    : fe_(mean_force), sigma2_(std::move(sigma2)), drift_(std::move(drift)) {
  sigma2_.validate();
  drift_.validate();
  if (!(sigma2_.grid == mean_force.grid) || !(drift_.grid == mean_force.grid))
    throw ConfigError("latent profiles must share one grid");
  for (double v : sigma2_.values)
    if (!(v > 0)) throw ConfigError("effective diffusion profile must be positive");
  if (!(sigma2_.outside > 0)) throw ConfigError("effective diffusion must be positive");
}

double local_mean_force(double beta, const Vector& grad_v, const CvEval& cv, bool fast_path) {
  const int k = cv.block();
  const double s = cv.grad_norm_sq;
  const double proj = grad_v.head(k).dot(cv.grad);
  double div = cv.laplacian / s;
  if (!fast_path) div -= 2.0 * cv.grad.dot(cv.hess * cv.grad) / (s * s);
  return proj / s - div / beta;
}

double effective_drift_integrand(double beta, const Vector& grad_v, const CvEval& cv) {
  return -grad_v.head(cv.block()).dot(cv.grad) + cv.laplacian / beta;
}

double effective_sde_step(double z, const std::function<std::pair<double, double>(double)>& a_fn,
                          const LatentModel& model, double beta, double dt, double noise) {
  const auto [a, ap] = a_fn(z);
  const double s2 = model.eff_diffusion(z);
  const double drift = a * model.eff_drift(z) + ap * s2 / beta;
  return z + drift * dt + std::sqrt(2.0 * dt / beta * a * s2) * noise;
}

}  // namespace effdiff
