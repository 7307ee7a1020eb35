#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "effdiff/latent.hpp"
#include "effdiff/random.hpp"

namespace effdiff {

struct TiConfig {
  LatentGrid grid;
  double dt = 2.5e-5;
  double sim_time_per_level = 125.0;
  double burn_in_fraction = 0.05;
  int n_batches = 20;
  std::uint64_t seed = 0;

  std::int64_t steps_per_level() const;
  void validate() const;
};

struct TiLevel {
  double z = 0.0;
  double mean_force = 0.0;
  double mean_force_se = 0.0;  // batch-means standard error
  double drift = 0.0;          // conditional mean of -grad V . grad xi + Laplacian xi / beta
  double drift_se = 0.0;
  double noise = 0.0;          // conditional mean of |grad xi|^2
  std::int64_t samples = 0;
  std::int64_t folds = 0;      // moves refused because the projected bond would fold
};

struct TiResult {
  std::vector<TiLevel> levels;
  Profile mean_force;
  Profile mean_force_se;
  Profile drift;
  Profile noise;
  FreeEnergy free_energy;
};

/// Constrained predictor-corrector move on {xi = z} for the dimer CV.
/// Returns false (leaving out untouched) when the projected dimer bond does
/// not fit the minimum-image cell, i.e. the projection cannot hit the level.
/// Throws SingularCvError when the predicted dimer particles coincide.
bool constrained_step(const SystemParams& sys, const DimerBondCv& cv, const Vector& q, double z,
                      double dt, const Vector& gauss, Vector& out, double* dlambda = nullptr);

/// Projection part only: moves the dimer of q_pred onto {xi = z}, keeping its
/// center of mass. Returns false when the result would fold.
bool project_dimer(const SystemParams& sys, const DimerBondCv& cv, Vector& q_pred, double z,
                   double* dlambda = nullptr);

/// Moves an arbitrary configuration onto {xi = z} by moving dimer particle 1:
/// along the bond when the new length fits the minimum-image cell, otherwise
/// with the smallest rotation that makes it fit.
Vector warm_start(const SystemParams& sys, const DimerBondCv& cv, const Vector& q, double z);

/// First configuration: lattice with the dimer stretched to level z.
Vector ti_initial_config(const SystemParams& sys, double z);

using TiProgress = std::function<void(int level, const TiLevel&)>;

TiResult ti_run(const SystemParams& sys, const TiConfig& cfg, const TiProgress& progress = {});

}  // namespace effdiff
