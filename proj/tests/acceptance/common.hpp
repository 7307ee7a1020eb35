#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "effdiff/harness.hpp"
#include "effdiff/ti.hpp"

namespace effdiff::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  std::uint64_t seed = 1;
  double ti_time = 5.0;  // per level; the full-length protocol is 125
};

/// Lazily computed inputs shared by several criteria.
class Shared {
 public:
  explicit Shared(Options opt) : opt_(opt) {}

  const Options& options() const { return opt_; }

  /// Reference TI run on the default grid.
  const TiResult& ti();
  /// Setup with the TI mean force as the latent model (sigma = 1).
  SchemeSetup ti_setup();
  /// Cells are cached so two criteria can share a run.
  const SweepCell& cell(Scheme scheme, double alpha, double dt, std::int64_t k, bool adaptive = false);

 private:
  Options opt_;
  std::optional<TiResult> ti_;
  std::shared_ptr<const LatentModel> model_;
  std::map<std::string, SweepCell> cells_;
};

Outcome derivatives(Shared&);
Outcome matrix_identities(Shared&);
Outcome newton_block_dense(Shared&);
Outcome gsv_reversibility(Shared&);
Outcome ti_constraint(Shared&);
Outcome ou_stationary(Shared&);
Outcome two_particle_histograms(Shared&);
Outcome drift_noise_relation(Shared&);
Outcome mala_speedup(Shared&);
Outcome rmghmc_speedup(Shared&);
Outcome adaptive_matches(Shared&);
Outcome scaling_exponents(Shared&);
Outcome rejection_table(Shared&);
Outcome adaptive_free_energy(Shared&);
Outcome ti_compact_state(Shared&);

/// alpha with alpha * beta * h equal to abh on the default system.
double alpha_for(double abh);

std::string fmt(double x, int digits = 3);

inline Vector gaussian_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

}  // namespace effdiff::acceptance
