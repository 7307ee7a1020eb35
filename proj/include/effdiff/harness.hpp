#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "effdiff/kinetic.hpp"
#include "effdiff/overdamped.hpp"

namespace effdiff {

enum class Basin { C0, C1, Neither };

struct MetastableClassifier {
  double eta = 0.1;

  Basin classify(double xi) const {
    if (xi < eta) return Basin::C0;
    if (xi > 1.0 - eta) return Basin::C1;
    return Basin::Neither;
  }
  void validate() const;
};

struct TransitionResult {
  std::vector<std::int64_t> tau;  // one entry per observed transition
  double tau_hat = 0.0;
  double std_dev = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::int64_t iterations = 0;
  bool complete = false;  // false when max_iterations stopped the run early
};

/// Summary statistics over a set of transition durations (normal 95% CI).
void summarize(TransitionResult& r);

/// Advances a chain one MH cycle per call and returns xi afterwards. Starting
/// from label 0, records the iterations needed for each alternating entry
/// into C1, C0, C1, ... until k_target transitions (or max_iterations if > 0).
TransitionResult run_transition_experiment(const std::function<double()>& advance,
                                           std::int64_t k_target,
                                           const MetastableClassifier& cls = {},
                                           std::int64_t max_iterations = 0);

// ---------------------------------------------------------------------------
// Schemes

enum class Scheme { Mala, AdaptiveMala, Rmhmc, Rmghmc };

const char* scheme_name(Scheme s);
Scheme parse_scheme(const std::string& s);
bool is_kinetic(Scheme s);

/// Default step-size interval and alpha*beta*h range per scheme.
struct SchemeGrid {
  double dt_min = 0.0;
  double dt_max = 0.0;
  int n_dt = 16;
  double abh_max = 0.0;
  double abh_step = 0.1;

  std::vector<double> dts() const;
  std::vector<double> abh_values() const;
};
SchemeGrid default_grid(Scheme s);

/// n points evenly spaced in log between a and b, endpoints exact.
std::vector<double> logspace(double a, double b, int n);

/// Everything needed to build a chain for one (alpha, dt) cell.
struct SchemeSetup {
  SystemParams sys = SystemParams::standard_dimer();
  /// Reference latent model; may be null for alpha = 0 overdamped runs and
  /// for adaptive runs.
  std::shared_ptr<const LatentModel> model;
  SigmaConvention sigma = SigmaConvention::Unit;
  bool adaptive = false;  // learn the profiles on the fly
  LearnerParams learner;
  NewtonParams newton;
  double gamma = 1.0;
  /// Initial configuration; defaults to the lattice start when empty.
  Vector q0;

  Vector start() const { return q0.size() ? q0 : lattice_config(sys); }
};

/// Diffusion spec with kappa from the left-Riemann rule over the model grid.
DiffusionSpec make_diffusion(const SchemeSetup& setup, double alpha);

std::unique_ptr<Chain> make_chain(Scheme scheme, const SchemeSetup& setup, double alpha, double dt,
                                  std::uint64_t seed);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepCell {
  Scheme scheme = Scheme::Mala;
  double alpha = 0.0;
  double dt = 0.0;
  TransitionResult result;
  double accept_rate = 0.0;
  bool failed = false;
  std::string error;
};

struct SweepConfig {
  Scheme scheme = Scheme::Mala;
  std::vector<double> alphas;
  std::vector<double> dts;
  std::int64_t k_target = 100000;
  std::int64_t max_iterations = 0;  // per cell; 0 means unlimited
  std::uint64_t seed = 0;
  int threads = 1;
  MetastableClassifier classifier;
};

std::uint64_t cell_seed(std::uint64_t base, Scheme s, double alpha, double dt);

SweepCell run_cell(const SchemeSetup& setup, Scheme scheme, double alpha, double dt,
                   std::int64_t k_target, std::uint64_t seed, const MetastableClassifier& cls = {},
                   std::int64_t max_iterations = 0);

/// Cells ordered alpha-major, dt-minor.
std::vector<SweepCell> sweep(const SchemeSetup& setup, const SweepConfig& cfg,
                             const std::function<void(const SweepCell&)>& on_cell = {});

/// Minimum tau_hat over the non-failed cells of one alpha; NaN if none.
double tau_star(const std::vector<SweepCell>& cells, double alpha);

// ---------------------------------------------------------------------------
// Rejection decomposition

struct RejectionBreakdown {
  std::array<std::int64_t, kNumOutcomes> counts{};
  std::int64_t trials = 0;

  void add(StepOutcome o) {
    ++counts[static_cast<int>(o)];
    ++trials;
  }
  std::int64_t count(StepOutcome o) const { return counts[static_cast<int>(o)]; }
  double percent(StepOutcome o) const;
  double global_percent() const;
};

/// One step from the same start configuration per trial (the chain is reset
/// to the start before each trial).
RejectionBreakdown rejection_stats(const SchemeSetup& setup, Scheme scheme, double alpha, double dt,
                                   std::int64_t trials, std::uint64_t seed);

}  // namespace effdiff
