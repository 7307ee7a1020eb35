#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "effdiff/diffusion.hpp"
#include "effdiff/random.hpp"

namespace effdiff {

/// Everything a sampler needs to evaluate the target and the diffusion.
struct SamplerContext {
  SystemParams sys;
  std::shared_ptr<const CollectiveVariable> cv;
  DiffusionSpec diff;

  int dim() const { return sys.dim(); }
  bool fast_path() const { return cv->constant_grad_norm(); }
  void validate() const;
};

/// Outcome of one MH cycle. Failure causes only arise in the kinetic schemes.
enum class StepOutcome : std::uint8_t {
  Accepted,
  Metropolis,
  FailFwdMomenta,
  FailFwdPosition,
  FailBwdMomenta,
  FailBwdPosition,
  FailReversibility,
};
inline constexpr int kNumOutcomes = 7;
const char* outcome_name(StepOutcome o);

/// On-the-fly binned estimates of F', b and |grad xi|^2 (ABF-style).
struct LearnerParams {
  LatentGrid grid;
  std::int64_t n_min = 100;
  std::int64_t n_update = 20;
  /// Stop learning after this many steps; the last snapshot stays in use.
  std::optional<std::int64_t> freeze_after;
};

class LatentLearner {
 public:
  LatentLearner(const LearnerParams& params, bool fast_path);

  void observe(double beta, const Vector& grad_v, const CvEval& cv);

  /// Profiles built from bins with at least n_min samples.
  std::shared_ptr<const ProfileModel> snapshot() const;
  /// New spec with the snapshot model and its normalization constant.
  DiffusionSpec publish(const DiffusionSpec& base, int dim) const;

  const LearnerParams& params() const { return params_; }
  const BinnedEstimator& mean_force() const { return mean_force_; }
  const BinnedEstimator& drift() const { return drift_; }
  const BinnedEstimator& noise() const { return noise_; }

 private:
  LearnerParams params_;
  bool fast_path_;
  BinnedEstimator mean_force_, drift_, noise_;
};

/// Initial adaptive spec: F = 0, sigma = 1, kappa = 1.
DiffusionSpec initial_adaptive_spec(const LatentGrid& grid, double alpha, double beta,
                                    SigmaConvention sigma);

/// Common interface of all MH-type chains.
class Chain {
 public:
  virtual ~Chain() = default;

  StepOutcome step();

  virtual void reset(const Vector& q) = 0;
  virtual const Vector& position() const = 0;
  virtual double xi() const = 0;
  /// V for overdamped chains, H for kinetic chains.
  virtual double energy() const = 0;
  virtual std::string scheme() const = 0;

  const SamplerContext& context() const { return ctx_; }
  std::int64_t steps() const { return steps_; }
  std::int64_t accepted() const { return accepted_; }
  double accept_rate() const { return steps_ ? double(accepted_) / double(steps_) : 0.0; }

  void enable_learning(const LearnerParams& params);
  const LatentLearner* learner() const { return learner_.get(); }
  /// Replace the diffusion (e.g. with learned profiles) and refresh caches.
  void set_diffusion(const DiffusionSpec& spec);

 protected:
  explicit Chain(SamplerContext ctx) : ctx_(std::move(ctx)) { ctx_.validate(); }

  virtual StepOutcome do_step() = 0;
  virtual void on_diffusion_changed() = 0;
  virtual const Vector& cached_grad_v() const = 0;
  virtual const CvEval& cached_cv() const = 0;

  void reset_counters() { steps_ = accepted_ = 0; }

  SamplerContext ctx_;

 private:
  std::unique_ptr<LatentLearner> learner_;
  std::int64_t steps_ = 0;
  std::int64_t accepted_ = 0;
};

}  // namespace effdiff
