#pragma once

#include "effdiff/chain.hpp"

namespace effdiff {

/// Cached evaluation of everything MALA needs at one configuration.
struct MalaPoint {
  Vector q;
  double v = 0.0;
  Vector grad_v;
  CvEval cv;
  DiffusionEval diff;
  Vector mu;  // q + (-D grad V + beta^-1 div D) dt, not wrapped
};

/// Full evaluation (one force call).
MalaPoint mala_point(const SamplerContext& ctx, const Vector& q, double dt);
/// Recompute diffusion-dependent caches for an unchanged position.
void refresh_diffusion(const SamplerContext& ctx, MalaPoint& pt, double dt);

/// mu + sqrt(2 dt / beta) D^{1/2} gauss, wrapped into the box.
Vector mala_propose(const SamplerContext& ctx, const MalaPoint& from, double dt, const Vector& gauss);

/// Log Gaussian transition density from `from` to q_to (min-image displacement).
double mala_log_transition(const SamplerContext& ctx, const MalaPoint& from, const Vector& q_to,
                           double dt);

/// Log Metropolis-Hastings ratio for the move from -> to.
double mala_log_ratio(const SamplerContext& ctx, const MalaPoint& from, const MalaPoint& to, double dt);

class MalaChain final : public Chain {
 public:
  MalaChain(SamplerContext ctx, double dt, std::uint64_t seed, const Vector& q0);

  void reset(const Vector& q) override;
  const Vector& position() const override { return cur_.q; }
  double xi() const override { return cur_.cv.value; }
  double energy() const override { return cur_.v; }
  std::string scheme() const override { return learner() ? "adaptive-mala" : "mala"; }

  const MalaPoint& point() const { return cur_; }
  double dt() const { return dt_; }
  /// Step with externally supplied noise; returns the MH outcome.
  StepOutcome step_with(const Vector& gauss, double uniform);

 protected:
  StepOutcome do_step() override;
  void on_diffusion_changed() override { refresh_diffusion(ctx_, cur_, dt_); }
  const Vector& cached_grad_v() const override { return cur_.grad_v; }
  const CvEval& cached_cv() const override { return cur_.cv; }

 private:
  double dt_;
  RandomSource rng_;
  MalaPoint cur_;
  Vector gauss_;
};

}  // namespace effdiff
