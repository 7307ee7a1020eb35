#include "effdiff/chain.hpp"

#include "effdiff/errors.hpp"

namespace effdiff {

void SamplerContext::validate() const {
  sys.validate();
  if (!cv) throw ConfigError("sampler needs a collective variable");
  if (cv->block_size() > kMaxBlock || cv->block_size() > sys.dim())
    throw ConfigError("collective variable block is too large");
  diff.validate();
}

const char* outcome_name(StepOutcome o) {
  switch (o) {
    case StepOutcome::Accepted: return "accepted";
    case StepOutcome::Metropolis: return "metropolis";
    case StepOutcome::FailFwdMomenta: return "fwd_momenta";
    case StepOutcome::FailFwdPosition: return "fwd_position";
    case StepOutcome::FailBwdMomenta: return "bwd_momenta";
    case StepOutcome::FailBwdPosition: return "bwd_position";
    case StepOutcome::FailReversibility: return "reversibility";
  }
  return "unknown";
}

LatentLearner::LatentLearner(const LearnerParams& params, bool fast_path)
    : params_(params),
      fast_path_(fast_path),
      mean_force_(params.grid, 0.0),
      drift_(params.grid, 0.0),
      noise_(params.grid, 1.0) {
  if (params.n_min < 1 || params.n_update < 1)
    throw ConfigError("n_min and n_update must be at least 1");
}

void LatentLearner::observe(double beta, const Vector& grad_v, const CvEval& cv) {
  mean_force_.accumulate(cv.value, local_mean_force(beta, grad_v, cv, fast_path_));
  drift_.accumulate(cv.value, effective_drift_integrand(beta, grad_v, cv));
  noise_.accumulate(cv.value, effective_noise_integrand(cv));
}

std::shared_ptr<const ProfileModel> LatentLearner::snapshot() const {
  return std::make_shared<const ProfileModel>(Profile::from_estimator(mean_force_, params_.n_min),
                                              Profile::from_estimator(noise_, params_.n_min),
                                              Profile::from_estimator(drift_, params_.n_min));
}

DiffusionSpec LatentLearner::publish(const DiffusionSpec& base, int dim) const {
  DiffusionSpec out = base;
  out.model = snapshot();
  out.kappa = 1.0;
  out.kappa = kappa_alpha(out, dim);
  return out;
}

DiffusionSpec initial_adaptive_spec(const LatentGrid& grid, double alpha, double beta,
                                    SigmaConvention sigma) {
  DiffusionSpec spec;
  spec.alpha = alpha;
  spec.beta = beta;
  spec.kappa = 1.0;
  spec.sigma = sigma;
  spec.model = std::make_shared<const ProfileModel>(grid);
  return spec;
}

StepOutcome Chain::step() {
  const StepOutcome out = do_step();
  ++steps_;
  if (out == StepOutcome::Accepted) ++accepted_;
  if (learner_) {
    const auto& lp = learner_->params();
    if (!lp.freeze_after || steps_ <= *lp.freeze_after) {
      learner_->observe(ctx_.sys.beta, cached_grad_v(), cached_cv());
      if (steps_ % lp.n_update == 0) set_diffusion(learner_->publish(ctx_.diff, ctx_.dim()));
    }
  }
  return out;
}

void Chain::enable_learning(const LearnerParams& params) {
  learner_ = std::make_unique<LatentLearner>(params, ctx_.fast_path());
}

void Chain::set_diffusion(const DiffusionSpec& spec) {
  spec.validate();
  ctx_.diff = spec;
  on_diffusion_changed();
}

}  // namespace effdiff
