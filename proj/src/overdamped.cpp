#include "effdiff/overdamped.hpp"

#include <cmath>
#include <numbers>

#include "effdiff/errors.hpp"

namespace effdiff {

void refresh_diffusion(const SamplerContext& ctx, MalaPoint& pt, double dt) {
  pt.diff = eval_diffusion(ctx.diff, pt.cv, ctx.dim(), ctx.fast_path());
  apply(pt.diff.d, pt.cv, pt.grad_v, pt.mu);
  pt.mu = -pt.mu;
  const int k = pt.cv.block();
  pt.mu.head(k) += pt.diff.divergence / ctx.sys.beta;
  pt.mu = pt.q + pt.mu * dt;
}

MalaPoint mala_point(const SamplerContext& ctx, const Vector& q, double dt) {
  MalaPoint pt;
  pt.q = q;
  pt.v = energy_and_gradient(ctx.sys, q, pt.grad_v);
  if (!std::isfinite(pt.v)) throw NumericalError("potential energy is not finite");
  pt.cv = ctx.cv->eval(q);
  refresh_diffusion(ctx, pt, dt);
  return pt;
}

Vector mala_propose(const SamplerContext& ctx, const MalaPoint& from, double dt, const Vector& gauss) {
  Vector out = apply(from.diff.sqrt, from.cv, gauss);
  out = from.mu + std::sqrt(2.0 * dt / ctx.sys.beta) * out;
  wrap(out, ctx.sys.box_len);
  return out;
}

double mala_log_transition(const SamplerContext& ctx, const MalaPoint& from, const Vector& q_to,
                           double dt) {
  const int d = ctx.dim();
  const double beta = ctx.sys.beta;
  Vector delta(d);
  for (int i = 0; i < d; ++i) delta[i] = min_image_1d(q_to[i] - from.mu[i], ctx.sys.box_len);
  return -0.5 * d * std::log(4.0 * std::numbers::pi * dt / beta) - 0.5 * from.diff.log_det -
         beta / (4.0 * dt) * quadratic_form(from.diff.inv, from.cv, delta);
}

double mala_log_ratio(const SamplerContext& ctx, const MalaPoint& from, const MalaPoint& to, double dt) {
  return -ctx.sys.beta * (to.v - from.v) + mala_log_transition(ctx, to, from.q, dt) -
         mala_log_transition(ctx, from, to.q, dt);
}

MalaChain::MalaChain(SamplerContext ctx, double dt, std::uint64_t seed, const Vector& q0)
    : Chain(std::move(ctx)), dt_(dt), rng_(seed), gauss_(ctx_.dim()) {
  if (!(dt > 0)) throw ConfigError("time step must be positive");
  reset(q0);
}

void MalaChain::reset(const Vector& q) {
  if (q.size() != ctx_.dim()) throw ConfigError("configuration has the wrong dimension");
  Vector qw = q;
  wrap(qw, ctx_.sys.box_len);
  cur_ = mala_point(ctx_, qw, dt_);
}

StepOutcome MalaChain::step_with(const Vector& gauss, double uniform) {
  MalaPoint prop = mala_point(ctx_, mala_propose(ctx_, cur_, dt_, gauss), dt_);
  const double log_r = mala_log_ratio(ctx_, cur_, prop, dt_);
  if (std::log(uniform) < log_r) {
    cur_ = std::move(prop);
    return StepOutcome::Accepted;
  }
  return StepOutcome::Metropolis;
}

StepOutcome MalaChain::do_step() {
  rng_.fill_gaussian(gauss_);
  const double u = rng_.uniform();
  return step_with(gauss_, u);
}

}  // namespace effdiff
