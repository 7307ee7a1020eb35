#include "effdiff/kinetic.hpp"

#include <cmath>

#include <Eigen/LU>

#include "effdiff/errors.hpp"

namespace effdiff {

KineticPoint kinetic_point(const SamplerContext& ctx, const Vector& q) {
  KineticPoint pt;
  pt.q = q;
  pt.v = energy_and_gradient(ctx.sys, q, pt.grad_v);
  if (!std::isfinite(pt.v)) throw NumericalError("potential energy is not finite");
  pt.cv = ctx.cv->eval(q);
  pt.a = ctx.diff.a_alpha(pt.cv.value);
  return pt;
}

double hamiltonian(const SamplerContext& ctx, const KineticPoint& pt, const Vector& p) {
  const double k = ctx.diff.kappa;
  const double gp = p.head(pt.cv.block()).dot(pt.cv.grad);
  return pt.v - 0.5 * ctx.dim() * std::log(k) - 0.5 * std::log(pt.a.a) + 0.5 * k * p.squaredNorm() +
         0.5 * k * (pt.a.a - 1.0) * gp * gp / pt.cv.grad_norm_sq;
}

Vector grad_q_H(const SamplerContext& ctx, const KineticPoint& pt, const Vector& p) {
  const CvEval& cv = pt.cv;
  const int kb = cv.block();
  const double k = ctx.diff.kappa;
  const double s = cv.grad_norm_sq;
  const double a = pt.a.a, ap = pt.a.prime;
  const BlockVector pb = p.head(kb);
  const double gp = pb.dot(cv.grad);
  Vector out = pt.grad_v;
  auto blk = out.head(kb);
  blk += (-0.5 * ap / a + 0.5 * k * ap * gp * gp / s) * cv.grad;
  blk += (k * (a - 1.0) * gp / s) * (cv.hess * pb);
  if (!ctx.fast_path()) blk -= (k * (a - 1.0) * gp * gp / (s * s)) * (cv.hess * cv.grad);
  return out;
}

Vector grad_p_H(const SamplerContext& ctx, const CvEval& cv, const AValue& a, const Vector& p) {
  const int kb = cv.block();
  const double k = ctx.diff.kappa;
  const double gp = p.head(kb).dot(cv.grad);
  Vector out = k * p;
  out.head(kb) += (k * (a.a - 1.0) * gp / cv.grad_norm_sq) * cv.grad;
  return out;
}

void NewtonParams::validate() const {
  if (max_iter < 1) throw ConfigError("Newton needs at least one iteration");
  if (!(tol_cauchy > 0) || !(tol_root > 0) || !(tol_rev > 0))
    throw ConfigError("Newton and reversibility tolerances must be positive");
}

namespace {

// Block of the momentum-map Jacobian at (q, p).
BlockMatrix momenta_block(const SamplerContext& ctx, const KineticPoint& at, const Vector& p, double dt) {
  const CvEval& cv = at.cv;
  const int kb = cv.block();
  const double k = ctx.diff.kappa;
  const double s = cv.grad_norm_sq;
  const double am1 = at.a.a - 1.0;
  const BlockVector pb = p.head(kb);
  const double gp = pb.dot(cv.grad);
  BlockMatrix m = (k * at.a.prime * gp / s) * (cv.grad * cv.grad.transpose());
  m += (k * am1 / s) * ((cv.hess * pb) * cv.grad.transpose());
  m += (k * am1 * gp / s) * cv.hess;
  if (!ctx.fast_path()) m -= (2.0 * k * am1 * gp / (s * s)) * ((cv.hess * cv.grad) * cv.grad.transpose());
  BlockMatrix out = BlockMatrix::Identity(kb, kb) + 0.5 * dt * m;
  return out;
}

// Block of the position-map Jacobian at q for fixed p.
BlockMatrix position_block(const SamplerContext& ctx, const CvEval& cv, const AValue& a,
                           const Vector& p, double dt) {
  const int kb = cv.block();
  const double k = ctx.diff.kappa;
  const double s = cv.grad_norm_sq;
  const double am1 = a.a - 1.0;
  const BlockVector pb = p.head(kb);
  const double gp = pb.dot(cv.grad);
  BlockMatrix m = (a.prime * gp / s) * (cv.grad * cv.grad.transpose());
  m += (am1 / s) * (cv.grad * (cv.hess * pb).transpose());
  m += (am1 * gp / s) * cv.hess;
  if (!ctx.fast_path()) m -= (2.0 * am1 * gp / (s * s)) * (cv.grad * (cv.hess * cv.grad).transpose());
  BlockMatrix out = BlockMatrix::Identity(kb, kb) - (0.5 * dt * k) * m;
  return out;
}

// Solves m x = rhs in place by Gaussian elimination with partial pivoting.
bool solve_block(BlockMatrix m, BlockVector& rhs) {
  constexpr double kPivotMin = 1e-14;
  const int n = static_cast<int>(m.rows());
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(m(r, c)) > std::abs(m(piv, c))) piv = r;
    if (!(std::abs(m(piv, c)) >= kPivotMin)) return false;
    if (piv != c) {
      m.row(c).swap(m.row(piv));
      std::swap(rhs[c], rhs[piv]);
    }
    for (int r = c + 1; r < n; ++r) {
      const double f = m(r, c) / m(c, c);
      if (f == 0.0) continue;
      m.row(r).tail(n - c) -= f * m.row(c).tail(n - c);
      rhs[r] -= f * rhs[c];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double acc = rhs[r];
    for (int c = r + 1; c < n; ++c) acc -= m(r, c) * rhs[c];
    rhs[r] = acc / m(r, r);
  }
  return true;
}

Matrix embed(const BlockMatrix& b, int dim) {
  Matrix m = Matrix::Identity(dim, dim);
  m.topLeftCorner(b.rows(), b.cols()) = b;
  return m;
}

// Newton driver. residual(x, r) fills the residual; jacobian(x) returns the
// block. Either may throw SingularCvError, reported as a singular system.
template <class Residual, class Jacobian>
NewtonResult run_newton(Vector x, int kb, const NewtonParams& params, Residual residual,
                        Jacobian jacobian, std::vector<Vector>* trace) {
  NewtonResult res;
  if (trace) trace->push_back(x);
  try {
    Vector r;
    residual(x, r);
    Vector u(x.size());
    for (int it = 1; it <= params.max_iter; ++it) {
      if (!r.allFinite()) {
        res.status = NewtonStatus::Singular;
        res.iterations = it - 1;
        res.x = x;
        return res;
      }
      const BlockMatrix jb = jacobian(x);
      if (params.solve == NewtonParams::LinearSolve::Block) {
        BlockVector rb = -r.head(kb);
        if (!solve_block(jb, rb)) {
          res.status = NewtonStatus::Singular;
          res.iterations = it - 1;
          res.x = x;
          return res;
        }
        u.head(kb) = rb;
        u.tail(x.size() - kb) = -r.tail(x.size() - kb);
      } else {
        Eigen::FullPivLU<Matrix> lu(embed(jb, static_cast<int>(x.size())));
        if (!lu.isInvertible()) {
          res.status = NewtonStatus::Singular;
          res.iterations = it - 1;
          res.x = x;
          return res;
        }
        u = lu.solve(-r);
      }
      x += u;
      if (trace) trace->push_back(x);
      residual(x, r);
      if (u.norm() < params.tol_cauchy && r.norm() < params.tol_root) {
        res.status = NewtonStatus::Converged;
        res.iterations = it;
        res.x = std::move(x);
        return res;
      }
    }
    res.status = NewtonStatus::MaxIter;
    res.iterations = params.max_iter;
  } catch (const SingularCvError&) {
    res.status = NewtonStatus::Singular;
  }
  res.x = std::move(x);
  return res;
}

}  // namespace

Matrix momenta_jacobian(const SamplerContext& ctx, const KineticPoint& at, const Vector& p, double dt) {
  return embed(momenta_block(ctx, at, p, dt), ctx.dim());
}

Matrix position_jacobian(const SamplerContext& ctx, const Vector& q, const Vector& p, double dt) {
  const CvEval cv = ctx.cv->eval(q);
  return embed(position_block(ctx, cv, ctx.diff.a_alpha(cv.value), p, dt), ctx.dim());
}

NewtonResult newton_momenta(const SamplerContext& ctx, const KineticPoint& at, const Vector& p_in,
                            double dt, const NewtonParams& params, std::vector<Vector>* trace) {
  const Vector x0 = p_in - 0.5 * dt * grad_q_H(ctx, at, p_in);
  auto residual = [&](const Vector& p, Vector& r) { r = p - p_in + 0.5 * dt * grad_q_H(ctx, at, p); };
  auto jacobian = [&](const Vector& p) { return momenta_block(ctx, at, p, dt); };
  return run_newton(x0, at.cv.block(), params, residual, jacobian, trace);
}

NewtonResult newton_position(const SamplerContext& ctx, const KineticPoint& at, const Vector& p_half,
                             double dt, const NewtonParams& params, std::vector<Vector>* trace) {
  const Vector fixed = grad_p_H(ctx, at.cv, at.a, p_half);
  const Vector x0 = at.q + dt * fixed;
  auto residual = [&](const Vector& q, Vector& r) {
    const CvEval cv = ctx.cv->eval(q);
    const AValue a = ctx.diff.a_alpha(cv.value);
    r = q - at.q - 0.5 * dt * (fixed + grad_p_H(ctx, cv, a, p_half));
  };
  auto jacobian = [&](const Vector& q) {
    const CvEval cv = ctx.cv->eval(q);
    return position_block(ctx, cv, ctx.diff.a_alpha(cv.value), p_half, dt);
  };
  return run_newton(x0, at.cv.block(), params, residual, jacobian, trace);
}

GsvOutcome gsv_step(const SamplerContext& ctx, const KineticPoint& start, const Vector& p, double dt,
                    const NewtonParams& params) {
  GsvOutcome out;
  const NewtonResult ph = newton_momenta(ctx, start, p, dt, params);
  if (ph.status != NewtonStatus::Converged) {
    out.status = GsvStatus::FailFwdMomenta;
    return out;
  }
  const NewtonResult qn = newton_position(ctx, start, ph.x, dt, params);
  if (qn.status != NewtonStatus::Converged) {
    out.status = GsvStatus::FailFwdPosition;
    return out;
  }
  Vector q1 = qn.x;
  wrap(q1, ctx.sys.box_len);
  out.end = kinetic_point(ctx, q1);
  out.p = ph.x - 0.5 * dt * grad_q_H(ctx, out.end, ph.x);
  out.q = out.end.q;
  return out;
}

GsvOutcome gsv_rev(const SamplerContext& ctx, const KineticPoint& start, const Vector& p, double dt,
                   const NewtonParams& params) {
  auto fail = [&](GsvStatus s) {
    GsvOutcome f;
    f.status = s;
    f.q = start.q;
    f.p = -p;
    return f;
  };
  GsvOutcome fwd = gsv_step(ctx, start, p, dt, params);
  if (fwd.status == GsvStatus::FailFwdMomenta) return fail(GsvStatus::FailFwdMomenta);
  if (fwd.status == GsvStatus::FailFwdPosition) return fail(GsvStatus::FailFwdPosition);
  const GsvOutcome bwd = gsv_step(ctx, fwd.end, -fwd.p, dt, params);
  if (bwd.status == GsvStatus::FailFwdMomenta) return fail(GsvStatus::FailBwdMomenta);
  if (bwd.status == GsvStatus::FailFwdPosition) return fail(GsvStatus::FailBwdPosition);
  double sq = 0.0;
  for (int i = 0; i < ctx.dim(); ++i) {
    const double dq = min_image_1d(bwd.q[i] - start.q[i], ctx.sys.box_len);
    const double dp = -bwd.p[i] - p[i];
    sq += dq * dq + dp * dp;
  }
  fwd.residual = std::sqrt(sq);
  if (!(fwd.residual < params.tol_rev)) {
    GsvOutcome f = fail(GsvStatus::FailReversibility);
    f.residual = fwd.residual;
    return f;
  }
  return fwd;
}

StepOutcome to_outcome(GsvStatus s) {
  switch (s) {
    case GsvStatus::Ok: return StepOutcome::Accepted;
    case GsvStatus::FailFwdMomenta: return StepOutcome::FailFwdMomenta;
    case GsvStatus::FailFwdPosition: return StepOutcome::FailFwdPosition;
    case GsvStatus::FailBwdMomenta: return StepOutcome::FailBwdMomenta;
    case GsvStatus::FailBwdPosition: return StepOutcome::FailBwdPosition;
    case GsvStatus::FailReversibility: return StepOutcome::FailReversibility;
  }
  return StepOutcome::Metropolis;
}

Vector sample_momenta(const SamplerContext& ctx, const CvEval& cv, const AValue& a, const Vector& gauss) {
  const Structured inv_sqrt{1.0 / std::sqrt(ctx.diff.kappa), 1.0 / std::sqrt(a.a) - 1.0};
  return apply(inv_sqrt, cv, gauss) / std::sqrt(ctx.sys.beta);
}

Structured ou_inverse(const SamplerContext& ctx, const AValue& a, double theta) {
  const double k = ctx.diff.kappa;
  const double perp = 1.0 + theta * k;
  const double par = 1.0 + theta * k * a.a;
  return {1.0 / perp, perp / par - 1.0};
}

Vector ou_half_step(const SamplerContext& ctx, const CvEval& cv, const AValue& a, const Vector& p,
                    double dt, double gamma, const Vector& gauss) {
  const double theta = 0.25 * gamma * dt;
  const Structured d{ctx.diff.kappa, a.a - 1.0};
  Vector rhs = p - theta * apply(d, cv, p) + std::sqrt(gamma * dt / ctx.sys.beta) * gauss;
  return apply(ou_inverse(ctx, a, theta), cv, rhs);
}

// ---------------------------------------------------------------------------

KineticChain::KineticChain(Mode mode, SamplerContext ctx, double dt, std::uint64_t seed,
                           const Vector& q0, NewtonParams params, double gamma)
    : Chain(std::move(ctx)), mode_(mode), dt_(dt), params_(params), gamma_(gamma), rng_(seed),
      gauss_(ctx_.dim()) {
  if (!(dt > 0)) throw ConfigError("time step must be positive");
  if (!(gamma > 0)) throw ConfigError("friction must be positive");
  params_.validate();
  reset(q0);
}

void KineticChain::reset(const Vector& q) {
  if (q.size() != ctx_.dim()) throw ConfigError("configuration has the wrong dimension");
  Vector qw = q;
  wrap(qw, ctx_.sys.box_len);
  cur_ = kinetic_point(ctx_, qw);
  rng_.fill_gaussian(gauss_);
  p_ = sample_momenta(ctx_, cur_.cv, cur_.a, gauss_);
}

void KineticChain::on_diffusion_changed() { cur_.a = ctx_.diff.a_alpha(cur_.cv.value); }

StepOutcome KineticChain::hamiltonian_move() {
  const double h0 = hamiltonian(ctx_, cur_, p_);
  GsvOutcome out = gsv_rev(ctx_, cur_, p_, dt_, params_);
  const double u = rng_.uniform();
  if (out.status != GsvStatus::Ok) {
    p_ = -p_;
    return to_outcome(out.status);
  }
  const double h1 = hamiltonian(ctx_, out.end, out.p);
  if (std::log(u) < -ctx_.sys.beta * (h1 - h0)) {
    cur_ = std::move(out.end);
    p_ = std::move(out.p);
    return StepOutcome::Accepted;
  }
  p_ = -p_;
  return StepOutcome::Metropolis;
}

StepOutcome KineticChain::do_step() {
  if (mode_ == Mode::Rmhmc) {
    rng_.fill_gaussian(gauss_);
    p_ = sample_momenta(ctx_, cur_.cv, cur_.a, gauss_);
    return hamiltonian_move();
  }
  rng_.fill_gaussian(gauss_);
  p_ = ou_half_step(ctx_, cur_.cv, cur_.a, p_, dt_, gamma_, gauss_);
  const StepOutcome o = hamiltonian_move();
  rng_.fill_gaussian(gauss_);
  p_ = ou_half_step(ctx_, cur_.cv, cur_.a, p_, dt_, gamma_, gauss_);
  return o;
}

}  // namespace effdiff
