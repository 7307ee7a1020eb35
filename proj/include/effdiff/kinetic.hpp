#pragma once

#include <vector>

#include "effdiff/chain.hpp"

namespace effdiff {

/// Position-dependent parts of the Hamiltonian at one configuration.
struct KineticPoint {
  Vector q;
  double v = 0.0;
  Vector grad_v;
  CvEval cv;
  AValue a;
};

KineticPoint kinetic_point(const SamplerContext& ctx, const Vector& q);

/// H = V - (d/2) ln kappa - (1/2) ln a + (kappa/2) p.p + (kappa/2)(a-1)(grad xi . p)^2 / |grad xi|^2
double hamiltonian(const SamplerContext& ctx, const KineticPoint& pt, const Vector& p);
Vector grad_q_H(const SamplerContext& ctx, const KineticPoint& pt, const Vector& p);
/// Depends on q only through the CV, so it takes the CV evaluation directly.
Vector grad_p_H(const SamplerContext& ctx, const CvEval& cv, const AValue& a, const Vector& p);

struct NewtonParams {
  enum class LinearSolve { Block, Dense };

  int max_iter = 100;
  double tol_cauchy = 1e-12;
  double tol_root = 1e-12;
  double tol_rev = 1e-6;
  LinearSolve solve = LinearSolve::Block;

  void validate() const;
};

enum class NewtonStatus { Converged, MaxIter, Singular };

struct NewtonResult {
  NewtonStatus status = NewtonStatus::MaxIter;
  int iterations = 0;
  Vector x;
};

/// Root of p -> p - p_in + (dt/2) grad_q H(q, p), starting from the explicit guess.
/// When trace is given, every iterate (including the initial guess) is appended.
NewtonResult newton_momenta(const SamplerContext& ctx, const KineticPoint& at, const Vector& p_in,
                            double dt, const NewtonParams& params,
                            std::vector<Vector>* trace = nullptr);

/// Root of q -> q - q_in - (dt/2)(grad_p H(q_in, p) + grad_p H(q, p)).
/// The result is not wrapped.
NewtonResult newton_position(const SamplerContext& ctx, const KineticPoint& at, const Vector& p_half,
                             double dt, const NewtonParams& params,
                             std::vector<Vector>* trace = nullptr);

/// Jacobians of the two implicit maps (dense, for diagnostics and tests).
Matrix momenta_jacobian(const SamplerContext& ctx, const KineticPoint& at, const Vector& p, double dt);
Matrix position_jacobian(const SamplerContext& ctx, const Vector& q, const Vector& p, double dt);

enum class GsvStatus {
  Ok,
  FailFwdMomenta,
  FailFwdPosition,
  FailBwdMomenta,
  FailBwdPosition,
  FailReversibility,
};

struct GsvOutcome {
  GsvStatus status = GsvStatus::Ok;
  Vector q;            // wrapped
  Vector p;
  KineticPoint end;    // valid when status is Ok
  double residual = 0.0;  // round-trip residual (gsv_rev only)
};

/// One generalized Stormer-Verlet step. Failure causes are the forward ones.
GsvOutcome gsv_step(const SamplerContext& ctx, const KineticPoint& start, const Vector& p, double dt,
                    const NewtonParams& params);

/// Forward step, then backward from the momentum-reversed end point; on any
/// failure the result is (q, -p).
GsvOutcome gsv_rev(const SamplerContext& ctx, const KineticPoint& start, const Vector& p, double dt,
                   const NewtonParams& params);

StepOutcome to_outcome(GsvStatus s);

/// (beta D)^{-1/2} gauss
Vector sample_momenta(const SamplerContext& ctx, const CvEval& cv, const AValue& a, const Vector& gauss);

/// Midpoint update of dp = -gamma D p dt + sqrt(2 gamma / beta) dW over dt/2.
Vector ou_half_step(const SamplerContext& ctx, const CvEval& cv, const AValue& a, const Vector& p,
                    double dt, double gamma, const Vector& gauss);

/// Closed-form (I + theta D)^{-1} for the diffusion at this point.
Structured ou_inverse(const SamplerContext& ctx, const AValue& a, double theta);

class KineticChain final : public Chain {
 public:
  enum class Mode { Rmhmc, Rmghmc };

  KineticChain(Mode mode, SamplerContext ctx, double dt, std::uint64_t seed, const Vector& q0,
               NewtonParams params = {}, double gamma = 1.0);

  void reset(const Vector& q) override;
  const Vector& position() const override { return cur_.q; }
  double xi() const override { return cur_.cv.value; }
  double energy() const override { return hamiltonian(ctx_, cur_, p_); }
  std::string scheme() const override { return mode_ == Mode::Rmhmc ? "rmhmc" : "rmghmc"; }

  const Vector& momenta() const { return p_; }
  void set_momenta(const Vector& p) { p_ = p; }
  const KineticPoint& point() const { return cur_; }
  double dt() const { return dt_; }

 protected:
  StepOutcome do_step() override;
  void on_diffusion_changed() override;
  const Vector& cached_grad_v() const override { return cur_.grad_v; }
  const CvEval& cached_cv() const override { return cur_.cv; }

 private:
  StepOutcome hamiltonian_move();

  Mode mode_;
  double dt_;
  NewtonParams params_;
  double gamma_;
  RandomSource rng_;
  KineticPoint cur_;
  Vector p_;
  Vector gauss_;
};

}  // namespace effdiff
