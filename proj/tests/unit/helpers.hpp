#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <random>

#include "effdiff/chain.hpp"
#include "effdiff/system.hpp"

namespace effdiff::testing {

// Lattice start with jittered solvent and a randomly oriented dimer of
// length in [r0 - 0.15, r0 + 2w + 0.3]; redrawn until no pair is closer
// than min_dist.
inline Vector random_config(const SystemParams& p, std::mt19937_64& rng, double min_dist = 0.8) {
  std::uniform_real_distribution<double> jitter(-0.12, 0.12), unit(0.0, 1.0);
  for (;;) {
    Vector q = lattice_config(p);
    for (int i = 0; i < q.size(); ++i) q[i] += jitter(rng);
    const double r = p.r0 - 0.15 + (2 * p.w + 0.45) * unit(rng);
    const double th = 2 * M_PI * unit(rng);
    q[2] = q[0] + r * std::cos(th);
    q[3] = q[1] + r * std::sin(th);
    wrap(q, p.box_len);
    bool ok = true;
    for (int i = 0; i < p.n_particles && ok; ++i)
      for (int j = i + 1; j < p.n_particles && ok; ++j)
        if (min_image(particle(q, i), particle(q, j), p.box_len).norm() < min_dist) ok = false;
    if (ok) return q;
  }
}

// Central finite-difference gradient of a scalar field.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  Vector y = x;
  for (int i = 0; i < x.size(); ++i) {
    y[i] = x[i] + h;
    const double fp = f(y);
    y[i] = x[i] - h;
    const double fm = f(y);
    y[i] = x[i];
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

// Central finite-difference Jacobian of a vector field.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  const Vector f0 = f(x);
  Matrix j(f0.size(), x.size());
  Vector y = x;
  for (int i = 0; i < x.size(); ++i) {
    y[i] = x[i] + h;
    const Vector fp = f(y);
    y[i] = x[i] - h;
    const Vector fm = f(y);
    y[i] = x[i];
    j.col(i) = (fp - fm) / (2 * h);
  }
  return j;
}

// max_i |a_i - b_i| / max(1, max_i |b_i|)
inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Smooth CV with non-constant gradient norm, depending on the first four
/// coordinates; exercises the general (non fast-path) formulas.
class QuadraticCv final : public CollectiveVariable {
 public:
  CvEval eval(const Vector& q) const override {
    Eigen::Matrix4d a;
    a << 0.6, 0.2, 0.1, 0.0,
         0.2, 0.4, 0.0, 0.1,
         0.1, 0.0, 0.3, -0.1,
         0.0, 0.1, -0.1, 0.5;
    Eigen::Vector4d c(0.3, -0.2, 0.1, 0.4);
    const Eigen::Vector4d x = q.head<4>();
    CvEval out;
    out.value = 0.5 * x.dot(a * x) + c.dot(x);
    out.grad = a * x + c;
    out.hess = a;
    out.grad_norm_sq = out.grad.squaredNorm();
    out.laplacian = a.trace();
    return out;
  }
  int block_size() const override { return 4; }
};

/// Smooth analytic latent model: F(z) = c2 z^2 + c3 z^3, sigma^2(z) = s0 + s1 z^2,
/// b consistent with sigma^2: b = -sigma^2 F' + (sigma^2)'/beta.
inline std::shared_ptr<const LatentModel> smooth_model(double beta = 1.0) {
  const double c2 = 0.7, c3 = -0.4, s0 = 1.1, s1 = 0.3;
  LatentGrid g{-0.2, 1.225, 100};
  auto f = [=](double z) { return c2 * z * z + c3 * z * z * z; };
  auto fp = [=](double z) { return 2 * c2 * z + 3 * c3 * z * z; };
  auto s2 = [=](double z) { return s0 + s1 * z * z; };
  auto b = [=](double z) { return -s2(z) * fp(z) + 2 * s1 * z / beta; };
  return std::make_shared<const AnalyticModel>(g, f, fp, s2, b);
}

inline SamplerContext dimer_context(double alpha, SigmaConvention sigma = SigmaConvention::Unit,
                                    std::shared_ptr<const LatentModel> model = smooth_model(),
                                    double kappa = 0.8) {
  SamplerContext ctx;
  ctx.sys = SystemParams::standard_dimer();
  ctx.cv = std::make_shared<const DimerBondCv>(ctx.sys);
  ctx.diff.alpha = alpha;
  ctx.diff.beta = ctx.sys.beta;
  ctx.diff.kappa = kappa;
  ctx.diff.model = std::move(model);
  ctx.diff.sigma = sigma;
  return ctx;
}

inline SamplerContext quadratic_context(double alpha, double kappa = 0.8) {
  SamplerContext ctx = dimer_context(alpha, SigmaConvention::Unit, smooth_model(), kappa);
  ctx.cv = std::make_shared<const QuadraticCv>();
  return ctx;
}

}  // namespace effdiff::testing
