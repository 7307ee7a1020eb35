#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>

#include "../unit/helpers.hpp"
#include "common.hpp"
#include "effdiff/kinetic.hpp"
#include "effdiff/ti.hpp"

namespace effdiff::acceptance {

using testing::dimer_context;
using testing::fd_gradient;
using testing::fd_jacobian;
using testing::random_config;
using testing::rel_err;
using testing::smooth_model;

namespace {

constexpr int kStates = 100;

Vector fd_divergence(const SamplerContext& ctx, const Vector& q, double h = 1e-5) {
  const int d = ctx.dim();
  auto dense_d = [&](const Vector& x) {
    const CvEval cv = ctx.cv->eval(x);
    return dense(eval_diffusion(ctx.diff, cv, d, false).d, cv, d);
  };
  Vector div = Vector::Zero(d);
  Vector y = q;
  for (int j = 0; j < d; ++j) {
    y[j] = q[j] + h;
    const Matrix p = dense_d(y);
    y[j] = q[j] - h;
    const Matrix m = dense_d(y);
    y[j] = q[j];
    div += (p.col(j) - m.col(j)) / (2 * h);
  }
  return div;
}

Vector min_image_diff(const Vector& a, const Vector& b, double box) {
  Vector d(a.size());
  for (int i = 0; i < a.size(); ++i) d[i] = min_image_1d(a[i] - b[i], box);
  return d;
}

}  // namespace

Outcome derivatives(Shared& sh) {
  std::mt19937_64 rng(derive_seed(sh.options().seed, 1));
  const SystemParams sys = SystemParams::standard_dimer();
  const DimerBondCv cv(sys);
  const int d = sys.dim();
  const auto ctx = dimer_context(1.2);
  std::map<std::string, double> worst;
  auto note = [&](const char* what, double e) { worst[what] = std::max(worst[what], e); };

  for (int k = 0; k < kStates; ++k) {
    const Vector q = random_config(sys, rng, 0.9);
    const Vector p = gaussian_vector(rng, d);
    auto v = [&](const Vector& x) { return potential_energy(sys, x); };
    note("grad V", rel_err(potential_gradient(sys, q), fd_gradient(v, q)));
    auto xi = [&](const Vector& x) { return cv.value(x); };
    const CvEval e = cv.eval(q);
    note("grad xi", rel_err(e.full_grad(d), fd_gradient(xi, q)));
    auto grad_xi = [&](const Vector& x) { return cv.eval(x).full_grad(d); };
    note("hess xi", rel_err(e.full_hess(d), fd_jacobian(grad_xi, q)));

    const KineticPoint pt = kinetic_point(ctx, q);
    auto hq = [&](const Vector& x) { return hamiltonian(ctx, kinetic_point(ctx, x), p); };
    auto hp = [&](const Vector& x) { return hamiltonian(ctx, pt, x); };
    note("grad_q H", rel_err(grad_q_H(ctx, pt, p), fd_gradient(hq, q)));
    note("grad_p H", rel_err(grad_p_H(ctx, pt.cv, pt.a, p), fd_gradient(hp, p)));

    for (auto conv : {SigmaConvention::Unit, SigmaConvention::Exact}) {
      auto c = dimer_context(0.9, conv);
      const Vector div = Vector(eval_diffusion(c.diff, c.cv->eval(q), d, true).divergence);
      Vector full = Vector::Zero(d);
      full.head(div.size()) = div;
      note("div D", rel_err(full, fd_divergence(c, q)));

      std::uniform_real_distribution<double> uz(-0.15, 1.15);
      const double z = uz(rng), h = 1e-6;
      const double fd = (c.diff.a_alpha(z + h).a - c.diff.a_alpha(z - h).a) / (2 * h);
      note("a'", std::abs(c.diff.a_alpha(z).prime - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  Outcome out{true, std::to_string(kStates) + " states, max rel err:"};
  for (const auto& [what, e] : worst) {
    out.pass &= e < 1e-4;
    out.detail += " " + what + " " + fmt(e, 2) + ";";
  }
  out.detail += " tol 1e-4";
  return out;
}

Outcome matrix_identities(Shared& sh) {
  std::mt19937_64 rng(derive_seed(sh.options().seed, 2));
  const SystemParams sys = SystemParams::standard_dimer();
  const int d = sys.dim();
  const double kappa = 0.37;
  double e_sqrt = 0, e_inv = 0, e_det = 0, e_eig = 0;
  for (double alpha : {0.5, 1.5, -0.7}) {
    const auto ctx = dimer_context(alpha, SigmaConvention::Unit, smooth_model(), kappa);
    for (int k = 0; k < kStates; ++k) {
      const CvEval cv = ctx.cv->eval(random_config(sys, rng));
      const DiffusionEval ev = eval_diffusion(ctx.diff, cv, d, true);
      const Matrix D = dense(ev.d, cv, d);
      const Matrix S = dense(ev.sqrt, cv, d);
      e_sqrt = std::max(e_sqrt, rel_err(S * S, D));
      e_inv = std::max(e_inv, rel_err(D * dense(ev.inv, cv, d), Matrix::Identity(d, d)));
      const double det_ref = std::pow(kappa, d) * ev.a;
      e_det = std::max(e_det, std::abs(D.lu().determinant() / det_ref - 1.0));
      Eigen::SelfAdjointEigenSolver<Matrix> es(D, Eigen::EigenvaluesOnly);
      std::vector<double> want(d - 1, kappa);
      want.push_back(kappa * ev.a);
      std::sort(want.begin(), want.end());
      for (int i = 0; i < d; ++i)
        e_eig = std::max(e_eig, std::abs(es.eigenvalues()[i] - want[i]) / std::max(1.0, want[i]));
    }
  }
  const bool pass = e_sqrt < 1e-10 && e_inv < 1e-10 && e_det < 1e-10 && e_eig < 1e-10;
  return {pass, "sqrt " + fmt(e_sqrt, 2) + ", inverse " + fmt(e_inv, 2) + ", det " + fmt(e_det, 2) +
                    ", eigenvalues " + fmt(e_eig, 2) + "; tol 1e-10"};
}

Outcome newton_block_dense(Shared& sh) {
  std::mt19937_64 rng(derive_seed(sh.options().seed, 3));
  const SystemParams sys = SystemParams::standard_dimer();
  const int d = sys.dim();
  const auto ctx = dimer_context(1.4);
  NewtonParams block, full;
  full.solve = NewtonParams::LinearSolve::Dense;
  double e_newton = 0;
  bool same_length = true;
  auto compare = [&](const std::vector<Vector>& a, const std::vector<Vector>& b) {
    same_length &= a.size() == b.size();
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
      e_newton = std::max(e_newton, (a[i] - b[i]).norm() / (1 + a[i].norm()));
  };
  // States the integrator visits: no hard overlaps, momenta from their law.
  // At |grad V| ~ 1e3 the iteration at dt = 0.1 diverges and amplifies
  // rounding differences, so iterates cannot be compared there.
  int converged = 0;
  for (int k = 0; k < kStates; ++k) {
    const KineticPoint pt = kinetic_point(ctx, random_config(sys, rng, 1.05));
    const Vector p = sample_momenta(ctx, pt.cv, pt.a, gaussian_vector(rng, d));
    std::vector<Vector> tb, td, sb, sd;
    const NewtonResult m = newton_momenta(ctx, pt, p, 0.1, block, &tb);
    newton_momenta(ctx, pt, p, 0.1, full, &td);
    compare(tb, td);
    const NewtonResult x = newton_position(ctx, pt, m.x, 0.1, block, &sb);
    newton_position(ctx, pt, m.x, 0.1, full, &sd);
    compare(sb, sd);
    converged += m.status == NewtonStatus::Converged && x.status == NewtonStatus::Converged;
  }

  double e_ou = 0;
  auto ou = dimer_context(1.0, SigmaConvention::Unit, smooth_model(), 0.6);
  ou.sys.beta = ou.diff.beta = 1.3;
  const double dt = 0.07, gamma = 2.5, theta = 0.25 * gamma * dt;
  const Matrix I = Matrix::Identity(d, d);
  for (int k = 0; k < kStates; ++k) {
    const KineticPoint pt = kinetic_point(ou, random_config(sys, rng));
    const Vector p = gaussian_vector(rng, d), g = gaussian_vector(rng, d);
    const Matrix D = dense(eval_diffusion(ou.diff, pt.cv, d, true).d, pt.cv, d);
    const Vector rhs = (I - theta * D) * p + std::sqrt(gamma * dt / ou.sys.beta) * g;
    const Vector ref = (I + theta * D).fullPivLu().solve(rhs);
    e_ou = std::max(e_ou, rel_err(ou_half_step(ou, pt.cv, pt.a, p, dt, gamma, g), ref));
    e_ou = std::max(e_ou, rel_err(dense(ou_inverse(ou, pt.a, theta), pt.cv, d), (I + theta * D).inverse()));
  }
  const bool pass = same_length && e_newton < 1e-10 && e_ou < 1e-12;
  return {pass, std::to_string(converged) + "/" + std::to_string(kStates) +
                    " states converged; Newton iterate dev " + fmt(e_newton, 2) + (same_length ? "" : " (iteration counts differ)") +
                    " (tol 1e-10); OU inverse dev " + fmt(e_ou, 2) + " (tol 1e-12)"};
}

Outcome gsv_reversibility(Shared& sh) {
  std::mt19937_64 rng(derive_seed(sh.options().seed, 4));
  const SystemParams sys = SystemParams::standard_dimer();
  const int d = sys.dim();
  // Loose acceptance threshold so the raw round-trip residuals are observed.
  NewtonParams raw;
  raw.tol_rev = 1.0;
  double worst = 0;
  int ok = 0, tried = 0;
  for (double alpha : {0.8, 1.6})
    for (double dt : {0.05, 0.1}) {
      const auto ctx = dimer_context(alpha);
      for (int k = 0; k < kStates; ++k) {
        const KineticPoint pt = kinetic_point(ctx, random_config(sys, rng, 1.05));
        const Vector p = sample_momenta(ctx, pt.cv, pt.a, gaussian_vector(rng, d));
        const GsvOutcome o = gsv_rev(ctx, pt, p, dt, raw);
        ++tried;
        if (o.status != GsvStatus::Ok) continue;
        ++ok;
        worst = std::max(worst, o.residual);
      }
    }

  // alpha = 0: one explicit leapfrog step with D = kappa I.
  double lf = 0, lf_rev = 0;
  const double kappa = 0.8, dt = 0.1;
  const auto ctx0 = dimer_context(0.0, SigmaConvention::Unit, smooth_model(), kappa);
  for (int k = 0; k < kStates; ++k) {
    const KineticPoint pt = kinetic_point(ctx0, random_config(sys, rng, 1.05));
    const Vector p = sample_momenta(ctx0, pt.cv, pt.a, gaussian_vector(rng, d));
    const Vector half = p - 0.5 * dt * pt.grad_v;
    Vector q1 = pt.q + dt * kappa * half;
    wrap(q1, sys.box_len);
    const Vector p1 = half - 0.5 * dt * potential_gradient(sys, q1);
    const GsvOutcome o = gsv_rev(ctx0, pt, p, dt, raw);
    if (o.status != GsvStatus::Ok) {
      lf = INFINITY;
      continue;
    }
    const double scale = std::max(1.0, p1.cwiseAbs().maxCoeff());
    lf = std::max(lf, min_image_diff(o.q, q1, sys.box_len).cwiseAbs().maxCoeff());
    lf = std::max(lf, (o.p - p1).cwiseAbs().maxCoeff() / scale);
    lf_rev = std::max(lf_rev, o.residual);
  }
  const bool pass = ok > 0 && worst < 1e-6 && lf < 1e-12 && lf_rev < 1e-12;
  return {pass, std::to_string(ok) + "/" + std::to_string(tried) + " ok round trips, max residual " +
                    fmt(worst, 2) + " (tol 1e-6); alpha=0 vs leapfrog " + fmt(lf, 2) + ", round trip " +
                    fmt(lf_rev, 2) + " (tol 1e-12)"};
}

Outcome ti_constraint(Shared& sh) {
  std::mt19937_64 rng(derive_seed(sh.options().seed, 5));
  const SystemParams sys = SystemParams::standard_dimer();
  const DimerBondCv cv(sys);
  const double L = sys.box_len, dt = 2.5e-5;
  const int steps = 20000;
  auto midpoint = [&](const Vector& q) {
    const Vec2 a = particle(q, 0);
    return Vec2(a + 0.5 * min_image(particle(q, 1), a, L));
  };
  double e_xi = 0, e_com = 0, e_step = 0;
  std::int64_t moves = 0, refused = 0;
  Vector q = lattice_config(sys);
  for (double z : {-0.15, 0.2, 0.6, 0.95, 1.15}) {
    q = warm_start(sys, cv, q, z);
    for (int n = 0; n < steps; ++n) {
      const Vector g = gaussian_vector(rng, sys.dim());
      Vector pred = q - dt * potential_gradient(sys, q) + std::sqrt(2 * dt / sys.beta) * g;
      wrap(pred, L);
      const Vec2 before = midpoint(pred);
      Vector projected = pred;
      const bool ok = project_dimer(sys, cv, projected, z);
      Vector via_step;
      const bool ok_step = constrained_step(sys, cv, q, z, dt, g, via_step);
      if (ok != ok_step) e_step = INFINITY;
      if (!ok) {
        ++refused;
        continue;
      }
      ++moves;
      e_step = std::max(e_step, (via_step - projected).cwiseAbs().maxCoeff());
      e_xi = std::max(e_xi, std::abs(cv.value(projected) - z));
      e_com = std::max(e_com, min_image(midpoint(projected), before, L).cwiseAbs().maxCoeff());
      q = projected;
    }
  }
  const bool pass = moves > 0 && e_xi < 1e-10 && e_com < 1e-12 && e_step < 1e-12;
  return {pass, std::to_string(moves) + " constrained moves (" + std::to_string(refused) +
                    " refused folds): max |xi - z| " + fmt(e_xi, 2) + " (tol 1e-10), center shift " +
                    fmt(e_com, 2) + " (tol 1e-12)"};
}

Outcome ou_stationary(Shared& sh) {
  std::mt19937_64 rng(derive_seed(sh.options().seed, 6));
  auto ctx = dimer_context(1.2, SigmaConvention::Unit, smooth_model(), 0.6);
  ctx.sys.beta = ctx.diff.beta = 1.3;
  const int d = ctx.dim();
  const KineticPoint pt = kinetic_point(ctx, random_config(ctx.sys, rng));
  const Matrix D = dense(eval_diffusion(ctx.diff, pt.cv, d, true).d, pt.cv, d);
  Eigen::SelfAdjointEigenSolver<Matrix> es(D);
  const Matrix Ut = es.eigenvectors().transpose();

  const std::int64_t iterations = 1000000;
  const int batches = 100;
  const std::int64_t per = iterations / batches;
  const double dt = 0.2, gamma = 1.0;
  Vector p = sample_momenta(ctx, pt.cv, pt.a, gaussian_vector(rng, d));
  Matrix means(d, batches);
  Vector acc(d), g(d), m(d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int b = 0; b < batches; ++b) {
    acc.setZero();
    for (std::int64_t n = 0; n < per; ++n) {
      for (int i = 0; i < d; ++i) g[i] = normal(rng);
      p = ou_half_step(ctx, pt.cv, pt.a, p, dt, gamma, g);
      m.noalias() = Ut * p;
      acc += m.cwiseAbs2();
    }
    means.col(b) = acc / double(per);
  }
  double worst = 0;
  for (int i = 0; i < d; ++i) {
    const double mean = means.row(i).mean();
    const double var = (means.row(i).array() - mean).square().sum() / (batches - 1);
    const double target = 1.0 / (ctx.sys.beta * es.eigenvalues()[i]);
    worst = std::max(worst, std::abs(mean - target) / std::sqrt(var / batches));
  }
  return {worst < 4.0, std::to_string(d) + " modes, 1e6 iterations: max deviation " + fmt(worst) +
                           " standard errors (tol 4)"};
}

}  // namespace effdiff::acceptance
