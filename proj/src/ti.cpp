#include "effdiff/ti.hpp"

#include <algorithm>
#include <cmath>

#include "effdiff/errors.hpp"

namespace effdiff {

std::int64_t TiConfig::steps_per_level() const {
  return static_cast<std::int64_t>(std::llround(sim_time_per_level / dt));
}

void TiConfig::validate() const {
  grid.validate();
  if (!(dt > 0)) throw ConfigError("TI time step must be positive");
  if (!(sim_time_per_level > 0)) throw ConfigError("TI simulation time must be positive");
  if (!(burn_in_fraction >= 0 && burn_in_fraction < 1))
    throw ConfigError("TI burn-in fraction must lie in [0, 1)");
  if (n_batches < 2) throw ConfigError("TI needs at least two batches");
  const std::int64_t kept = steps_per_level() - static_cast<std::int64_t>(burn_in_fraction * steps_per_level());
  if (kept < n_batches) throw ConfigError("TI level is shorter than the number of batches");
}

namespace {

bool fits_cell(const Vec2& d, double box_len) {
  const double h = 0.5 * box_len;
  return d[0] >= -h && d[0] < h && d[1] >= -h && d[1] < h;
}

}  // namespace

bool project_dimer(const SystemParams& sys, const DimerBondCv& cv, Vector& q, double z,
                   double* dlambda) {
  const double L = sys.box_len;
  const Vec2 p1 = particle(q, 0), p2 = particle(q, 1);
  const Vec2 d = min_image(p1, p2, L);
  const double r_pred = d.norm();
  if (r_pred == 0.0) throw SingularCvError("dimer particles coincide in the constrained move");
  const double r_target = cv.bond_length(z);
  const double c = r_target / r_pred;
  const Vec2 nd = c * d;
  if (!fits_cell(nd, L)) return false;
  // frame of particle 2: p1 -> p2 + d, then rescale about the center
  const Vec2 p1f = p2 + d;
  const Vec2 n1 = 0.5 * (1.0 + c) * p1f + 0.5 * (1.0 - c) * p2;
  const Vec2 n2 = 0.5 * (1.0 - c) * p1f + 0.5 * (1.0 + c) * p2;
  q[0] = wrap_coord(n1[0], L);
  q[1] = wrap_coord(n1[1], L);
  q[2] = wrap_coord(n2[0], L);
  q[3] = wrap_coord(n2[1], L);
  if (dlambda) *dlambda = 2.0 * sys.w * sys.w * (z - (r_pred - sys.r0) / (2.0 * sys.w));
  return true;
}

bool constrained_step(const SystemParams& sys, const DimerBondCv& cv, const Vector& q, double z,
                      double dt, const Vector& gauss, Vector& out, double* dlambda) {
  Vector grad;
  energy_and_gradient(sys, q, grad);
  Vector pred = q - dt * grad + std::sqrt(2.0 * dt / sys.beta) * gauss;
  wrap(pred, sys.box_len);
  if (!project_dimer(sys, cv, pred, z, dlambda)) return false;
  out = std::move(pred);
  return true;
}

Vector ti_initial_config(const SystemParams& sys, double z) {
  Vector q = lattice_config(sys);
  q[3] = wrap_coord(q[1] + sys.r0 + 2.0 * sys.w * z, sys.box_len);
  return q;
}

Vector warm_start(const SystemParams& sys, const DimerBondCv& cv, const Vector& q, double z) {
  const double L = sys.box_len;
  const double r = cv.bond_length(z);
  const Vec2 p1 = particle(q, 0);
  const Vec2 d = min_image(particle(q, 1), p1, L);
  // Bonds longer than L/2 only fit inside arcs around the diagonals,
  // |theta mod pi/2 - pi/4| <= pi/4 - acos(L / 2r). Keep the direction when
  // allowed, else rotate to the nearest end of the arc.
  double theta = d.norm() > 0 ? std::atan2(d[1], d[0]) : M_PI / 4;
  const double h = 0.5 * L * (1.0 - 1e-12);
  if (r > h) {
    if (r * r >= 2.0 * h * h) throw NumericalError("bond length does not fit the periodic cell");
    const double lo = std::acos(h / r);
    const double quadrant = std::floor(theta / (M_PI / 2));
    const double local = theta - quadrant * (M_PI / 2);
    theta = quadrant * (M_PI / 2) + std::clamp(local, lo, M_PI / 2 - lo);
  }
  Vector out = q;
  out[2] = wrap_coord(p1[0] + r * std::cos(theta), L);
  out[3] = wrap_coord(p1[1] + r * std::sin(theta), L);
  if (!(std::abs(cv.value(out) - z) < 1e-10)) throw NumericalError("cannot place the dimer on the requested level");
  return out;
}

namespace {

// Batch-means standard error of a sequence split into n_batches equal parts.
struct BatchAccumulator {
  std::int64_t per_batch;
  int n_batches;
  std::vector<double> batch_sums;
  std::int64_t n = 0;
  double total = 0.0;

  BatchAccumulator(std::int64_t samples, int batches)
      : per_batch(samples / batches), n_batches(batches), batch_sums(batches, 0.0) {}

  void add(double x) {
    const std::int64_t b = n / per_batch;
    if (b < n_batches) batch_sums[b] += x;
    total += x;
    ++n;
  }
  double mean() const { return total / static_cast<double>(n); }
  double std_error() const {
    double m = 0.0;
    for (double s : batch_sums) m += s / per_batch;
    m /= n_batches;
    double var = 0.0;
    for (double s : batch_sums) {
      const double e = s / per_batch - m;
      var += e * e;
    }
    var /= (n_batches - 1);
    return std::sqrt(var / n_batches);
  }
};

}  // namespace

TiResult ti_run(const SystemParams& sys, const TiConfig& cfg, const TiProgress& progress) {
  sys.validate();
  cfg.validate();
  const DimerBondCv cv(sys);
  const LatentGrid& g = cfg.grid;
  const std::int64_t n_steps = cfg.steps_per_level();
  const std::int64_t burn = static_cast<std::int64_t>(cfg.burn_in_fraction * n_steps);
  const int d = sys.dim();

  TiResult res;
  res.mean_force = Profile(g, 0.0, 0.0);
  res.mean_force_se = Profile(g, 0.0, 0.0);
  res.drift = Profile(g, 0.0, 0.0);
  res.noise = Profile(g, 1.0, 1.0);
  res.mean_force.counts.assign(g.n_bins, 0);

  Vector q = ti_initial_config(sys, g.center(0));
  Vector gauss(d), pred(d), grad;
  const double noise_amp = std::sqrt(2.0 * cfg.dt / sys.beta);
  for (int i = 0; i < g.n_bins; ++i) {
    const double z = g.center(i);
    q = warm_start(sys, cv, q, z);
    energy_and_gradient(sys, q, grad);
    RandomSource rng(derive_seed(cfg.seed, 0x7469, static_cast<std::uint64_t>(i)));
    BatchAccumulator f_acc(n_steps - burn, cfg.n_batches), b_acc(n_steps - burn, cfg.n_batches);
    double noise_sum = 0.0;
    TiLevel lvl;
    lvl.z = z;
    for (std::int64_t n = 0; n < n_steps; ++n) {
      // A bond that no longer fits the minimum-image cell cannot sit on this
      // level; the move is refused and the chain stays put.
      rng.fill_gaussian(gauss);
      pred = q - cfg.dt * grad + noise_amp * gauss;
      wrap(pred, sys.box_len);
      if (project_dimer(sys, cv, pred, z)) {
        std::swap(q, pred);
        energy_and_gradient(sys, q, grad);
      } else {
        ++lvl.folds;
      }
      if (n < burn) continue;
      const CvEval ce = cv.eval(q);
      f_acc.add(local_mean_force(sys.beta, grad, ce, true));
      b_acc.add(effective_drift_integrand(sys.beta, grad, ce));
      noise_sum += ce.grad_norm_sq;
    }
    lvl.samples = f_acc.n;
    lvl.mean_force = f_acc.mean();
    lvl.mean_force_se = f_acc.std_error();
    lvl.drift = b_acc.mean();
    lvl.drift_se = b_acc.std_error();
    lvl.noise = noise_sum / static_cast<double>(f_acc.n);
    res.mean_force.values[i] = lvl.mean_force;
    res.mean_force.counts[i] = lvl.samples;
    res.mean_force_se.values[i] = lvl.mean_force_se;
    res.drift.values[i] = lvl.drift;
    res.noise.values[i] = lvl.noise;
    res.levels.push_back(lvl);
    if (progress) progress(i, lvl);
  }
  res.free_energy = integrate_mean_force(res.mean_force);
  return res;
}

}  // namespace effdiff
