#include "effdiff/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "effdiff/errors.hpp"

namespace effdiff {

void MetastableClassifier::validate() const {
  if (!(eta > 0 && eta < 0.5)) throw ConfigError("metastable threshold eta must lie in (0, 0.5)");
}

void summarize(TransitionResult& r) {
  const auto k = static_cast<double>(r.tau.size());
  if (r.tau.empty()) {
    r.tau_hat = r.std_dev = r.ci_low = r.ci_high = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  double sum = 0.0;
  for (auto t : r.tau) sum += static_cast<double>(t);
  r.tau_hat = sum / k;
  double ss = 0.0;
  for (auto t : r.tau) ss += (static_cast<double>(t) - r.tau_hat) * (static_cast<double>(t) - r.tau_hat);
  r.std_dev = r.tau.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
  const double half = 1.96 * r.std_dev / std::sqrt(k);
  r.ci_low = r.tau_hat - half;
  r.ci_high = r.tau_hat + half;
}

TransitionResult run_transition_experiment(const std::function<double()>& advance,
                                           std::int64_t k_target, const MetastableClassifier& cls,
                                           std::int64_t max_iterations) {
  if (k_target < 1) throw ConfigError("number of transitions must be at least 1");
  cls.validate();
  TransitionResult r;
  r.tau.reserve(static_cast<std::size_t>(std::min<std::int64_t>(k_target, 1 << 20)));
  Basin target = Basin::C1;
  std::int64_t since = 0;
  while (static_cast<std::int64_t>(r.tau.size()) < k_target) {
    if (max_iterations > 0 && r.iterations >= max_iterations) break;
    const double xi = advance();
    ++r.iterations;
    ++since;
    if (cls.classify(xi) == target) {
      r.tau.push_back(since);
      since = 0;
      target = target == Basin::C1 ? Basin::C0 : Basin::C1;
    }
  }
  r.complete = static_cast<std::int64_t>(r.tau.size()) == k_target;
  summarize(r);
  return r;
}

// ---------------------------------------------------------------------------

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Mala: return "mala";
    case Scheme::AdaptiveMala: return "adaptive-mala";
    case Scheme::Rmhmc: return "rmhmc";
    case Scheme::Rmghmc: return "rmghmc";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& s) {
  if (s == "mala") return Scheme::Mala;
  if (s == "adaptive-mala") return Scheme::AdaptiveMala;
  if (s == "rmhmc") return Scheme::Rmhmc;
  if (s == "rmghmc") return Scheme::Rmghmc;
  throw ConfigError("unknown scheme '" + s + "' (expected mala, adaptive-mala, rmhmc, rmghmc)");
}

bool is_kinetic(Scheme s) { return s == Scheme::Rmhmc || s == Scheme::Rmghmc; }

std::vector<double> logspace(double a, double b, int n) {
  if (!(a > 0) || !(b > 0) || n < 1) throw ConfigError("logspace needs positive bounds and n >= 1");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  const double la = std::log(a), lb = std::log(b);
  for (int i = 0; i < n; ++i) out[i] = std::exp(la + (lb - la) * i / (n - 1));
  out.front() = a;
  out.back() = b;
  return out;
}

std::vector<double> SchemeGrid::dts() const { return logspace(dt_min, dt_max, n_dt); }

std::vector<double> SchemeGrid::abh_values() const {
  std::vector<double> out;
  const int n = static_cast<int>(std::lround(abh_max / abh_step));
  for (int i = 0; i <= n; ++i) out.push_back(i * abh_step);
  return out;
}

SchemeGrid default_grid(Scheme s) {
  switch (s) {
    case Scheme::Mala:
    case Scheme::AdaptiveMala: return {1e-3, 5e-3, 16, 3.1, 0.1};
    case Scheme::Rmhmc: return {5e-2, 1.5e-1, 16, 1.5, 0.1};
    case Scheme::Rmghmc: return {1e-2, 1e-1, 16, 2.4, 0.1};
  }
  return {};
}

DiffusionSpec make_diffusion(const SchemeSetup& setup, double alpha) {
  DiffusionSpec spec;
  spec.alpha = alpha;
  spec.beta = setup.sys.beta;
  spec.sigma = setup.sigma;
  spec.model = setup.model ? setup.model : std::make_shared<const ProfileModel>(setup.learner.grid);
  spec.kappa = 1.0;
  if (setup.model) spec.kappa = kappa_alpha(spec, setup.sys.dim());
  return spec;
}

std::unique_ptr<Chain> make_chain(Scheme scheme, const SchemeSetup& setup, double alpha, double dt,
                                  std::uint64_t seed) {
  const bool adaptive = setup.adaptive || scheme == Scheme::AdaptiveMala;
  if (!adaptive && !setup.model) {
    if (is_kinetic(scheme))
      throw ConfigError(std::string(scheme_name(scheme)) +
                        " needs mean-force profiles: run the ti command first, or enable adaptive learning");
    if (alpha != 0.0)
      throw ConfigError("alpha > 0 needs mean-force profiles: run the ti command first, or enable adaptive learning");
  }
  SamplerContext ctx;
  ctx.sys = setup.sys;
  ctx.cv = std::make_shared<const DimerBondCv>(setup.sys);
  ctx.diff = adaptive ? initial_adaptive_spec(setup.learner.grid, alpha, setup.sys.beta, setup.sigma)
                      : make_diffusion(setup, alpha);
  std::unique_ptr<Chain> chain;
  const Vector q0 = setup.start();
  switch (scheme) {
    case Scheme::Mala:
    case Scheme::AdaptiveMala:
      chain = std::make_unique<MalaChain>(std::move(ctx), dt, seed, q0);
      break;
    case Scheme::Rmhmc:
      chain = std::make_unique<KineticChain>(KineticChain::Mode::Rmhmc, std::move(ctx), dt, seed, q0,
                                             setup.newton, setup.gamma);
      break;
    case Scheme::Rmghmc:
      chain = std::make_unique<KineticChain>(KineticChain::Mode::Rmghmc, std::move(ctx), dt, seed, q0,
                                             setup.newton, setup.gamma);
      break;
  }
  if (adaptive) chain->enable_learning(setup.learner);
  return chain;
}

std::uint64_t cell_seed(std::uint64_t base, Scheme s, double alpha, double dt) {
  return derive_seed(base, static_cast<std::uint64_t>(s) + 1, std::bit_cast<std::uint64_t>(alpha),
                     std::bit_cast<std::uint64_t>(dt));
}

SweepCell run_cell(const SchemeSetup& setup, Scheme scheme, double alpha, double dt,
                   std::int64_t k_target, std::uint64_t seed, const MetastableClassifier& cls,
                   std::int64_t max_iterations) {
  SweepCell cell;
  cell.scheme = scheme;
  cell.alpha = alpha;
  cell.dt = dt;
  try {
    auto chain = make_chain(scheme, setup, alpha, dt, seed);
    Chain* c = chain.get();
    cell.result = run_transition_experiment(
        [c] {
          c->step();
          return c->xi();
        },
        k_target, cls, max_iterations);
    cell.accept_rate = c->accept_rate();
    if (!cell.result.complete) {
      cell.failed = true;
      cell.error = "iteration budget exhausted";
    }
  } catch (const NumericalError& e) {
    cell.failed = true;
    cell.error = e.what();
    summarize(cell.result);
  }
  return cell;
}

std::vector<SweepCell> sweep(const SchemeSetup& setup, const SweepConfig& cfg,
                             const std::function<void(const SweepCell&)>& on_cell) {
  cfg.classifier.validate();
  if (cfg.alphas.empty() || cfg.dts.empty()) throw ConfigError("sweep grid is empty");
  const std::size_t n = cfg.alphas.size() * cfg.dts.size();
  std::vector<SweepCell> cells(n);
  std::atomic<std::size_t> next{0};
  std::mutex cb_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const double alpha = cfg.alphas[i / cfg.dts.size()];
      const double dt = cfg.dts[i % cfg.dts.size()];
      cells[i] = run_cell(setup, cfg.scheme, alpha, dt, cfg.k_target,
                          cell_seed(cfg.seed, cfg.scheme, alpha, dt), cfg.classifier, cfg.max_iterations);
      if (on_cell) {
        std::lock_guard lock(cb_mutex);
        on_cell(cells[i]);
      }
    }
  };
  const int threads = std::max(1, std::min<int>(cfg.threads, static_cast<int>(n)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return cells;
}

double tau_star(const std::vector<SweepCell>& cells, double alpha) {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (const auto& c : cells) {
    if (c.alpha != alpha || c.failed) continue;
    if (std::isnan(best) || c.result.tau_hat < best) best = c.result.tau_hat;
  }
  return best;
}

double RejectionBreakdown::percent(StepOutcome o) const {
  return trials ? 100.0 * static_cast<double>(count(o)) / static_cast<double>(trials) : 0.0;
}

double RejectionBreakdown::global_percent() const {
  return trials ? 100.0 * static_cast<double>(trials - count(StepOutcome::Accepted)) /
                      static_cast<double>(trials)
                : 0.0;
}

RejectionBreakdown rejection_stats(const SchemeSetup& setup, Scheme scheme, double alpha, double dt,
                                   std::int64_t trials, std::uint64_t seed) {
  if (trials < 1) throw ConfigError("number of trials must be at least 1");
  SchemeSetup fixed = setup;
  fixed.adaptive = false;
  auto chain = make_chain(scheme == Scheme::AdaptiveMala ? Scheme::Mala : scheme, fixed, alpha, dt, seed);
  const Vector q0 = fixed.start();
  RejectionBreakdown out;
  for (std::int64_t t = 0; t < trials; ++t) {
    if (t > 0) chain->reset(q0);
    out.add(chain->step());
  }
  return out;
}

}  // namespace effdiff
