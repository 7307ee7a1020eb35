#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "effdiff/errors.hpp"

namespace effdiff::cli {

namespace {

namespace fs = std::filesystem;

/// Config reader that turns "[section] key = v" into the option
/// "--section.key" instead of a subcommand lookup.
class SectionedConfig : public CLI::ConfigBase {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::vector<CLI::ConfigItem> items;
    for (auto& item : CLI::ConfigBase::from_config(input)) {
      if (item.name == "++" || item.name == "--") continue;
      std::string name;
      for (const auto& p : item.parents) name += p + ".";
      item.name = name + item.name;
      item.parents.clear();
      items.push_back(std::move(item));
    }
    return items;
  }
};

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

std::string path_in(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out) / name).string();
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

SystemParams RunConfig::system() const {
  SystemParams p = SystemParams::standard_dimer(n_particles, density);
  p.beta = beta;
  p.w = w;
  p.barrier_h = barrier_h;
  return p;
}

SigmaConvention RunConfig::sigma_convention() const {
  if (sigma == "unit") return SigmaConvention::Unit;
  if (sigma == "exact") return SigmaConvention::Exact;
  throw ConfigError("sigma convention must be 'unit' or 'exact', got '" + sigma + "'");
}

NewtonParams RunConfig::newton() const {
  NewtonParams p;
  p.max_iter = newton_max_iter;
  p.tol_cauchy = tol_cauchy;
  p.tol_root = tol_root;
  p.tol_rev = tol_rev;
  if (linear_solve == "block") p.solve = NewtonParams::LinearSolve::Block;
  else if (linear_solve == "dense") p.solve = NewtonParams::LinearSolve::Dense;
  else throw ConfigError("linear solve must be 'block' or 'dense', got '" + linear_solve + "'");
  return p;
}

TiConfig RunConfig::ti() const {
  TiConfig t;
  t.grid = grid();
  t.dt = ti_dt;
  t.sim_time_per_level = quick ? std::min(ti_time, kQuickTiTime) : ti_time;
  t.burn_in_fraction = ti_burn_in;
  t.n_batches = ti_batches;
  t.seed = derive_seed(seed, 0x7469);
  return t;
}

std::int64_t RunConfig::k_target() const { return quick ? std::min(k, kQuickK) : k; }

std::vector<double> RunConfig::alpha_values() const {
  std::vector<double> out = alphas;
  for (double v : abh) out.push_back(v / (beta * barrier_h));
  if (!out.empty()) return out;
  if (command != "bench") return {0.0};
  SchemeGrid g = default_grid(scheme_kind());
  if (abh_max >= 0) g.abh_max = abh_max;
  g.abh_step = abh_step;
  for (double v : g.abh_values()) out.push_back(v / (beta * barrier_h));
  return out;
}

std::vector<double> RunConfig::dt_values() const {
  if (!dts.empty()) return dts;
  const Scheme s = scheme_kind();
  if (command == "bench") {
    SchemeGrid g = default_grid(s);
    if (dt_min > 0) g.dt_min = dt_min;
    if (dt_max > 0) g.dt_max = dt_max;
    g.n_dt = n_dt;
    return g.dts();
  }
  switch (s) {
    case Scheme::Mala:
    case Scheme::AdaptiveMala:
      return {2.6e-3};
    case Scheme::Rmhmc:
      return {1e-1};
    case Scheme::Rmghmc:
      return {5e-2};
  }
  return {};
}

void RunConfig::validate() const {
  if (preset != "standard-dimer") throw ConfigError("unknown system preset '" + preset + "'");
  system().validate();
  if (!(density > 0)) throw ConfigError("density must be positive");
  grid().validate();
  const Scheme s = scheme_kind();
  sigma_convention();
  newton().validate();
  if (!(gamma > 0)) throw ConfigError("gamma must be positive");
  if (n_min < 1 || n_update < 1) throw ConfigError("n_min and n_update must be at least 1");
  MetastableClassifier{eta}.validate();
  for (double a : alpha_values())
    if (!(a >= 0) || !std::isfinite(a)) throw ConfigError("alpha values must be finite and nonnegative");
  for (double dt : dt_values())
    if (!(dt > 0)) throw ConfigError("step sizes must be positive");
  if (steps < 1 || every < 1) throw ConfigError("steps and every must be at least 1");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (max_iterations < 0) throw ConfigError("max_iterations must be nonnegative");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (command == "ti" || ti_first) ti().validate();

  const bool adaptive_run = adaptive || s == Scheme::AdaptiveMala;
  const bool has_profiles = !mean_force.empty() || ti_first;
  if (!free_energy.empty() && mean_force.empty())
    throw ConfigError("--free-energy is a consistency check and needs --mean-force");
  if (adaptive_run && has_profiles)
    throw ConfigError("adaptive runs learn their own profiles; drop --mean-force/--ti-first");
  if (!mean_force.empty() && ti_first) throw ConfigError("--ti-first and --mean-force are exclusive");
  if (sigma_convention() == SigmaConvention::Exact && !mean_force.empty() && (noise.empty() || drift.empty()))
    throw ConfigError("sigma convention 'exact' needs --noise and --drift profiles");
  if (command != "ti" && !adaptive_run && !has_profiles) {
    bool needs = is_kinetic(s);
    for (double a : alpha_values()) needs = needs || a != 0.0;
    if (needs)
      throw ConfigError(std::string("scheme ") + scheme_name(s) +
                        " needs latent profiles: run `effdiff ti` first and pass --mean-force, "
                        "or use --ti-first or --adaptive");
  }
}

std::string RunConfig::canonical() const {
  std::ostringstream o;
  auto kv = [&](const char* k, const auto& v) { o << k << '=' << v << '\n'; };
  auto kd = [&](const char* k, double v) { o << k << '=' << format_double(v) << '\n'; };
  kv("command", command);
  kv("system.preset", preset);
  kv("system.n_particles", n_particles);
  kd("system.density", density);
  kd("system.beta", beta);
  kd("system.w", w);
  kd("system.h", barrier_h);
  kd("grid.z_min", z_min);
  kd("grid.z_max", z_max);
  kv("grid.n_z", n_z);
  kv("sampler.scheme", scheme);
  kv("sampler.alpha", join(alpha_values()));
  kv("sampler.dt", join(dt_values()));
  kv("sampler.adaptive", adaptive);
  kv("sampler.sigma", sigma);
  kv("sampler.n_min", n_min);
  kv("sampler.n_update", n_update);
  kv("sampler.freeze_after", freeze_after);
  kv("sampler.newton_max_iter", newton_max_iter);
  kd("sampler.tol_cauchy", tol_cauchy);
  kd("sampler.tol_root", tol_root);
  kd("sampler.tol_rev", tol_rev);
  kv("sampler.linear_solve", linear_solve);
  kd("sampler.gamma", gamma);
  kd("sampler.eta", eta);
  kv("profiles.mean_force", mean_force);
  kv("profiles.free_energy", free_energy);
  kv("profiles.noise", noise);
  kv("profiles.drift", drift);
  kv("profiles.ti_first", ti_first);
  kd("ti.dt", ti_dt);
  kd("ti.time", ti().sim_time_per_level);
  kd("ti.burn_in", ti_burn_in);
  kv("ti.batches", ti_batches);
  kv("run.steps", steps);
  kv("run.every", every);
  kv("run.k", k_target());
  kv("run.max_iterations", max_iterations);
  kv("run.trials", trials);
  kv("run.seed", seed);
  return o.str();
}

CsvMeta RunConfig::meta() const { return {hash_text(canonical()), seed}; }

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::unique_ptr<CLI::App> build_app(RunConfig& c) {
  auto owner = std::make_unique<CLI::App>("Sampling with a collective-variable modulated diffusion", "effdiff");
  CLI::App& app = *owner;
  app.config_formatter(std::make_shared<SectionedConfig>());
  app.set_config("--config", "", "key=value file with [system] [grid] [sampler] [profiles] [ti] [run] sections");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_version_flag("--version", std::string(version()));
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.fallthrough();
  app.require_subcommand(1, 1);

  auto opt = [&](const std::string& key, const std::string& flag, auto& var, const std::string& help) {
    return app.add_option(flag + ",--" + key, var, help)->capture_default_str();
  };
  auto list = [&](const std::string& key, const std::string& flag, std::vector<double>& var,
                  const std::string& help) {
    return app.add_option(flag + ",--" + key, var, help)
        ->delimiter(',')
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  };
  auto flag = [&](const std::string& key, const std::string& name, bool& var, const std::string& help) {
    return app.add_flag(name + ",--" + key, var, help);
  };

  opt("system.preset", "--preset", c.preset, "system preset");
  opt("system.n_particles", "--n-particles", c.n_particles, "number of particles");
  opt("system.density", "--density", c.density, "particle density");
  opt("system.beta", "--beta", c.beta, "inverse temperature");
  opt("system.w", "--width", c.w, "double-well width parameter");
  opt("system.h", "--barrier", c.barrier_h, "double-well barrier height");

  opt("grid.z_min", "--z-min", c.z_min, "latent grid lower edge");
  opt("grid.z_max", "--z-max", c.z_max, "latent grid upper edge");
  opt("grid.n_z", "--n-z", c.n_z, "latent grid bins");

  opt("sampler.scheme", "--scheme", c.scheme, "mala | adaptive-mala | rmhmc | rmghmc");
  list("sampler.alpha", "--alpha", c.alphas, "alpha values (comma separated)");
  list("sampler.abh", "--abh", c.abh, "alpha*beta*h values (comma separated)");
  list("sampler.dt", "--dt", c.dts, "step sizes (comma separated)");
  opt("sampler.dt_min", "--dt-min", c.dt_min, "bench: smallest step (0 = scheme default)");
  opt("sampler.dt_max", "--dt-max", c.dt_max, "bench: largest step (0 = scheme default)");
  opt("sampler.n_dt", "--n-dt", c.n_dt, "bench: number of log-spaced steps");
  opt("sampler.abh_max", "--abh-max", c.abh_max, "bench: largest alpha*beta*h (< 0 = scheme default)");
  opt("sampler.abh_step", "--abh-step", c.abh_step, "bench: alpha*beta*h spacing");
  flag("sampler.adaptive", "--adaptive", c.adaptive, "learn the latent profiles on the fly");
  opt("sampler.sigma", "--sigma-convention", c.sigma, "unit | exact");
  opt("sampler.n_min", "--n-min", c.n_min, "minimum bin count before an estimate is used");
  opt("sampler.n_update", "--n-update", c.n_update, "steps between profile refreshes");
  opt("sampler.freeze_after", "--freeze-after", c.freeze_after, "stop learning after N steps (< 0 = never)");
  opt("sampler.newton_max_iter", "--newton-max-iter", c.newton_max_iter, "Newton iteration cap");
  opt("sampler.tol_cauchy", "--tol-cauchy", c.tol_cauchy, "Newton step tolerance");
  opt("sampler.tol_root", "--tol-root", c.tol_root, "Newton residual tolerance");
  opt("sampler.tol_rev", "--tol-rev", c.tol_rev, "reversibility tolerance");
  opt("sampler.linear_solve", "--linear-solve", c.linear_solve, "block | dense");
  opt("sampler.gamma", "--gamma", c.gamma, "friction of the momentum refresh");
  opt("sampler.eta", "--eta", c.eta, "metastable state margin");

  opt("profiles.mean_force", "--mean-force", c.mean_force, "mean-force profile CSV");
  opt("profiles.free_energy", "--free-energy", c.free_energy, "free-energy CSV checked against --mean-force");
  opt("profiles.noise", "--noise", c.noise, "effective noise profile CSV (sigma convention exact)");
  opt("profiles.drift", "--drift", c.drift, "effective drift profile CSV (sigma convention exact)");
  flag("profiles.ti_first", "--ti-first", c.ti_first, "run thermodynamic integration before sampling");

  opt("ti.dt", "--ti-dt", c.ti_dt, "constrained dynamics step");
  opt("ti.time", "--ti-time", c.ti_time, "simulation time per level");
  opt("ti.burn_in", "--ti-burn-in", c.ti_burn_in, "discarded fraction per level");
  opt("ti.batches", "--ti-batches", c.ti_batches, "batches for the standard errors");

  opt("run.steps", "--steps", c.steps, "sample: number of MH cycles");
  opt("run.every", "--every", c.every, "sample: trajectory stride");
  opt("run.k", "--k", c.k, "bench: transitions per cell");
  opt("run.max_iterations", "--max-iterations", c.max_iterations, "bench: per-cell cap (0 = none)");
  opt("run.trials", "--trials", c.trials, "reject: one-step trials");
  flag("run.quick", "--quick", c.quick, "desk-scale run (K <= 2000, short TI)");
  opt("run.out", "--out,-o", c.out, "output directory");
  opt("run.seed", "--seed", c.seed, "base seed");
  opt("run.threads", "--threads,-j", c.threads, "worker threads for sweeps");

  app.add_subcommand("ti", "thermodynamic integration: mean-force and free-energy profiles");
  app.add_subcommand("sample", "run one chain and write its trajectory");
  app.add_subcommand("bench", "transition-time sweep over (alpha, dt)");
  app.add_subcommand("reject", "one-step rejection decomposition");
  return owner;
}

void parse_into(CLI::App& app, RunConfig& c, const std::vector<std::string>& args) {
  std::vector<std::string> rev(args.rbegin(), args.rend());
  app.parse(rev);
  c.command = app.get_subcommands().front()->get_name();
}

}  // namespace

RunConfig parse_args(const std::vector<std::string>& args) {
  RunConfig c;
  auto app = build_app(c);
  parse_into(*app, c, args);
  return c;
}

// ---------------------------------------------------------------------------
// Commands

std::shared_ptr<const LatentModel> load_model(const RunConfig& cfg) {
  if (cfg.mean_force.empty()) return nullptr;
  const Profile mf = read_profile_csv(cfg.mean_force, 0.0);
  if (!cfg.free_energy.empty()) {
    const Profile fe = read_profile_csv(cfg.free_energy, 0.0);
    const FreeEnergy ref(mf);
    if (!(fe.grid.n_bins == mf.grid.n_bins))
      throw ConfigError("free-energy and mean-force grids differ");
    for (int i = 0; i < mf.grid.n_bins; ++i)
      if (std::abs(fe.values[i] - ref.centers().values[i]) > 1e-9 * (1.0 + std::abs(fe.values[i])))
        throw ConfigError(cfg.free_energy + " is not the integral of " + cfg.mean_force);
  }
  if (cfg.sigma_convention() == SigmaConvention::Exact) {
    Profile noise = read_profile_csv(cfg.noise, 1.0);
    Profile drift = read_profile_csv(cfg.drift, 0.0);
    if (!(noise.grid == mf.grid) || !(drift.grid == mf.grid))
      throw ConfigError("noise and drift profiles must share the mean-force grid");
    return std::make_shared<const ProfileModel>(mf, std::move(noise), std::move(drift));
  }
  return std::make_shared<const ProfileModel>(mf);
}

namespace {

SchemeSetup make_setup(const RunConfig& cfg, std::ostream& log) {
  SchemeSetup setup;
  setup.sys = cfg.system();
  setup.sigma = cfg.sigma_convention();
  setup.adaptive = cfg.adaptive;
  setup.learner.grid = cfg.grid();
  setup.learner.n_min = cfg.n_min;
  setup.learner.n_update = cfg.n_update;
  if (cfg.freeze_after >= 0) setup.learner.freeze_after = cfg.freeze_after;
  setup.newton = cfg.newton();
  setup.gamma = cfg.gamma;
  if (cfg.ti_first) {
    const TiResult ti = cmd_ti(cfg, log);
    setup.model = std::make_shared<const ProfileModel>(ti.mean_force, ti.noise, ti.drift);
  } else {
    setup.model = load_model(cfg);
  }
  return setup;
}

void write_learned(const RunConfig& cfg, const Chain& chain) {
  const LatentLearner* l = chain.learner();
  if (!l) return;
  const auto model = l->snapshot();
  Profile mf = model->fe().mean_force();
  mf.counts = l->mean_force().counts();
  Profile fe = model->fe().centers();
  fe.counts = mf.counts;
  write_profile_csv(path_in(cfg, "learned_mean_force.csv"), mf, cfg.meta());
  write_profile_csv(path_in(cfg, "learned_free_energy.csv"), fe, cfg.meta());
}

}  // namespace

TiResult cmd_ti(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const TiConfig tc = cfg.ti();
  log << "ti: " << tc.grid.n_bins << " levels, " << tc.steps_per_level() << " steps each\n";
  TiResult res = ti_run(cfg.system(), tc, [&](int i, const TiLevel& lvl) {
    if ((i + 1) % 10 == 0 || i + 1 == tc.grid.n_bins)
      log << "  level " << i + 1 << "/" << tc.grid.n_bins << " z=" << lvl.z << " F'=" << lvl.mean_force
          << " +- " << lvl.mean_force_se << "\n";
  });
  const CsvMeta meta = cfg.meta();
  Profile fe = res.free_energy.centers();
  fe.counts = res.mean_force.counts;
  write_profile_csv(path_in(cfg, "mean_force.csv"), res.mean_force, meta);
  write_profile_csv(path_in(cfg, "free_energy.csv"), fe, meta);
  write_profile_csv(path_in(cfg, "eff_noise.csv"), res.noise, meta);
  write_profile_csv(path_in(cfg, "eff_drift.csv"), res.drift, meta);
  return res;
}

void cmd_sample(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const SchemeSetup setup = make_setup(cfg, log);
  const Scheme s = cfg.scheme_kind();
  const double alpha = cfg.alpha_values().front();
  const double dt = cfg.dt_values().front();
  auto chain = make_chain(s, setup, alpha, dt, cell_seed(cfg.seed, s, alpha, dt));
  const bool kinetic = is_kinetic(s);
  const LatentGrid grid = cfg.grid();
  TrajectoryWriter traj(path_in(cfg, "trajectory.csv"),
                        kinetic ? TrajectoryWriter::Kind::Kinetic : TrajectoryWriter::Kind::Overdamped,
                        cfg.meta());
  for (std::int64_t it = 1; it <= cfg.steps; ++it) {
    const StepOutcome o = chain->step();
    if (it % cfg.every != 0) continue;
    if (kinetic)
      traj.kinetic_row(it, chain->xi(), chain->energy(), o);
    else
      traj.overdamped_row(it, chain->xi(), chain->energy(), o == StepOutcome::Accepted,
                          grid.bin_index(chain->xi()));
  }
  traj.close();
  write_learned(cfg, *chain);
  log << "sample: " << chain->scheme() << " alpha=" << alpha << " dt=" << dt << " steps=" << cfg.steps
      << " accept=" << chain->accept_rate() << "\n";
}

std::vector<SweepCell> cmd_bench(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const SchemeSetup setup = make_setup(cfg, log);
  SweepConfig sc;
  sc.scheme = cfg.scheme_kind();
  sc.alphas = cfg.alpha_values();
  sc.dts = cfg.dt_values();
  sc.k_target = cfg.k_target();
  sc.max_iterations = cfg.max_iterations;
  sc.seed = cfg.seed;
  sc.threads = cfg.threads;
  sc.classifier.eta = cfg.eta;
  log << "bench: " << scheme_name(sc.scheme) << " " << sc.alphas.size() << " alphas x " << sc.dts.size()
      << " steps, K=" << sc.k_target << "\n";
  const auto cells = sweep(setup, sc, [&](const SweepCell& c) {
    log << "  alpha=" << c.alpha << " dt=" << c.dt << " tau=" << c.result.tau_hat << " ["
        << c.result.ci_low << ", " << c.result.ci_high << "]" << (c.failed ? " failed: " + c.error : "")
        << "\n";
  });
  write_sweep_csv(path_in(cfg, "sweep.csv"), cells, cfg.meta());
  for (double a : sc.alphas) log << "  tau*(alpha=" << a << ") = " << tau_star(cells, a) << "\n";
  return cells;
}

std::vector<RejectionRow> cmd_reject(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const SchemeSetup setup = make_setup(cfg, log);
  const Scheme s = cfg.scheme_kind();
  std::vector<RejectionRow> rows;
  for (double a : cfg.alpha_values())
    for (double dt : cfg.dt_values()) {
      rows.push_back({s, a, dt, rejection_stats(setup, s, a, dt, cfg.trials, cell_seed(cfg.seed, s, a, dt))});
      log << "reject: alpha=" << a << " dt=" << dt << " global=" << rows.back().breakdown.global_percent()
          << "%\n";
    }
  write_rejection_csv(path_in(cfg, "rejection.csv"), rows, cfg.meta());
  return rows;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  auto app = build_app(cfg);
  try {
    parse_into(*app, cfg, args);
  } catch (const CLI::Success& e) {
    return app->exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app->exit(e, out, err);
    return kConfigError;
  }
  try {
    if (cfg.command == "ti") cmd_ti(cfg, err);
    else if (cfg.command == "sample") cmd_sample(cfg, err);
    else if (cfg.command == "bench") cmd_bench(cfg, err);
    else cmd_reject(cfg, err);
  } catch (const ConfigError& e) {
    err << "effdiff: configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "effdiff: numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "effdiff: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}

}  // namespace effdiff::cli
