#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "effdiff/csv.hpp"
#include "effdiff/harness.hpp"
#include "effdiff/ti.hpp"

namespace effdiff::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalError = 3 };

/// Flat run configuration. Every field has a config-file key
/// ("section.key") and a command-line flag.
struct RunConfig {
  std::string command;

  // [system]
  std::string preset = "standard-dimer";
  int n_particles = 16;
  double density = 0.7;
  double beta = 1.0;
  double w = 0.7;
  double barrier_h = 2.0;

  // [grid]
  double z_min = -0.2;
  double z_max = 1.225;
  int n_z = 100;

  // [sampler]
  std::string scheme = "mala";
  std::vector<double> alphas;
  std::vector<double> abh;  // alpha * beta * h, converted to alpha
  std::vector<double> dts;
  double dt_min = 0.0;  // 0: scheme default
  double dt_max = 0.0;
  int n_dt = 16;
  double abh_max = -1.0;  // < 0: scheme default
  double abh_step = 0.1;
  bool adaptive = false;
  std::string sigma = "unit";
  std::int64_t n_min = 100;
  std::int64_t n_update = 20;
  std::int64_t freeze_after = -1;  // < 0: never
  int newton_max_iter = 100;
  double tol_cauchy = 1e-12;
  double tol_root = 1e-12;
  double tol_rev = 1e-6;
  std::string linear_solve = "block";
  double gamma = 1.0;
  double eta = 0.1;

  // [profiles]
  std::string mean_force;
  std::string free_energy;
  std::string noise;
  std::string drift;
  bool ti_first = false;

  // [ti]
  double ti_dt = 2.5e-5;
  double ti_time = 125.0;
  double ti_burn_in = 0.05;
  int ti_batches = 20;

  // [run]
  std::int64_t steps = 100000;
  std::int64_t every = 1;
  std::int64_t k = 100000;
  std::int64_t max_iterations = 0;
  std::int64_t trials = 1000000;
  bool quick = false;
  std::string out = "out";
  std::uint64_t seed = 0;
  int threads = 1;

  static constexpr std::int64_t kQuickK = 2000;
  static constexpr double kQuickTiTime = 5.0;

  SystemParams system() const;
  LatentGrid grid() const { return {z_min, z_max, n_z}; }
  Scheme scheme_kind() const { return parse_scheme(scheme); }
  SigmaConvention sigma_convention() const;
  NewtonParams newton() const;
  TiConfig ti() const;
  std::int64_t k_target() const;

  /// Explicit alpha values, else the scheme's default alpha*beta*h grid
  /// (bench) or alpha = 0.
  std::vector<double> alpha_values() const;
  /// Explicit step sizes, else the scheme's default log grid (bench) or a
  /// single default step.
  std::vector<double> dt_values() const;

  /// Throws ConfigError; runs before any compute.
  void validate() const;
  /// key=value lines of every result-affecting field; hashed into the CSV
  /// metadata (output directory and thread count excluded).
  std::string canonical() const;
  CsvMeta meta() const;
};

/// Parses argv-style arguments (without the program name). Throws
/// CLI::ParseError subclasses; --help and --version throw CLI::Success types.
RunConfig parse_args(const std::vector<std::string>& args);

/// Loads the profiles named in the config (or null when none are given).
std::shared_ptr<const LatentModel> load_model(const RunConfig& cfg);

TiResult cmd_ti(const RunConfig& cfg, std::ostream& log);
void cmd_sample(const RunConfig& cfg, std::ostream& log);
std::vector<SweepCell> cmd_bench(const RunConfig& cfg, std::ostream& log);
std::vector<RejectionRow> cmd_reject(const RunConfig& cfg, std::ostream& log);

/// Full front end: parse, dispatch, map errors to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace effdiff::cli
