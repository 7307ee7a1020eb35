#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "effdiff/csv.hpp"
#include "effdiff/errors.hpp"
#include "effdiff/harness.hpp"
#include "effdiff/ti.hpp"

namespace py = pybind11;
using namespace effdiff;

namespace {

// One chain built like a sweep cell, stepped from Python.
class Sampler {
 public:
  Sampler(const std::string& scheme, double alpha, double dt, std::uint64_t seed,
          std::optional<Profile> mean_force, bool adaptive, const std::string& sigma,
          std::optional<SystemParams> system, std::optional<LatentGrid> grid) {
    scheme_ = parse_scheme(scheme);
    if (system) setup_.sys = *system;
    if (grid) setup_.learner.grid = *grid;
    if (mean_force) setup_.model = std::make_shared<const ProfileModel>(*mean_force);
    setup_.adaptive = adaptive;
    if (sigma == "exact") setup_.sigma = SigmaConvention::Exact;
    else if (sigma != "unit") throw ConfigError("sigma convention must be 'unit' or 'exact'");
    chain_ = make_chain(scheme_, setup_, alpha, dt, seed);
  }

  py::array_t<double> run(std::int64_t n) {
    if (n < 0) throw ConfigError("number of steps must be nonnegative");
    py::array_t<double> xi(n);
    auto out = xi.mutable_unchecked<1>();
    {
      py::gil_scoped_release release;
      for (std::int64_t i = 0; i < n; ++i) {
        chain_->step();
        out(i) = chain_->xi();
      }
    }
    return xi;
  }

  std::string step() { return outcome_name(chain_->step()); }
  const Chain& chain() const { return *chain_; }

  std::optional<Profile> learned_mean_force() const {
    if (!chain_->learner()) return std::nullopt;
    Profile p = chain_->learner()->snapshot()->fe().mean_force();
    p.counts = chain_->learner()->mean_force().counts();
    return p;
  }

 private:
  Scheme scheme_ = Scheme::Mala;
  SchemeSetup setup_;
  std::unique_ptr<Chain> chain_;
};

py::dict cell_dict(const SweepCell& c) {
  py::dict d;
  d["scheme"] = scheme_name(c.scheme);
  d["alpha"] = c.alpha;
  d["dt"] = c.dt;
  d["tau"] = c.result.tau;
  d["tau_hat"] = c.result.tau_hat;
  d["ci_low"] = c.result.ci_low;
  d["ci_high"] = c.result.ci_high;
  d["iterations"] = c.result.iterations;
  d["accept_rate"] = c.accept_rate;
  d["failed"] = c.failed;
  d["error"] = c.error;
  return d;
}

SchemeSetup setup_for(std::optional<Profile> mean_force, std::optional<SystemParams> system) {
  SchemeSetup s;
  if (system) s.sys = *system;
  if (mean_force) s.model = std::make_shared<const ProfileModel>(*mean_force);
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sampling with a diffusion modulated along a collective variable";
  m.attr("__version__") = version();

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<SystemParams>(m, "SystemParams")
      .def(py::init([](int n, double density) { return SystemParams::standard_dimer(n, density); }),
           py::arg("n_particles") = 16, py::arg("density") = 0.7)
      .def_readwrite("n_particles", &SystemParams::n_particles)
      .def_readwrite("box_len", &SystemParams::box_len)
      .def_readwrite("beta", &SystemParams::beta)
      .def_readwrite("r0", &SystemParams::r0)
      .def_readwrite("w", &SystemParams::w)
      .def_readwrite("barrier_h", &SystemParams::barrier_h)
      .def_property_readonly("dim", &SystemParams::dim)
      .def("__repr__", [](const SystemParams& p) {
        return "SystemParams(n_particles=" + std::to_string(p.n_particles) +
               ", box_len=" + format_double(p.box_len) + ")";
      });

  m.def("potential_energy", &potential_energy, py::arg("system"), py::arg("q"));
  m.def("potential_gradient", &potential_gradient, py::arg("system"), py::arg("q"));
  m.def("lattice_config", &lattice_config, py::arg("system"));
  m.def(
      "dimer_xi", [](const SystemParams& p, const Vector& q) { return DimerBondCv(p).value(q); },
      py::arg("system"), py::arg("q"));

  py::class_<LatentGrid>(m, "LatentGrid")
      .def(py::init([](double lo, double hi, int n) { return LatentGrid{lo, hi, n}; }),
           py::arg("z_min") = -0.2, py::arg("z_max") = 1.225, py::arg("n_bins") = 100)
      .def_readwrite("z_min", &LatentGrid::z_min)
      .def_readwrite("z_max", &LatentGrid::z_max)
      .def_readwrite("n_bins", &LatentGrid::n_bins)
      .def_property_readonly("width", &LatentGrid::width)
      .def("center", &LatentGrid::center)
      .def("bin_index", &LatentGrid::bin_index);

  py::class_<Profile>(m, "Profile")
      .def(py::init<const LatentGrid&, double, double>(), py::arg("grid"), py::arg("fill") = 0.0,
           py::arg("outside") = 0.0)
      .def_readwrite("grid", &Profile::grid)
      .def_readwrite("values", &Profile::values)
      .def_readwrite("counts", &Profile::counts)
      .def_readwrite("outside", &Profile::outside)
      .def("__call__", &Profile::operator());

  py::class_<FreeEnergy>(m, "FreeEnergy")
      .def(py::init<const Profile&>(), py::arg("mean_force"))
      .def("__call__", &FreeEnergy::operator())
      .def("derivative", &FreeEnergy::derivative)
      .def_property_readonly("centers", &FreeEnergy::centers);

  m.def("read_profile_csv", &read_profile_csv, py::arg("path"), py::arg("outside") = 0.0);
  m.def(
      "write_profile_csv",
      [](const std::string& path, const Profile& p, const std::string& config_hash, std::uint64_t seed) {
        write_profile_csv(path, p, {config_hash, seed});
      },
      py::arg("path"), py::arg("profile"), py::arg("config_hash") = "", py::arg("seed") = 0);

  py::class_<TiConfig>(m, "TiConfig")
      .def(py::init<>())
      .def_readwrite("grid", &TiConfig::grid)
      .def_readwrite("dt", &TiConfig::dt)
      .def_readwrite("sim_time_per_level", &TiConfig::sim_time_per_level)
      .def_readwrite("burn_in_fraction", &TiConfig::burn_in_fraction)
      .def_readwrite("n_batches", &TiConfig::n_batches)
      .def_readwrite("seed", &TiConfig::seed)
      .def_property_readonly("steps_per_level", &TiConfig::steps_per_level);

  py::class_<TiLevel>(m, "TiLevel")
      .def_readonly("z", &TiLevel::z)
      .def_readonly("mean_force", &TiLevel::mean_force)
      .def_readonly("mean_force_se", &TiLevel::mean_force_se)
      .def_readonly("drift", &TiLevel::drift)
      .def_readonly("noise", &TiLevel::noise)
      .def_readonly("samples", &TiLevel::samples)
      .def_readonly("folds", &TiLevel::folds);

  py::class_<TiResult>(m, "TiResult")
      .def_readonly("levels", &TiResult::levels)
      .def_readonly("mean_force", &TiResult::mean_force)
      .def_readonly("mean_force_se", &TiResult::mean_force_se)
      .def_readonly("drift", &TiResult::drift)
      .def_readonly("noise", &TiResult::noise)
      .def_readonly("free_energy", &TiResult::free_energy);

  m.def(
      "ti_run",
      [](const SystemParams& p, const TiConfig& cfg) {
        py::gil_scoped_release release;
        return ti_run(p, cfg);
      },
      py::arg("system"), py::arg("config"));

  py::class_<Sampler>(m, "Sampler")
      .def(py::init<const std::string&, double, double, std::uint64_t, std::optional<Profile>, bool,
                    const std::string&, std::optional<SystemParams>, std::optional<LatentGrid>>(),
           py::arg("scheme"), py::arg("alpha") = 0.0, py::arg("dt") = 2e-3, py::arg("seed") = 0,
           py::arg("mean_force") = py::none(), py::arg("adaptive") = false, py::arg("sigma") = "unit",
           py::arg("system") = py::none(), py::arg("grid") = py::none())
      .def("run", &Sampler::run, py::arg("n"), "Advance n MH cycles; returns xi after each.")
      .def("step", &Sampler::step, "One MH cycle; returns the outcome name.")
      .def_property_readonly("position", [](const Sampler& s) { return s.chain().position(); })
      .def_property_readonly("xi", [](const Sampler& s) { return s.chain().xi(); })
      .def_property_readonly("energy", [](const Sampler& s) { return s.chain().energy(); })
      .def_property_readonly("accept_rate", [](const Sampler& s) { return s.chain().accept_rate(); })
      .def_property_readonly("steps", [](const Sampler& s) { return s.chain().steps(); })
      .def_property_readonly("kappa", [](const Sampler& s) { return s.chain().context().diff.kappa; })
      .def_property_readonly("scheme", [](const Sampler& s) { return s.chain().scheme(); })
      .def("learned_mean_force", &Sampler::learned_mean_force);

  m.def(
      "run_cell",
      [](const std::string& scheme, double alpha, double dt, std::int64_t k, std::uint64_t seed,
         std::optional<Profile> mean_force, std::int64_t max_iterations, std::optional<SystemParams> sys) {
        const SchemeSetup setup = setup_for(std::move(mean_force), std::move(sys));
        SweepCell c;
        {
          py::gil_scoped_release release;
          c = run_cell(setup, parse_scheme(scheme), alpha, dt, k, seed, {}, max_iterations);
        }
        return cell_dict(c);
      },
      py::arg("scheme"), py::arg("alpha"), py::arg("dt"), py::arg("k"), py::arg("seed") = 0,
      py::arg("mean_force") = py::none(), py::arg("max_iterations") = 0, py::arg("system") = py::none(),
      "Transition-time experiment for one (alpha, dt) cell.");

  m.def(
      "rejection_stats",
      [](const std::string& scheme, double alpha, double dt, std::int64_t trials, std::uint64_t seed,
         std::optional<Profile> mean_force, std::optional<SystemParams> sys) {
        const SchemeSetup setup = setup_for(std::move(mean_force), std::move(sys));
        RejectionBreakdown b;
        {
          py::gil_scoped_release release;
          b = rejection_stats(setup, parse_scheme(scheme), alpha, dt, trials, seed);
        }
        py::dict d;
        for (int o = 0; o < kNumOutcomes; ++o) d[outcome_name(static_cast<StepOutcome>(o))] = b.counts[o];
        d["global_percent"] = b.global_percent();
        return d;
      },
      py::arg("scheme"), py::arg("alpha"), py::arg("dt"), py::arg("trials"), py::arg("seed") = 0,
      py::arg("mean_force") = py::none(), py::arg("system") = py::none());

  m.def("logspace", &logspace, py::arg("a"), py::arg("b"), py::arg("n"));
}
