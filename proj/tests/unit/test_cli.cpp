#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "effdiff/errors.hpp"

using namespace effdiff;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("effdiff_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static std::vector<std::string> lines(const std::string& p) {
    std::ifstream in(p);
    std::vector<std::string> v;
    for (std::string l; std::getline(in, l);) v.push_back(l);
    return v;
  }

  // Smooth two-well mean force on the default grid, F between 0 and ~1.
  std::string write_mean_force(double scale = 1.0) {
    Profile mf(LatentGrid{}, 0.0, 0.0);
    for (int i = 0; i < mf.grid.n_bins; ++i) mf.values[i] = scale * 4.0 * std::sin(2 * M_PI * mf.grid.center(i));
    const std::string p = path("mf.csv");
    write_profile_csv(p, mf, {"fixture", 0});
    return p;
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST_F(CliTest, TiEmitsProfilesOnTheDefaultGrid) {
  const std::string out = path("nested/ti");
  ASSERT_EQ(run({"ti", "--ti-time", "0.01", "--ti-dt", "2.5e-5", "-o", out}), 0) << err_.str();
  for (const char* f : {"mean_force.csv", "free_energy.csv"}) {
    const auto l = lines(out + "/" + f);
    ASSERT_EQ(l.size(), 102u) << f;
    EXPECT_EQ(l[0].rfind("# effdiff ", 0), 0u);
    EXPECT_EQ(l[1], "bin_index,z_center,value,count");
  }
  // the free energy is the integral of the emitted mean force
  const Profile mf = read_profile_csv(out + "/mean_force.csv", 0.0);
  const Profile fe = read_profile_csv(out + "/free_energy.csv", 0.0);
  const FreeEnergy ref(mf);
  for (int i = 0; i < 100; ++i) EXPECT_NEAR(fe.values[i], ref.centers().values[i], 1e-12);
}

TEST_F(CliTest, InvalidGridFailsBeforeCompute) {
  EXPECT_EQ(run({"ti", "--z-min", "1", "--z-max", "0", "-o", path("never")}), cli::kConfigError);
  EXPECT_NE(err_.str().find("z_min"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("never")));
}

TEST_F(CliTest, ProfilesRequiredForKineticSchemes) {
  EXPECT_EQ(run({"sample", "--scheme", "rmhmc", "-o", path("x")}), cli::kConfigError);
  EXPECT_NE(err_.str().find("effdiff ti"), std::string::npos);
  EXPECT_EQ(run({"sample", "--abh", "1", "-o", path("x")}), cli::kConfigError);
  EXPECT_EQ(run({"sample", "--steps", "50", "-o", path("mala")}), 0) << err_.str();
  EXPECT_EQ(lines(path("mala/trajectory.csv")).size(), 52u);
  EXPECT_EQ(run({"sample", "--scheme", "rmghmc", "--adaptive", "--steps", "5", "-o", path("ad")}), 0)
      << err_.str();
  EXPECT_TRUE(fs::exists(path("ad/learned_mean_force.csv")));
}

TEST_F(CliTest, SampleIsByteIdenticalForConfigAndSeed) {
  const std::string mf = write_mean_force();
  for (const char* scheme : {"mala", "rmghmc"}) {
    const std::vector<std::string> base{"sample", "--scheme", scheme, "--abh", "1", "--steps", "200",
                                        "--mean-force", mf, "--seed", "9"};
    auto with_out = [&](const std::string& o) {
      auto a = base;
      a.insert(a.end(), {"-o", path(o)});
      return a;
    };
    ASSERT_EQ(run(with_out("a")), 0) << err_.str();
    ASSERT_EQ(run(with_out("b")), 0);
    EXPECT_EQ(slurp(path("a/trajectory.csv")), slurp(path("b/trajectory.csv"))) << scheme;
    auto other = with_out("c");
    other[10] = "10";
    ASSERT_EQ(run(other), 0);
    EXPECT_NE(slurp(path("a/trajectory.csv")), slurp(path("c/trajectory.csv")));
    const auto header = lines(path("a/trajectory.csv"))[1];
    EXPECT_EQ(header, std::string(scheme) == "mala" ? "iteration,xi,V,accepted,bin" : "iteration,xi,H,cause");
    fs::remove_all(path("a"));
    fs::remove_all(path("b"));
    fs::remove_all(path("c"));
  }
}

TEST_F(CliTest, BenchDefaultsFollowTheSchemeGrid) {
  const cli::RunConfig c = cli::parse_args({"bench"});
  const auto dts = c.dt_values();
  ASSERT_EQ(dts.size(), 16u);
  EXPECT_EQ(dts.front(), 1e-3);
  EXPECT_EQ(dts.back(), 5e-3);
  const auto alphas = c.alpha_values();
  EXPECT_EQ(alphas.size(), 32u);
  EXPECT_NEAR(alphas.back() * c.beta * c.barrier_h, 3.1, 1e-12);
  EXPECT_EQ(c.k_target(), 100000);
  EXPECT_EQ(cli::parse_args({"bench", "--quick"}).k_target(), 2000);
  EXPECT_EQ(cli::parse_args({"bench", "--quick", "--k", "50"}).k_target(), 50);
  EXPECT_EQ(cli::parse_args({"bench", "--scheme", "rmhmc"}).alpha_values().size(), 16u);
}

TEST_F(CliTest, BenchWritesSweepAndIgnoresThreadCount) {
  const std::string mf = write_mean_force();
  const std::vector<std::string> base{"bench", "--abh", "0,0.5", "--dt", "1.5e-3,2e-3", "--k", "1",
                                      "--max-iterations", "3000", "--mean-force", mf, "--seed", "3"};
  auto a = base;
  a.insert(a.end(), {"-o", path("a"), "-j", "1"});
  auto b = base;
  b.insert(b.end(), {"-o", path("b"), "-j", "2"});
  ASSERT_EQ(run(a), 0) << err_.str();
  ASSERT_EQ(run(b), 0) << err_.str();
  EXPECT_EQ(slurp(path("a/sweep.csv")), slurp(path("b/sweep.csv")));
  const auto l = lines(path("a/sweep.csv"));
  ASSERT_EQ(l.size(), 6u);
  EXPECT_EQ(l[1], "scheme,alpha,dt,tau_hat,ci_low,ci_high,n_transitions,accept_rate,failed");
  EXPECT_EQ(l[2].substr(0, 14), "mala,0,0.0015,");
}

TEST_F(CliTest, RejectWritesEveryCategory) {
  const std::string mf = write_mean_force();
  ASSERT_EQ(run({"reject", "--scheme", "rmhmc", "--trials", "50", "--mean-force", mf, "-o", path("r")}), 0)
      << err_.str();
  const auto l = lines(path("r/rejection.csv"));
  ASSERT_EQ(l.size(), 10u);
  EXPECT_EQ(l[1], "scheme,alpha,dt,category,count,percent");
  EXPECT_EQ(l[2].substr(0, 25), "rmhmc,0,0.1,fwd_momenta,0");
  EXPECT_EQ(l[9].substr(0, 19), "rmhmc,0,0.1,global,");
}

TEST_F(CliTest, ConfigFileSectionsAndOverrides) {
  std::ofstream(path("run.cfg")) << "# comment\nseed = 5\n[system]\nbeta = 2\n[sampler]\nscheme = rmghmc\n"
                                    "dt = 0.01,0.02\nadaptive = true\nfreeze_after = 40\n[run]\nk = 7\n";
  cli::RunConfig c = cli::parse_args({"bench", "--config", path("run.cfg")});
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.beta, 2.0);
  EXPECT_EQ(c.scheme, "rmghmc");
  EXPECT_EQ(c.dt_values(), (std::vector<double>{0.01, 0.02}));
  EXPECT_TRUE(c.adaptive);
  EXPECT_EQ(c.freeze_after, 40);
  EXPECT_EQ(c.k, 7);
  c = cli::parse_args({"bench", "--config", path("run.cfg"), "--seed", "8", "--beta", "1"});
  EXPECT_EQ(c.seed, 8u);
  EXPECT_EQ(c.beta, 1.0);

  std::ofstream(path("bad.cfg")) << "[sampler]\nbogus = 1\n";
  EXPECT_EQ(run({"sample", "--config", path("bad.cfg")}), cli::kConfigError);
  EXPECT_EQ(run({"sample", "--scheme", "hmc"}), cli::kConfigError);
  EXPECT_EQ(run({"sample", "--no-such-flag"}), cli::kConfigError);
  EXPECT_EQ(run({}), cli::kConfigError);
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_NE(out_.str().find("bench"), std::string::npos);
}

TEST_F(CliTest, MetadataHashIgnoresOutputLocation) {
  const auto a = cli::parse_args({"sample", "-o", "x", "-j", "3"});
  const auto b = cli::parse_args({"sample", "-o", "y"});
  EXPECT_EQ(a.meta().config_hash, b.meta().config_hash);
  EXPECT_NE(a.meta().config_hash, cli::parse_args({"sample", "--dt", "1e-3"}).meta().config_hash);
  EXPECT_EQ(a.meta().line().rfind(std::string("# effdiff ") + version(), 0), 0u);
}

TEST_F(CliTest, InconsistentProfileInputsAreRejected) {
  const std::string mf = write_mean_force();
  Profile fe(LatentGrid{}, 0.3, 0.0);
  write_profile_csv(path("fe.csv"), fe, {"x", 0});
  EXPECT_EQ(run({"sample", "--mean-force", mf, "--free-energy", path("fe.csv"), "-o", path("o")}),
            cli::kConfigError);
  EXPECT_NE(err_.str().find("integral"), std::string::npos);
  EXPECT_EQ(run({"sample", "--scheme", "adaptive-mala", "--mean-force", mf}), cli::kConfigError);
  EXPECT_EQ(run({"sample", "--sigma-convention", "exact", "--mean-force", mf}), cli::kConfigError);
  EXPECT_EQ(run({"sample", "--mean-force", path("missing.csv"), "-o", path("o")}), cli::kConfigError);
}

TEST_F(CliTest, OverflowingDiffusionExitsWithNumericalFailure) {
  const std::string mf = write_mean_force(200.0);
  EXPECT_EQ(run({"sample", "--alpha", "5", "--mean-force", mf, "--steps", "3", "-o", path("o")}),
            cli::kNumericalError);
  EXPECT_NE(err_.str().find("numerical"), std::string::npos);
}
