#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "cespectra/cli/config.hpp"
#include "cespectra/cli/experiments.hpp"
#include "cespectra/cli/pool.hpp"
#include "cespectra/cli/svg.hpp"

using namespace cespectra;
using namespace cespectra::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ce_spectra_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CE_SPECTRA_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kTinyBenchmark =
    "kind = benchmark\ntarget = lin\nscheme = ice_proj\nstrategy = mean\n"
    "dims = 6\nn = 300\nn_p = 200\nt_max = 6\nN = 5\nseed = 11\n";

}  // namespace

TEST(Config, ParsesKeysAndDefaults) {
  const auto cfg = parse_config(kTinyBenchmark);
  EXPECT_EQ(cfg.kind, Kind::benchmark);
  EXPECT_EQ(cfg.scheme.scheme, Scheme::ice_proj);
  EXPECT_EQ(cfg.scheme.strategy, DirectionStrategy::mean);
  EXPECT_EQ(cfg.scheme.n, 300u);
  EXPECT_EQ(cfg.scheme.m, 300u);
  EXPECT_EQ(cfg.scheme.rho, 0.1);
  EXPECT_EQ(cfg.scheme.delta_target, 1.5);
  EXPECT_EQ(cfg.repetitions, 5u);
  EXPECT_EQ(cfg.seed, 11u);
}

TEST(Config, KnownKeysAreExhaustive) {
  const std::set<std::string> expected{"kind", "target", "scheme", "strategy", "rho", "delta_target", "m",
                                       "n", "n_p", "t_max", "N", "lambda1", "kappa", "dims", "alpha",
                                       "alignment", "seed", "workers", "output_dir", "divergence_lambda_cap",
                                       "cap_quantile_at_zero"};
  EXPECT_EQ(known_keys(), expected);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("kind = benchmark\ntarget = lin\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = benchmark\ntarget = lin\ntarget = quad\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = benchmark\ntarget\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = benchmark\ntarget = cubic\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = benchmark\ntarget = lin\nrho = abc\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = benchmark\ntarget = lin\nstrategy = mean\n"), ConfigError);
  EXPECT_THROW(parse_config("target = lin\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = phase\nkappa = 2\ndims =\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = phase\nkappa = 2\ndims = 20,10\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = gamma\nn = 10,100,1000\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = gamma\nn = 10,20,30,40\n"), ConfigError);
  EXPECT_THROW(parse_config("kind = benchmark\ntarget = lin\n", Kind::phase), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/dir/none.cfg"), IoError);
}

TEST(Config, KindDefaults) {
  auto t = parse_config("kind = table1\n");
  EXPECT_EQ(t.target, "all");
  auto p = parse_config("kind = phase\nkappa = 1.2, 2.5\ndims = 20,40\n");
  EXPECT_EQ(p.target, "halfspace");
  EXPECT_EQ(p.kappas, (std::vector<double>{1.2, 2.5}));
  auto g = parse_config("n = 1000,10000,100000,1000000\nalpha = 1\nalignment = v_in_u\n", Kind::gamma);
  EXPECT_EQ(g.target, "slab");
  EXPECT_EQ(g.n_list.size(), 4u);
  EXPECT_EQ(*g.alpha, 1.0);
}

TEST(ParallelFor, RethrowsLowestFailingIndex) {
  try {
    parallel_for(50, 4, [](std::size_t i) {
      if (i == 7 || i == 30) throw std::runtime_error(std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "7");
  }
}

TEST(Benchmark, SmokeRunEmitsAllFiles) {
  auto cfg = parse_config(kTinyBenchmark);
  cfg.repetitions = 1;
  cfg.output_dir = scratch("smoke").string();
  run_benchmark(cfg);
  for (const char* f : {"runs.csv", "traces.csv", "summary.json", "error_violin.svg", "spectrum.svg"})
    EXPECT_TRUE(fs::exists(fs::path(cfg.output_dir) / f)) << f;
  const auto j = nlohmann::json::parse(slurp(fs::path(cfg.output_dir) / "summary.json"));
  EXPECT_EQ(j["N"], 1);
  EXPECT_TRUE(j.contains("divergence_rate"));
}

TEST(Benchmark, WorkerCountDoesNotChangeOutputs) {
  auto cfg = parse_config(kTinyBenchmark);
  const fs::path a = scratch("bench_w1"), b = scratch("bench_w4");
  cfg.workers = 1;
  cfg.output_dir = a.string();
  run_benchmark(cfg);
  cfg.workers = 4;
  cfg.output_dir = b.string();
  run_benchmark(cfg);
  for (const char* f : {"runs.csv", "traces.csv", "summary.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Table1, LayoutForOneTarget) {
  auto cfg = parse_config("kind = table1\ntarget = quad\ndims = 5\nn = 200\nn_p = 100\nt_max = 3\nN = 2\n");
  cfg.output_dir = scratch("table1").string();
  const auto table = run_table1(cfg);
  EXPECT_EQ(table.size(), 6u);
  const fs::path root(cfg.output_dir);
  for (const char* v : {"ce", "ce-eig", "ce-mean", "ice", "ice-eig", "ice-mean"})
    EXPECT_TRUE(fs::exists(root / "quad" / v / "runs.csv")) << v;
  EXPECT_TRUE(fs::exists(root / "quad" / "ce_error_violin.svg"));
  EXPECT_TRUE(fs::exists(root / "quad" / "ice_spectrum.svg"));
  EXPECT_TRUE(fs::exists(root / "table1.json"));
}

TEST(Phase, TwoKappaPresetAndMonteCarloLabel) {
  auto cfg = parse_config("kind = phase\nkappa = 1.2, 1.6\ndims = 4, 6\nN = 10\nlambda1 = 1\n");
  cfg.output_dir = scratch("phase").string();
  const auto res = run_phase(cfg);
  ASSERT_EQ(res.size(), 2u);
  const std::string svg = slurp(fs::path(cfg.output_dir) / "phase.svg");
  EXPECT_NE(svg.find("Monte Carlo"), std::string::npos);
  EXPECT_NE(svg.find("kappa = 1.2"), std::string::npos);
  EXPECT_NE(svg.find("kappa = 1.6"), std::string::npos);
  EXPECT_EQ(svg.find("href"), std::string::npos);
  const std::string csv = slurp(fs::path(cfg.output_dir) / "sweep.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "d,rep,n,op_error,lambda_max_hat,max_weight,q_hat");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 41);
}

TEST(Gamma, OutputsAndDeterminism) {
  auto cfg = parse_config("kind = gamma\ntarget = halfspace\nn = 100,300,1000,10000\nN = 4\ndims = 3\nseed = 5\n");
  const fs::path a = scratch("gamma_w1"), b = scratch("gamma_w4");
  cfg.workers = 1;
  cfg.output_dir = a.string();
  run_gamma(cfg);
  cfg.workers = 4;
  cfg.output_dir = b.string();
  run_gamma(cfg);
  EXPECT_EQ(slurp(a / "gamma.csv"), slurp(b / "gamma.csv"));
  EXPECT_EQ(slurp(a / "gamma.json"), slurp(b / "gamma.json"));
  const auto j = nlohmann::json::parse(slurp(a / "gamma.json"));
  EXPECT_EQ(j["predicted_gamma_star"], 0.5);
  EXPECT_TRUE(fs::exists(a / "gamma.svg"));
}

TEST(Svg, FormatDouble) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(NAN), "nan");
  EXPECT_EQ(format_double(-INFINITY), "-inf");
  EXPECT_EQ(xml_escape("a<b&\"c\">"), "a&lt;b&amp;&quot;c&quot;&gt;");
}

TEST(Binary, ExitCodes) {
  const fs::path dir = scratch("exit");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "bad.cfg") << "kind = benchmark\ntarget = lin\nunknown_key = 3\n";
    std::ofstream(dir / "good.cfg") << kTinyBenchmark;
  }
  EXPECT_EQ(run_cli("benchmark --config " + (dir / "bad.cfg").string()), 2);
  EXPECT_EQ(run_cli("benchmark --config " + (dir / "missing.cfg").string()), 3);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  // The output path runs through an existing regular file, so it cannot be created.
  EXPECT_EQ(run_cli("benchmark --config " + (dir / "good.cfg").string() + " --out " + (dir / "good.cfg" / "x").string()),
            3);
  EXPECT_EQ(run_cli("benchmark --config " + (dir / "good.cfg").string() + " --workers 2 --seed 3 --out " +
                    (dir / "run").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "run" / "runs.csv"));
}
