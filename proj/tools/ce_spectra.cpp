#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cespectra/cli/config.hpp"
#include "cespectra/cli/experiments.hpp"

namespace {

using namespace cespectra::cli;

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int run(Kind kind, const std::string& config_path, std::optional<std::uint64_t> seed,
        std::optional<std::size_t> workers, std::optional<std::string> out) {
  ExperimentConfig cfg = load_config(config_path, kind);
  if (seed) cfg.seed = cfg.scheme.seed = *seed;
  if (workers) {
    if (*workers == 0) throw ConfigError("--workers must be positive");
    cfg.workers = *workers;
  }
  if (out) cfg.output_dir = *out;

  switch (cfg.kind) {
    case Kind::benchmark: {
      const auto o = run_benchmark(cfg);
      std::cout << o.summary.dump(2) << "\n";
      break;
    }
    case Kind::table1: {
      const auto t = run_table1(cfg);
      for (const auto& row : t)
        std::cout << row["target"].get<std::string>() << ' ' << row["variant"].get<std::string>()
                  << " median relative error " << row["relative_error"]["median"].dump() << ", divergence rate "
                  << row["divergence_rate"].dump() << "\n";
      break;
    }
    case Kind::phase: {
      const auto res = run_phase(cfg);
      for (std::size_t i = 0; i < res.size(); ++i)
        for (std::size_t d : cfg.dims) {
          const auto op = res[i].column(d, &cespectra::SweepCell::op_error);
          const auto lm = res[i].column(d, &cespectra::SweepCell::lambda_max_hat);
          std::cout << "kappa " << format_double(cfg.kappas[i]) << " d " << d << " median op_error "
                    << format_double(op.empty() ? NAN : cespectra::median(op)) << " median lambda_max "
                    << format_double(lm.empty() ? NAN : cespectra::median(lm)) << "\n";
        }
      break;
    }
    case Kind::gamma: {
      const auto fit = run_gamma(cfg);
      std::cout << "slope " << format_double(fit.slope) << " band [" << format_double(fit.band_lo) << ", "
                << format_double(fit.band_hi) << "]\n";
      break;
    }
  }
  std::cout << "outputs written to " << cfg.output_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-entropy importance sampling experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  std::string out;
  std::optional<Kind> chosen;

  for (Kind k : {Kind::benchmark, Kind::phase, Kind::gamma, Kind::table1}) {
    auto* sub = app.add_subcommand(to_string(k), "run a " + to_string(k) + " experiment");
    sub->add_option("--config", config_path, "key=value configuration file")->required();
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--workers", workers, "worker threads (overrides the config)");
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->callback([&chosen, k] { chosen = k; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  auto given = [&](const char* name) {
    for (auto* sub : app.get_subcommands())
      if (sub->count(name) > 0) return true;
    return false;
  };

  try {
    return run(*chosen, config_path, given("--seed") ? std::optional<std::uint64_t>(seed) : std::nullopt,
               given("--workers") ? std::optional<std::size_t>(workers) : std::nullopt,
               given("--out") ? std::optional<std::string>(out) : std::nullopt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
