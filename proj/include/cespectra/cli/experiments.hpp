#pragma once

// Experiment drivers behind the ce-spectra command: repetitions on a worker
// pool, CSV / JSON data files and SVG figures.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cespectra/ce_schemes.hpp"
#include "cespectra/cli/config.hpp"
#include "cespectra/cli/pool.hpp"
#include "cespectra/cli/svg.hpp"
#include "cespectra/phase_lab.hpp"
#include "cespectra/rng.hpp"
#include "cespectra/targets.hpp"

namespace cespectra::cli {

using nlohmann::json;

namespace fs = std::filesystem;

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir.string() + "'");
}

inline void write_file(const fs::path& path, const std::string& content) {
  ensure_dir(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

/// NaN and infinities become null.
inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json quantile_summary(const std::vector<double>& v) {
  return {{"median", number(quantile(v, 0.5))}, {"q25", number(quantile(v, 0.25))},
          {"q75", number(quantile(v, 0.75))},   {"min", number(quantile(v, 0.0))},
          {"max", number(quantile(v, 1.0))}};
}

/// Places several rendered plots one below the other in a single document.
inline std::string stack_svgs(const std::vector<std::string>& parts, double width, double height_each) {
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
    << height_each * static_cast<double>(parts.size()) << "\">\n";
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::string inner = parts[i];
    // Drop the namespace declaration of nested documents and position them.
    const auto pos = inner.find("<svg ");
    inner.replace(pos, 5, "<svg y=\"" + format_double(height_each * static_cast<double>(i)) + "\" ");
    o << inner;
  }
  o << "</svg>\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Benchmarks

struct BenchmarkSetup {
  LimitState target;
  SchemeConfig scheme;
  std::size_t d = 0;
};

inline BenchmarkSetup benchmark_setup(const ExperimentConfig& cfg, const std::string& target_name) {
  BenchmarkPreset preset{};
  bool found = false;
  for (const auto& p : table1_presets())
    if (target_name == p.target) {
      preset = p;
      found = true;
    }
  if (!found) throw ConfigError("unknown benchmark target '" + target_name + "'");
  BenchmarkSetup s;
  s.d = cfg.dims.empty() ? preset.d : cfg.dims.front();
  try {
    s.target = make_benchmark(target_name, s.d);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  s.scheme = cfg.scheme;
  s.scheme.n = cfg.n_set ? cfg.scheme.n : preset.n;
  s.scheme.m = cfg.m_set ? cfg.scheme.m : s.scheme.n;
  s.scheme.seed = cfg.seed;
  return s;
}

/// Stream of one repetition. Variants share it, so schemes are compared on
/// common random numbers.
inline RngStream repetition_stream(std::uint64_t seed, const std::string& target, std::size_t d, std::size_t rep) {
  return RngStream(seed, {hash_name("benchmark"), hash_name(target), d, rep});
}

inline std::vector<RunResult> run_repetitions(const BenchmarkSetup& s, std::size_t reps, std::size_t workers) {
  std::vector<RunResult> runs(reps);
  parallel_for(reps, workers, [&](std::size_t rep) {
    RngStream rng = repetition_stream(s.scheme.seed, s.target.name, s.d, rep);
    runs[rep] = run_scheme(s.scheme, s.target, rng);
  });
  return runs;
}

inline std::string runs_csv(const std::vector<RunResult>& runs) {
  std::ostringstream o;
  o << "rep,p_hat,relative_error,converged,diverged,iterations\n";
  for (std::size_t r = 0; r < runs.size(); ++r)
    o << r << ',' << format_double(runs[r].p_hat) << ',' << format_double(runs[r].relative_error) << ','
      << int(runs[r].converged) << ',' << int(runs[r].diverged) << ',' << runs[r].iterations_used << '\n';
  return o.str();
}

inline std::string traces_csv(const std::vector<RunResult>& runs) {
  std::ostringstream o;
  o << "rep,t,q_or_sigma,p_hat_t,lambda_min_proj,lambda_max_raw,lambda_min_next,diverged,n_hits\n";
  for (std::size_t r = 0; r < runs.size(); ++r)
    for (const auto& t : runs[r].traces)
      o << r << ',' << t.t << ',' << format_double(t.q_or_sigma) << ',' << format_double(t.p_hat_t) << ','
        << format_double(t.lambda_min_proj) << ',' << format_double(t.lambda_max_raw) << ','
        << format_double(t.lambda_min_next) << ',' << int(t.diverged)
        << ',' << t.n_hits << '\n';
  return o.str();
}

/// Per-iteration values of a trace field across repetitions (iterations a run
/// never reached are skipped).
inline std::vector<std::vector<double>> per_iteration(const std::vector<RunResult>& runs,
                                                      double IterationTrace::*field) {
  std::vector<std::vector<double>> out;
  for (const auto& r : runs)
    for (const auto& t : r.traces) {
      if (t.t >= out.size()) out.resize(t.t + 1);
      if (std::isfinite(t.*field)) out[t.t].push_back(t.*field);
    }
  return out;
}

inline json benchmark_summary(const BenchmarkSetup& s, const std::vector<RunResult>& runs) {
  std::vector<double> rel, p;
  std::size_t div = 0, conv = 0;
  double iters = 0.0;
  std::vector<double> kappa;
  for (const auto& r : runs) {
    rel.push_back(r.relative_error);
    p.push_back(r.p_hat);
    div += r.diverged;
    conv += r.converged;
    iters += static_cast<double>(r.iterations_used);
    try {
      kappa.push_back(kappa_conjecture_report(r.traces));
    } catch (const DomainError&) {
    }
  }
  const double n = static_cast<double>(runs.size());
  json j;
  j["target"] = s.target.name;
  j["d"] = s.d;
  j["scheme"] = to_string(s.scheme.scheme);
  j["strategy"] = to_string(s.scheme.strategy);
  j["variant"] = variant_label(s.scheme.scheme, s.scheme.strategy);
  j["N"] = runs.size();
  j["rho"] = s.scheme.rho;
  j["delta_target"] = s.scheme.delta_target;
  j["m"] = s.scheme.m;
  j["n"] = s.scheme.n;
  j["n_p"] = s.scheme.n_p;
  j["t_max"] = s.scheme.t_max;
  j["seed"] = s.scheme.seed;
  j["reference_p"] = s.target.reference_p ? number(*s.target.reference_p) : json(nullptr);
  j["relative_error"] = quantile_summary(rel);
  j["p_hat"] = quantile_summary(p);
  j["divergence_rate"] = static_cast<double>(div) / n;
  j["convergence_rate"] = static_cast<double>(conv) / n;
  j["mean_iterations"] = iters / n;
  j["kappa_conjecture"] = quantile_summary(kappa);
  return j;
}

inline std::string error_figure(const std::string& title, const std::vector<std::string>& labels,
                                const std::vector<std::vector<RunResult>>& groups) {
  SvgPlot plot(title, "variant", "relative error |p_hat - p| / p");
  plot.categories(labels);
  bool any_positive = false;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<double> rel;
    for (const auto& r : groups[g]) {
      rel.push_back(r.relative_error);
      any_positive = any_positive || r.relative_error > 0.0;
    }
    plot.add(make_box(labels[g], static_cast<double>(g), rel, g));
  }
  plot.log_y(any_positive);
  return plot.render();
}

inline std::string spectrum_figure(const std::string& title, const std::vector<std::string>& labels,
                                   const std::vector<std::vector<RunResult>>& groups) {
  std::vector<std::string> panels;
  for (auto [field, name] : {std::pair{&IterationTrace::lambda_min_proj, "lambda_min of sampled covariance"},
                             std::pair{&IterationTrace::lambda_max_raw, "lambda_max of raw estimate"}}) {
    SvgPlot plot(title + ": " + name, "iteration t", name);
    plot.log_y();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto vals = per_iteration(groups[g], field);
      Band b{labels[g] + " q25-q75", {}, {}, {}, g};
      Series med{labels[g] + " median", {}, {}, true, true, g};
      for (std::size_t t = 0; t < vals.size(); ++t) {
        if (vals[t].empty()) continue;
        b.x.push_back(static_cast<double>(t));
        b.lo.push_back(quantile(vals[t], 0.25));
        b.hi.push_back(quantile(vals[t], 0.75));
        med.x.push_back(static_cast<double>(t));
        med.y.push_back(quantile(vals[t], 0.5));
      }
      plot.add(std::move(b));
      plot.add(std::move(med));
    }
    panels.push_back(plot.render());
  }
  return stack_svgs(panels, 640, 420);
}

struct BenchmarkOutcome {
  BenchmarkSetup setup;
  std::vector<RunResult> runs;
  json summary;
};

/// One scheme on one target: runs.csv, traces.csv, summary.json,
/// error_violin.svg, spectrum.svg under `out`.
inline BenchmarkOutcome run_benchmark_setup(const BenchmarkSetup& s, std::size_t reps, std::size_t workers,
                                            const fs::path& out) {
  BenchmarkOutcome o{s, run_repetitions(s, reps, workers), {}};
  o.summary = benchmark_summary(s, o.runs);
  const std::string label = variant_label(s.scheme.scheme, s.scheme.strategy);
  write_file(out / "runs.csv", runs_csv(o.runs));
  write_file(out / "traces.csv", traces_csv(o.runs));
  write_file(out / "summary.json", o.summary.dump(2) + "\n");
  write_file(out / "error_violin.svg", error_figure(s.target.name + ", d = " + std::to_string(s.d), {label}, {o.runs}));
  write_file(out / "spectrum.svg", spectrum_figure(s.target.name + " " + label, {label}, {o.runs}));
  return o;
}

inline BenchmarkOutcome run_benchmark(const ExperimentConfig& cfg) {
  return run_benchmark_setup(benchmark_setup(cfg, cfg.target), cfg.repetitions, cfg.workers, cfg.output_dir);
}

/// All three targets (or the configured one) x {CE family, iCE family} x
/// {no projection, eig, mean}. Each variant gets its own benchmark directory;
/// each (target, family) cell gets combined figures.
inline json run_table1(const ExperimentConfig& cfg) {
  std::vector<std::string> targets;
  if (cfg.target == "all" || cfg.target.empty()) {
    for (const auto& p : table1_presets()) targets.emplace_back(p.target);
  } else {
    targets.push_back(cfg.target);
  }
  const fs::path root(cfg.output_dir);
  json table = json::array();
  for (const auto& t : targets) {
    for (bool improved : {false, true}) {
      std::vector<std::string> labels;
      std::vector<std::vector<RunResult>> groups;
      for (auto strat : {DirectionStrategy::none, DirectionStrategy::eig_min, DirectionStrategy::mean}) {
        BenchmarkSetup s = benchmark_setup(cfg, t);
        const bool proj = strat != DirectionStrategy::none;
        s.scheme.scheme = improved ? (proj ? Scheme::ice_proj : Scheme::ice) : (proj ? Scheme::ce_proj : Scheme::ce);
        s.scheme.strategy = strat;
        const std::string label = variant_label(s.scheme.scheme, strat);
        auto o = run_benchmark_setup(s, cfg.repetitions, cfg.workers, root / t / label);
        table.push_back(o.summary);
        labels.push_back(label);
        groups.push_back(std::move(o.runs));
      }
      const std::string family = improved ? "ice" : "ce";
      write_file(root / t / (family + "_error_violin.svg"), error_figure(t + ": " + family + " family", labels, groups));
      write_file(root / t / (family + "_spectrum.svg"), spectrum_figure(t + " " + family, labels, groups));
    }
  }
  write_file(root / "table1.json", table.dump(2) + "\n");
  return table;
}

// ---------------------------------------------------------------------------
// Phase sweeps

inline SweepConfig sweep_config(const ExperimentConfig& cfg, double kappa) {
  SweepConfig s;
  s.target = parse_phase_target(cfg.target);
  s.alignment = cfg.alignment;
  s.lambda1 = cfg.lambda1;
  s.kappa = kappa;
  s.dims = cfg.dims;
  s.reps = cfg.repetitions;
  s.alpha = cfg.alpha;
  s.seed = cfg.seed;
  return s;
}

inline RngStream sweep_stream(std::uint64_t seed, double kappa) {
  return RngStream(seed, {hash_name("phase"), std::bit_cast<std::uint64_t>(kappa)});
}

inline std::string sweep_csv(const std::vector<SweepResult>& results) {
  std::ostringstream o;
  o << "d,rep,n,op_error,lambda_max_hat,max_weight,q_hat\n";
  for (const auto& r : results)
    for (const auto& c : r.cells)
      o << c.d << ',' << c.rep << ',' << c.n_used << ',' << format_double(c.degenerate ? NAN : c.op_error) << ','
        << format_double(c.degenerate ? NAN : c.lambda_max_hat) << ',' << format_double(c.max_weight) << ','
        << format_double(c.q_hat) << '\n';
  return o.str();
}

/// sweep.csv (one row per (kappa, d, rep), kappas in config order) and phase.svg.
inline std::vector<SweepResult> run_phase(const ExperimentConfig& cfg) {
  std::vector<SweepResult> results;
  for (double k : cfg.kappas) {
    const SweepConfig s = sweep_config(cfg, k);
    results.push_back(phase_sweep(s, sweep_stream(cfg.seed, k), pool_runner(cfg.workers)));
  }
  const fs::path out(cfg.output_dir);
  write_file(out / "sweep.csv", sweep_csv(results));

  const bool mc = cfg.lambda1 == 1.0;
  std::vector<std::string> panels;
  for (auto [field, name] : {std::pair{&SweepCell::op_error, "median operator-norm error"},
                             std::pair{&SweepCell::lambda_max_hat, "median lambda_max of estimate"}}) {
    SvgPlot plot(cfg.target + ", " + to_string(cfg.alignment) + ", lambda1 = " + format_double(cfg.lambda1), "d", name);
    plot.log_x().log_y();
    for (std::size_t i = 0; i < results.size(); ++i) {
      Series sr;
      sr.label = "kappa = " + format_double(cfg.kappas[i]) + (mc ? " (Monte Carlo)" : "");
      sr.color = i;
      for (std::size_t d : cfg.dims) {
        const auto col = results[i].column(d, field);
        sr.x.push_back(static_cast<double>(d));
        sr.y.push_back(col.empty() ? NAN : median(col));
      }
      plot.add(std::move(sr));
    }
    panels.push_back(plot.render());
  }
  write_file(out / "phase.svg", stack_svgs(panels, 640, 420));
  return results;
}

// ---------------------------------------------------------------------------
// Growth exponent of the maximal weight

inline constexpr std::size_t kGammaDefaultDim = 10;

inline GammaFit run_gamma(const ExperimentConfig& cfg) {
  const PhaseTarget t = parse_phase_target(cfg.target);
  const std::size_t d = cfg.dims.empty() ? kGammaDefaultDim : cfg.dims.front();
  const double lambda1 = cfg.lambda1;
  const auto alpha = cfg.alpha;
  auto target_for_n = [&](std::size_t n) {
    return build_alignment(t, cfg.alignment, lambda1, d, analytic_K(t, alpha, lambda1, n)).first;
  };
  const SpikedCovariance g = build_alignment(t, cfg.alignment, lambda1, d, analytic_K(t, alpha, lambda1, 1)).second;
  const RngStream root(cfg.seed, {hash_name("gamma")});
  GammaFit fit = estimate_gamma_star(target_for_n, g, cfg.n_list, cfg.repetitions, root, pool_runner(cfg.workers));
  for (std::size_t n : fit.n_dropped)
    std::cerr << "warning: n = " << n << " dropped from the fit (median maximal weight is zero)\n";

  const fs::path out(cfg.output_dir);
  std::ostringstream csv;
  csv << "n,rep,max_weight\n";
  for (const auto& s : fit.samples) csv << s.n << ',' << s.rep << ',' << format_double(s.max_weight) << '\n';
  write_file(out / "gamma.csv", csv.str());

  json j;
  j["target"] = cfg.target;
  j["alignment"] = to_string(cfg.alignment);
  j["lambda1"] = lambda1;
  j["alpha"] = alpha ? json(*alpha) : json(nullptr);
  j["d"] = d;
  j["N"] = cfg.repetitions;
  j["slope"] = number(fit.slope);
  j["intercept"] = number(fit.intercept);
  j["band"] = {number(fit.band_lo), number(fit.band_hi)};
  j["predicted_gamma_star"] = predicted_gamma_star(t, cfg.alignment, lambda1, alpha);
  j["n_used"] = fit.n_used;
  j["n_dropped"] = fit.n_dropped;
  json meds = json::array();
  for (double m : fit.median_log_max) meds.push_back(number(m));
  j["median_log_max_weight"] = meds;
  write_file(out / "gamma.json", j.dump(2) + "\n");

  SvgPlot plot("max weight growth: slope " + format_double(std::round(fit.slope * 1000) / 1000), "n",
               "max xi l");
  plot.log_x().log_y();
  Series pts{"repetitions", {}, {}, false, true, 0};
  for (const auto& s : fit.samples)
    if (s.max_weight > 0.0) {
      pts.x.push_back(static_cast<double>(s.n));
      pts.y.push_back(s.max_weight);
    }
  Series med{"medians", {}, {}, false, true, 1};
  Series line{"least-squares fit", {}, {}, true, false, 2};
  for (std::size_t i = 0; i < fit.n_used.size(); ++i) {
    const double n = static_cast<double>(fit.n_used[i]);
    med.x.push_back(n);
    med.y.push_back(std::exp(fit.median_log_max[i]));
    line.x.push_back(n);
    line.y.push_back(std::exp(fit.intercept + fit.slope * std::log(n)));
  }
  plot.add(std::move(pts)).add(std::move(med)).add(std::move(line));
  write_file(out / "gamma.svg", plot.render());
  return fit;
}

}  // namespace cespectra::cli
