#pragma once

// Sample-size experiments on the analytic targets: operator-norm error and top
// eigenvalue of Sigma_hat_A in the regime n = ceil(d^kappa), and the growth
// exponent of max_i xi(X_i) l(X_i) in n.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cespectra/ce_schemes.hpp"
#include "cespectra/errors.hpp"
#include "cespectra/estimators.hpp"
#include "cespectra/gauss.hpp"
#include "cespectra/numerics.hpp"
#include "cespectra/rng.hpp"
#include "cespectra/targets.hpp"

namespace cespectra {

enum class PhaseTarget { slab, halfspace };
enum class Alignment { v_in_u, v_in_u_perp };

inline PhaseTarget parse_phase_target(const std::string& s) {
  if (s == "slab") return PhaseTarget::slab;
  if (s == "halfspace") return PhaseTarget::halfspace;
  throw DomainError("unknown analytic target '" + s + "'");
}

inline Alignment parse_alignment(const std::string& s) {
  if (s == "v_in_u") return Alignment::v_in_u;
  if (s == "v_in_u_perp") return Alignment::v_in_u_perp;
  throw DomainError("unknown alignment '" + s + "'");
}

inline std::string to_string(PhaseTarget t) { return t == PhaseTarget::slab ? "slab" : "halfspace"; }
inline std::string to_string(Alignment a) { return a == Alignment::v_in_u ? "v_in_u" : "v_in_u_perp"; }

/// Half-width / offset used for the analytic targets: the half-space is cut at
/// 0, the slab has K = 1, or K = prop_range_K(alpha, lambda1, n) when alpha is set.
inline double analytic_K(PhaseTarget t, std::optional<double> alpha, double lambda1, std::size_t n) {
  if (t == PhaseTarget::halfspace) return 0.0;
  if (alpha) return prop_range_K(*alpha, lambda1, static_cast<double>(n));
  return 1.0;
}

inline LimitState make_analytic_target(PhaseTarget t, std::size_t d, double K) {
  Vector u = unit_vector(d, 0);
  return t == PhaseTarget::slab ? slab_set(std::move(u), K) : halfspace_set(std::move(u), K);
}

/// Target with u = e1 and sampling covariance with a single spike lambda1
/// along e1 (v_in_u) or e2 (v_in_u_perp). lambda1 = 1 gives g = f.
inline std::pair<LimitState, SpikedCovariance> build_alignment(PhaseTarget target, Alignment alignment,
                                                               double lambda1, std::size_t d, double K) {
  if (d < 2) throw DomainError("build_alignment: d must be at least 2");
  if (!(lambda1 > 0.0 && lambda1 <= 1.0)) throw DomainError("build_alignment: lambda1 must lie in (0,1]");
  LimitState ls = make_analytic_target(target, d, K);
  const std::size_t axis = alignment == Alignment::v_in_u ? 0 : 1;
  SpikedCovariance g = SpikedCovariance::rank_one(d, lambda1, unit_vector(d, axis));
  g.check_theory_constraints(1, 1.0);
  return {std::move(ls), std::move(g)};
}

/// ceil(d^kappa); values within 1e-9 (relative) of an integer are taken as that integer.
inline std::size_t sample_size_for(std::size_t d, double kappa) {
  if (d < 1 || !(kappa > 0.0)) throw DomainError("sample_size_for: need d >= 1 and kappa > 0");
  const double x = std::pow(static_cast<double>(d), kappa);
  if (!std::isfinite(x) || x > 1e12) throw DomainError("sample_size_for: d^kappa is too large");
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, r)) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(x));
}

struct SweepConfig {
  PhaseTarget target = PhaseTarget::halfspace;
  Alignment alignment = Alignment::v_in_u_perp;
  double lambda1 = 0.5;
  double kappa = 2.5;
  std::vector<std::size_t> dims{20, 40, 80};
  std::size_t reps = 30;
  std::optional<double> alpha;
  std::uint64_t seed = 0;

  void validate() const {
    if (dims.empty()) throw DomainError("dims must not be empty");
    if (dims.front() < 2) throw DomainError("dims must be >= 2");
    for (std::size_t i = 1; i < dims.size(); ++i)
      if (dims[i] <= dims[i - 1]) throw DomainError("dims must be strictly increasing");
    if (reps < 10) throw DomainError("reps must be at least 10");
    if (!(lambda1 > 0.0 && lambda1 <= 1.0)) throw DomainError("lambda1 must lie in (0,1]");
    if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
    if (alpha) {
      if (target != PhaseTarget::slab) throw DomainError("alpha applies to the slab target only");
      if (!(*alpha > 0.0 && *alpha <= 1.0)) throw DomainError("alpha must lie in (0,1]");
      if (!(lambda1 < 1.0)) throw DomainError("alpha requires lambda1 < 1");
    }
  }
};

struct SweepCell {
  std::size_t d = 0;
  std::size_t rep = 0;
  std::size_t n_used = 0;
  double op_error = std::numeric_limits<double>::quiet_NaN();
  double lambda_max_hat = std::numeric_limits<double>::quiet_NaN();
  double max_weight = std::numeric_limits<double>::quiet_NaN();
  double q_hat = std::numeric_limits<double>::quiet_NaN();
  bool degenerate = false;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // ordered by (d, rep)

  std::vector<double> column(std::size_t d, double SweepCell::*field) const {
    std::vector<double> out;
    for (const auto& c : cells)
      if (c.d == d && !c.degenerate) out.push_back(c.*field);
    return out;
  }
};

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw DomainError("median of an empty set");
  const std::size_t k = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(k), xs.end());
  const double hi = xs[k];
  if (xs.size() % 2 == 1) return hi;
  const double lo = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(k));
  return 0.5 * (lo + hi);
}

/// Stream of one sweep cell; independent of evaluation order.
inline RngStream sweep_cell_stream(const RngStream& root, std::size_t d, std::size_t rep) {
  return root.split(d).split(rep, Purpose::sweep);
}

/// One (d, rep) cell: n = ceil(d^kappa) draws from g, Sigma_hat_A with the
/// analytic p and mu_A.
inline SweepCell phase_cell(const SweepConfig& cfg, std::size_t d, std::size_t rep, const RngStream& root) {
  SweepCell c;
  c.d = d;
  c.rep = rep;
  c.n_used = sample_size_for(d, cfg.kappa);
  const double K = analytic_K(cfg.target, cfg.alpha, cfg.lambda1, c.n_used);
  auto [target, g] = build_alignment(cfg.target, cfg.alignment, cfg.lambda1, d, K);
  const AnalyticConditional& an = *target.analytic;

  RngStream rng = sweep_cell_stream(root, d, rep);
  const GaussianLaw law = GaussianLaw::spiked(Vector(d, 0.0), g);
  const WeightedSample s = draw_weighted(law, c.n_used, rng, target, 0.0);
  c.q_hat = static_cast<double>(s.hits()) / static_cast<double>(c.n_used);
  c.max_weight = max_weight_statistic(s, d, c.n_used);
  try {
    const SymMatrix sigma_hat = sigma_a_estimator(s, an.p, an.mu_A);
    c.op_error = operator_norm_diff(sigma_hat, an.sigma_A.dense());
    c.lambda_max_hat = sym_eigen_extremes(sigma_hat).lambda_max;
  } catch (const std::exception&) {
    c.degenerate = true;
  }
  if (!std::isfinite(c.op_error) || !std::isfinite(c.lambda_max_hat)) c.degenerate = true;
  return c;
}

/// Runs every (d, rep) cell. `run_cells` may evaluate the jobs in any order
/// (e.g. on a worker pool); results are stored by cell index.
inline SweepResult phase_sweep(const SweepConfig& cfg, const RngStream& rng,
                               const std::function<void(std::size_t, const std::function<void(std::size_t)>&)>&
                                   run_cells = {}) {
  cfg.validate();
  SweepResult res;
  res.cells.resize(cfg.dims.size() * cfg.reps);
  auto job = [&](std::size_t idx) {
    const std::size_t d = cfg.dims[idx / cfg.reps];
    res.cells[idx] = phase_cell(cfg, d, idx % cfg.reps, rng);
  };
  if (run_cells) {
    run_cells(res.cells.size(), job);
  } else {
    for (std::size_t i = 0; i < res.cells.size(); ++i) job(i);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Growth exponent of the maximal weight.

struct GammaSample {
  std::size_t n = 0;
  std::size_t rep = 0;
  /// max_i xi(X_i) l(X_i); zero when no draw hits.
  double max_weight = 0.0;
};

struct GammaFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double band_lo = std::numeric_limits<double>::quiet_NaN();
  double band_hi = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> n_used;       // grid points kept in the fit
  std::vector<double> median_log_max;    // per kept grid point
  std::vector<std::size_t> n_dropped;    // grid points whose median maximum is zero
  std::vector<GammaSample> samples;
};

/// Ordinary least squares slope and intercept of y on x.
inline std::pair<double, double> ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch(x.size(), y.size());
  if (x.size() < 2) throw DomainError("ols: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0.0)) throw DomainError("ols: x values are all equal");
  const double b = sxy / sxx;
  return {b, my - b * mx};
}

/// max_i xi(X_i) l(X_i) over n draws from N(0, g), generated in blocks so the
/// full sample is never held in memory.
inline double streaming_max_weight(const LimitState& target, const SpikedCovariance& g, std::size_t n,
                                   RngStream& rng) {
  const GaussianLaw law = GaussianLaw::spiked(Vector(g.dim(), 0.0), g);
  constexpr std::size_t kBlock = 8192;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t done = 0; done < n; done += kBlock) {
    const std::size_t b = std::min(kBlock, n - done);
    const DenseMatrix x = sample(law, b, rng);
    for (std::size_t i = 0; i < b; ++i) {
      const auto xi = x.row(i);
      if (target(xi) >= 0.0) best = std::max(best, log_likelihood_ratio(law, xi));
    }
  }
  return std::isfinite(best) ? std::exp(best) : 0.0;
}

inline constexpr std::size_t kBootstrapResamples = 200;

/// Least-squares slope of the per-n median of log max xi l against log n, with
/// a 95% percentile bootstrap band (reps resampled within each n).
/// `target_for_n` lets the event depend on n; grid points whose median maximum
/// is zero are dropped.
inline GammaFit estimate_gamma_star(const std::function<LimitState(std::size_t)>& target_for_n,
                                    const SpikedCovariance& g, const std::vector<std::size_t>& n_grid,
                                    std::size_t reps, const RngStream& rng,
                                    const std::function<void(std::size_t, const std::function<void(std::size_t)>&)>&
                                        run_cells = {}) {
  if (n_grid.size() < 4) throw DomainError("estimate_gamma_star: need at least 4 grid points");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1]) throw DomainError("estimate_gamma_star: n_grid must be increasing");
  if (n_grid.front() < 1) throw DomainError("estimate_gamma_star: n must be positive");
  if (static_cast<double>(n_grid.back()) < 100.0 * static_cast<double>(n_grid.front()))
    throw DomainError("estimate_gamma_star: n_grid must span at least two decades");
  if (reps < 2) throw DomainError("estimate_gamma_star: need at least two repetitions");

  GammaFit fit;
  fit.samples.resize(n_grid.size() * reps);
  auto job = [&](std::size_t idx) {
    const std::size_t n = n_grid[idx / reps];
    const std::size_t rep = idx % reps;
    RngStream s = rng.split(n).split(rep, Purpose::gamma);
    fit.samples[idx] = {n, rep, streaming_max_weight(target_for_n(n), g, n, s)};
  };
  if (run_cells) {
    run_cells(fit.samples.size(), job);
  } else {
    for (std::size_t i = 0; i < fit.samples.size(); ++i) job(i);
  }

  std::vector<std::vector<double>> logs;  // per kept grid point
  std::vector<double> xs;
  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    std::vector<double> l(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      const double m = fit.samples[k * reps + r].max_weight;
      l[r] = m > 0.0 ? std::log(m) : -std::numeric_limits<double>::infinity();
    }
    const double med = median(l);
    if (!std::isfinite(med)) {
      fit.n_dropped.push_back(n_grid[k]);
      continue;
    }
    fit.n_used.push_back(n_grid[k]);
    fit.median_log_max.push_back(med);
    xs.push_back(std::log(static_cast<double>(n_grid[k])));
    logs.push_back(std::move(l));
  }
  if (xs.size() < 2) throw DegenerateSample("estimate_gamma_star: fewer than two usable grid points");
  std::tie(fit.slope, fit.intercept) = ols(xs, fit.median_log_max);

  RngStream boot = rng.split(0, Purpose::bootstrap);
  std::vector<double> slopes;
  slopes.reserve(kBootstrapResamples);
  std::vector<double> meds(xs.size()), resample(reps);
  for (std::size_t b = 0; b < kBootstrapResamples; ++b) {
    bool ok = true;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      for (std::size_t r = 0; r < reps; ++r) {
        const auto j = static_cast<std::size_t>(boot.uniform() * static_cast<double>(reps));
        resample[r] = logs[k][std::min(j, reps - 1)];
      }
      meds[k] = median(resample);
      ok = ok && std::isfinite(meds[k]);
    }
    if (ok) slopes.push_back(ols(xs, meds).first);
  }
  if (!slopes.empty()) {
    std::sort(slopes.begin(), slopes.end());
    auto pct = [&](double q) {
      const double pos = q * static_cast<double>(slopes.size() - 1);
      const auto i = static_cast<std::size_t>(std::floor(pos));
      const double f = pos - static_cast<double>(i);
      return i + 1 < slopes.size() ? slopes[i] * (1.0 - f) + slopes[i + 1] * f : slopes[i];
    };
    fit.band_lo = pct(0.025);
    fit.band_hi = pct(0.975);
  }
  return fit;
}

/// Fixed-target convenience overload.
inline GammaFit estimate_gamma_star(const LimitState& target, const SpikedCovariance& g,
                                    const std::vector<std::size_t>& n_grid, std::size_t reps, const RngStream& rng) {
  return estimate_gamma_star([&](std::size_t) { return target; }, g, n_grid, reps, rng);
}

/// Exponent predicted for the maximal weight: alpha (1 - lambda1) for the
/// growing slab with V = U, 1 - lambda1 for the half-space with V orthogonal
/// to U, 0 when g = f.
inline double predicted_gamma_star(PhaseTarget t, Alignment a, double lambda1, std::optional<double> alpha) {
  if (lambda1 == 1.0) return 0.0;
  if (t == PhaseTarget::slab && a == Alignment::v_in_u) return alpha ? *alpha * (1.0 - lambda1) : 0.0;
  return 1.0 - lambda1;
}

/// 1 / min_t lambda_min of the sampled laws over a run.
inline double kappa_conjecture_report(const std::vector<IterationTrace>& traces) {
  if (traces.empty()) throw DomainError("kappa_conjecture_report: no traces");
  double m = std::numeric_limits<double>::infinity();
  for (const auto& t : traces)
    if (std::isfinite(t.lambda_min_proj)) m = std::min(m, t.lambda_min_proj);
  if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("kappa_conjecture_report: no positive lambda_min");
  return 1.0 / m;
}

}  // namespace cespectra
