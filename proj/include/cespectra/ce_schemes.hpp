#pragma once

// Cross-entropy schemes over Gaussian auxiliary laws: plain CE with a dense
// covariance, CE with projection onto a spiked covariance, and improved CE
// (smoothed indicator with an adaptively chosen bandwidth), with or without
// projection. Also the deterministic CE recursion for linear limit states,
// used as an analytic reference.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cespectra/errors.hpp"
#include "cespectra/estimators.hpp"
#include "cespectra/gauss.hpp"
#include "cespectra/numerics.hpp"
#include "cespectra/rng.hpp"
#include "cespectra/targets.hpp"

namespace cespectra {

enum class Scheme { ce, ce_proj, ice, ice_proj };
enum class DirectionStrategy { none, eig_min, mean };

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::ce: return "ce";
    case Scheme::ce_proj: return "ce_proj";
    case Scheme::ice: return "ice";
    case Scheme::ice_proj: return "ice_proj";
  }
  return "?";
}

inline std::string to_string(DirectionStrategy s) {
  switch (s) {
    case DirectionStrategy::none: return "none";
    case DirectionStrategy::eig_min: return "eig_min";
    case DirectionStrategy::mean: return "mean";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "ce") return Scheme::ce;
  if (s == "ce_proj") return Scheme::ce_proj;
  if (s == "ice") return Scheme::ice;
  if (s == "ice_proj") return Scheme::ice_proj;
  throw DomainError("unknown scheme '" + s + "'");
}

inline DirectionStrategy parse_strategy(const std::string& s) {
  if (s == "none") return DirectionStrategy::none;
  if (s == "eig_min") return DirectionStrategy::eig_min;
  if (s == "mean") return DirectionStrategy::mean;
  throw DomainError("unknown direction strategy '" + s + "'");
}

inline bool is_projected(Scheme s) { return s == Scheme::ce_proj || s == Scheme::ice_proj; }
inline bool is_improved(Scheme s) { return s == Scheme::ice || s == Scheme::ice_proj; }

/// Short label used in reports: ce, ce-eig, ce-mean, ice, ice-eig, ice-mean.
inline std::string variant_label(Scheme s, DirectionStrategy d) {
  std::string base = is_improved(s) ? "ice" : "ce";
  if (d == DirectionStrategy::eig_min) return base + "-eig";
  if (d == DirectionStrategy::mean) return base + "-mean";
  return base;
}

struct SchemeConfig {
  Scheme scheme = Scheme::ce;
  DirectionStrategy strategy = DirectionStrategy::none;
  double rho = 0.1;
  double delta_target = 1.5;
  std::size_t m = 5000;
  std::size_t n = 5000;
  std::size_t n_p = 2000;
  std::size_t t_max = 30;
  double divergence_lambda_cap = 1e6;
  bool cap_quantile_at_zero = true;
  std::uint64_t seed = 0;
  /// Number of projection directions (eig_min takes the r smallest).
  std::size_t projection_rank = 1;
  /// Golden-section stopping width on log(sigma).
  double bandwidth_log_tol = 1e-4;

  void validate() const {
    if ((strategy == DirectionStrategy::none) != !is_projected(scheme))
      throw DomainError("strategy must be 'none' exactly for the unprojected schemes");
    if (!(rho > 0.0 && rho < 1.0)) throw DomainError("rho must lie in (0,1)");
    if (!(delta_target > 0.0)) throw DomainError("delta_target must be positive");
    if (m < 2 || n < 2 || n_p < 2 || t_max < 1) throw DomainError("sample sizes must be >= 2 and t_max >= 1");
    if (!(divergence_lambda_cap > 0.0)) throw DomainError("divergence_lambda_cap must be positive");
    if (projection_rank < 1) throw DomainError("projection rank must be >= 1");
    if (strategy == DirectionStrategy::mean && projection_rank != 1)
      throw DomainError("the mean strategy yields a single direction");
  }
};

struct IterationTrace {
  std::size_t t = 0;
  /// q_hat_t for CE, sigma_hat_{t+1} for iCE.
  double q_or_sigma = std::numeric_limits<double>::quiet_NaN();
  double p_hat_t = std::numeric_limits<double>::quiet_NaN();
  /// lambda_min of the covariance of the law sampled at iteration t.
  double lambda_min_proj = std::numeric_limits<double>::quiet_NaN();
  /// lambda_max of the raw weighted estimate Sigma_hat_{t+1}.
  double lambda_max_raw = std::numeric_limits<double>::quiet_NaN();
  /// lambda_min of the covariance of the next law (the projected estimate for
  /// projected schemes); recorded even when the run stops at this iteration.
  double lambda_min_next = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
  std::size_t n_hits = 0;
};

struct RunResult {
  double p_hat = 0.0;
  double relative_error = std::numeric_limits<double>::quiet_NaN();
  std::vector<IterationTrace> traces;
  bool converged = false;
  bool diverged = false;
  std::size_t iterations_used = 0;
};

/// One iteration's output. `stop` is set when the batch drawn from the
/// current law meets the scheme's stopping rule; the run then estimates p
/// with the current law.
struct IterationOutcome {
  GaussianLaw next;
  IterationTrace trace;
  bool stop = false;
  double sigma = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline void mark_diverged(IterationTrace& tr) { tr.diverged = true; }

/// Directions for the projection step.
inline std::vector<Vector> projection_directions(DirectionStrategy s, const SymEigenDecomposition& eig,
                                                 const Vector& mu_hat, std::size_t rank) {
  std::vector<Vector> dirs;
  if (s == DirectionStrategy::eig_min) {
    for (std::size_t k = 0; k < std::min(rank, eig.values.size()); ++k) dirs.push_back(eig.vectors.column(k));
  } else if (s == DirectionStrategy::mean) {
    const double nm = norm(mu_hat);
    if (!(nm > 0.0) || !std::isfinite(nm)) throw DegenerateSample("mean direction is zero");
    Vector v = mu_hat;
    for (auto& x : v) x /= nm;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

/// Turns a weighted estimate into the next law and fills the spectral fields
/// of the trace. Returns false on divergence.
inline bool next_law_from_estimate(const EstimationResult& est, const SchemeConfig& cfg,
                                   IterationOutcome& out) {
  SymEigenDecomposition eig;
  try {
    eig = sym_eigen(est.sigma_hat);
  } catch (const std::exception&) {
    return false;
  }
  out.trace.lambda_max_raw = eig.values.back();
  if (!std::isfinite(out.trace.lambda_max_raw) || out.trace.lambda_max_raw > cfg.divergence_lambda_cap) return false;
  try {
    if (is_projected(cfg.scheme)) {
      auto dirs = projection_directions(cfg.strategy, eig, est.mu_hat, cfg.projection_rank);
      out.next = GaussianLaw::spiked(est.mu_hat, proj_r(est.sigma_hat, dirs));
    } else {
      out.next = GaussianLaw::dense(est.mu_hat, est.sigma_hat);
    }
  } catch (const NotPositiveDefinite&) {
    return false;
  } catch (const CollapsedProjection&) {
    return false;
  } catch (const DegenerateSample&) {
    return false;
  } catch (const DomainError&) {
    return false;
  }
  out.trace.lambda_min_next = out.next.is_spiked() ? out.next.spiked_cov().lambda_min() : eig.values.front();
  return true;
}

}  // namespace detail

/// One CE iteration (projected or not, according to cfg.scheme):
/// q_hat from an m-batch, then the weighted update from an independent
/// n-batch with l_hat = f xi_{q_hat} / (p_hat g).
inline IterationOutcome ce_iteration(const GaussianLaw& state, const LimitState& target, const SchemeConfig& cfg,
                                     RngStream& rng, std::size_t t = 0) {
  if (state.dim() != target.dim) throw DimensionMismatch(target.dim, state.dim());
  IterationOutcome out{state, {}, false, {}};
  out.trace.t = t;
  out.trace.lambda_min_proj = state.lambda_min();

  RngStream y_rng = rng.split(t, Purpose::quantile_batch);
  const DenseMatrix ys = sample(state, cfg.m, y_rng);
  Vector scores(cfg.m);
  for (std::size_t i = 0; i < cfg.m; ++i) scores[i] = target(ys.row(i));
  const double q_raw = weighted_quantile_step(scores, cfg.rho);
  out.stop = q_raw >= 0.0;
  const double q = cfg.cap_quantile_at_zero ? std::min(q_raw, 0.0) : q_raw;
  out.trace.q_or_sigma = q;

  RngStream x_rng = rng.split(t, Purpose::update_batch);
  const WeightedSample xs = draw_weighted(state, cfg.n, x_rng, target, q);
  out.trace.n_hits = xs.hits();

  EstimationResult est;
  try {
    est = weighted_mean_cov(xs, q, true);
  } catch (const DegenerateSample&) {
    detail::mark_diverged(out.trace);
    out.next = state;
    return out;
  }
  out.trace.p_hat_t = est.p_hat;
  if (!detail::next_law_from_estimate(est, cfg, out)) {
    detail::mark_diverged(out.trace);
    out.next = state;
  }
  return out;
}

/// CE with projection; the state must carry a spiked covariance.
inline IterationOutcome ce_proj_iteration(const GaussianLaw& state, const LimitState& target,
                                          const SchemeConfig& cfg, RngStream& rng, std::size_t t = 0) {
  if (!state.is_spiked()) throw DomainError("ce_proj_iteration: state covariance must be spiked");
  if (cfg.scheme != Scheme::ce_proj) throw DomainError("ce_proj_iteration: config scheme must be ce_proj");
  return ce_iteration(state, target, cfg, rng, t);
}

/// Bandwidth minimizing (delta_hat(sigma) - delta)^2 over [lo, hi]: a coarse
/// scan on log(sigma) picks the best cell, golden-section refines inside it.
/// Throws DegenerateSample when delta_hat is infinite on the whole range.
inline double minimize_bandwidth(const WeightedSample& ys, double delta, double lo, double hi,
                                 double log_tol = 1e-4) {
  if (!(lo > 0.0) || !(hi >= lo)) throw DomainError("minimize_bandwidth: need 0 < lo <= hi");
  auto objective = [&](double s) {
    const double dh = ice_delta(ys, std::exp(s));
    if (!std::isfinite(dh)) return std::numeric_limits<double>::infinity();
    return (dh - delta) * (dh - delta);
  };
  const double a0 = std::log(lo);
  const double b0 = std::log(hi);
  if (b0 - a0 <= log_tol) {
    if (!std::isfinite(objective(b0))) throw DegenerateSample("minimize_bandwidth: infeasible bandwidth");
    return hi;
  }

  constexpr int kScan = 48;
  std::vector<double> grid(kScan + 1), vals(kScan + 1);
  int best = 0;
  for (int k = 0; k <= kScan; ++k) {
    grid[k] = a0 + (b0 - a0) * k / kScan;
    vals[k] = objective(grid[k]);
    if (vals[k] < vals[best]) best = k;
  }
  if (!std::isfinite(vals[best])) throw DegenerateSample("minimize_bandwidth: infeasible bandwidth");

  double a = grid[std::max(best - 1, 0)];
  double b = grid[std::min(best + 1, kScan)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  for (int it = 0; it < 200 && (b - a) > log_tol; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  double s_best = 0.5 * (a + b);
  double f_best = objective(s_best);
  // The scan point itself may beat the refined interior (e.g. at a boundary).
  if (vals[best] < f_best) s_best = grid[best];
  return std::clamp(std::exp(s_best), lo, hi);
}

/// 10 x interquartile range of the scores, floored at 1e-6.
inline double initial_bandwidth(std::span<const double> scores) {
  std::vector<double> s(scores.begin(), scores.end());
  std::sort(s.begin(), s.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    return i + 1 < s.size() ? s[i] * (1.0 - frac) + s[i + 1] * frac : s[i];
  };
  return std::max(10.0 * (at(0.75) - at(0.25)), 1e-6);
}

/// Relative width of the bandwidth search range: sigma is searched in
/// [kBandwidthFloorRatio * sigma_prev, sigma_prev].
inline constexpr double kBandwidthFloorRatio = 1e-6;

/// One iCE iteration. `sigma_prev` = +inf on the first iteration, in which case
/// the search starts from initial_bandwidth() of the first batch.
inline IterationOutcome ice_iteration(const GaussianLaw& state, double sigma_prev, const LimitState& target,
                                      const SchemeConfig& cfg, RngStream& rng, std::size_t t = 0) {
  if (state.dim() != target.dim) throw DimensionMismatch(target.dim, state.dim());
  if (!(sigma_prev > 0.0)) throw DomainError("ice_iteration: sigma_prev must be positive");
  IterationOutcome out{state, {}, false, sigma_prev};
  out.trace.t = t;
  out.trace.lambda_min_proj = state.lambda_min();

  RngStream y_rng = rng.split(t, Purpose::quantile_batch);
  const WeightedSample ys = draw_weighted(state, cfg.m, y_rng, target, 0.0);
  out.stop = indicator_cv(ys) <= cfg.delta_target;

  const double hi = std::isfinite(sigma_prev) ? sigma_prev : initial_bandwidth(ys.scores);
  double sigma;
  try {
    sigma = minimize_bandwidth(ys, cfg.delta_target, kBandwidthFloorRatio * hi, hi, cfg.bandwidth_log_tol);
  } catch (const DegenerateSample&) {
    detail::mark_diverged(out.trace);
    return out;
  }
  out.sigma = sigma;
  out.trace.q_or_sigma = sigma;

  RngStream x_rng = rng.split(t, Purpose::update_batch);
  const WeightedSample xs = draw_weighted(state, cfg.n, x_rng, target, 0.0);
  out.trace.n_hits = xs.hits();
  Vector lw(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) lw[i] = xs.log_ratios[i] + log_std_normal_cdf(xs.scores[i] / sigma);

  EstimationResult est;
  try {
    est = weighted_moments(xs.points, lw, true);
  } catch (const DegenerateSample&) {
    detail::mark_diverged(out.trace);
    return out;
  }
  out.trace.p_hat_t = est.p_hat;
  if (!detail::next_law_from_estimate(est, cfg, out)) {
    detail::mark_diverged(out.trace);
    out.next = state;
  }
  return out;
}

/// Initial law: f itself, carried as a rank-0 spiked law for projected schemes.
inline GaussianLaw initial_law(const SchemeConfig& cfg, std::size_t d) {
  if (is_projected(cfg.scheme)) return GaussianLaw::spiked(Vector(d, 0.0), SpikedCovariance(d));
  return GaussianLaw::standard(d);
}

/// Final importance-sampling estimate with n_p fresh draws and the exact indicator.
inline double final_estimate(const GaussianLaw& law, const LimitState& target, std::size_t n_p, RngStream& rng) {
  const WeightedSample s = draw_weighted(law, n_p, rng, target, 0.0);
  return is_probability(s);
}

/// Runs a scheme to completion. Iteration t draws its batches from keyed
/// children of `rng`. The run stops once a batch from the current law meets
/// the stopping rule (CE: q_hat_t >= 0; iCE: exact-indicator CV <= delta_target),
/// at t_max, or on divergence. p is then estimated with the current law, which
/// on divergence is the last valid one.
inline RunResult run_scheme(const SchemeConfig& cfg, const LimitState& target, RngStream& rng) {
  cfg.validate();
  RunResult res;
  GaussianLaw law = initial_law(cfg, target.dim);
  double sigma = std::numeric_limits<double>::infinity();

  for (std::size_t t = 0; t < cfg.t_max; ++t) {
    IterationOutcome out = is_improved(cfg.scheme) ? ice_iteration(law, sigma, target, cfg, rng, t)
                                                   : ce_iteration(law, target, cfg, rng, t);
    res.traces.push_back(out.trace);
    if (out.stop) {
      res.converged = true;
      break;
    }
    if (out.trace.diverged) {
      res.diverged = true;
      break;
    }
    law = std::move(out.next);
    if (is_improved(cfg.scheme)) sigma = out.sigma;
  }
  res.iterations_used = res.traces.size();

  RngStream final_rng = rng.split(0, Purpose::final_batch);
  res.p_hat = final_estimate(law, target, cfg.n_p, final_rng);
  if (target.reference_p) res.relative_error = std::abs(res.p_hat - *target.reference_p) / *target.reference_p;
  return res;
}

// ---------------------------------------------------------------------------
// Deterministic CE on a linear limit state <u, x> - K. Every law stays of the
// form N(m u, I + (s^2 - 1) u u^T), so the recursion is one-dimensional.

struct DeterministicCeStep {
  double q = 0.0;          // level with P_{g_t}(phi >= q) = rho
  double mean_along_u = 0.0;  // m_t
  double var_along_u = 1.0;   // s_t^2
};

inline std::vector<DeterministicCeStep> deterministic_ce_linear(double K, double rho, std::size_t t_max,
                                                                bool cap_at_zero = true) {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("deterministic_ce_linear: rho must lie in (0,1)");
  std::vector<DeterministicCeStep> steps;
  double m = 0.0, s2 = 1.0;
  const double z = std_normal_quantile(1.0 - rho);
  for (std::size_t t = 0; t < t_max; ++t) {
    double q = m - K + std::sqrt(s2) * z;
    steps.push_back({q, m, s2});
    if (q >= 0.0) break;
    if (cap_at_zero) q = std::min(q, 0.0);
    const AnalyticConditional next = *halfspace_set({1.0}, K + q).analytic;
    m = next.mu_A[0];
    s2 = next.sigma_A.lambdas()[0];
  }
  return steps;
}

}  // namespace cespectra
