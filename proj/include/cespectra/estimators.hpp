#pragma once

// Weighted-sample estimators. Likelihood ratios travel in log space and are
// only exponentiated after subtracting the batch maximum.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "cespectra/errors.hpp"
#include "cespectra/gauss.hpp"
#include "cespectra/numerics.hpp"

namespace cespectra {

struct EstimationResult {
  double p_hat = 0.0;
  Vector mu_hat;
  SymMatrix sigma_hat;
  /// (d/n) max_i xi(X_i) l(X_i)
  double effective_weight_max = 0.0;
  std::size_t n_hits = 0;
};

namespace detail {

/// Returns max over entries with keep[i] != 0, or -inf if none.
inline double masked_max(std::span<const double> xs, std::span<const std::uint8_t> keep) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (keep[i]) m = std::max(m, xs[i]);
  return m;
}

// Accumulates sum_i w_i (x_i - c)(x_i - c)^T into the upper triangle of `acc`.
inline void accumulate_outer(SymMatrix& acc, const DenseMatrix& pts, std::span<const double> w,
                             std::span<const double> center) {
  const std::size_t d = pts.cols();
  Vector y(d);
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    if (w[i] == 0.0) continue;
    const auto x = pts.row(i);
    for (std::size_t a = 0; a < d; ++a) y[a] = x[a] - center[a];
    for (std::size_t a = 0; a < d; ++a) {
      const double wa = w[i] * y[a];
      double* row = &acc(a, 0);
      for (std::size_t b = a; b < d; ++b) row[b] += wa * y[b];
    }
  }
}

inline void mirror_upper(SymMatrix& m) {
  for (std::size_t a = 0; a < m.dim(); ++a)
    for (std::size_t b = a + 1; b < m.dim(); ++b) m(b, a) = m(a, b);
}

}  // namespace detail

/// p_hat = (1/n) sum_i l(X_i) xi_A(X_i).
inline double is_probability(const WeightedSample& sample) {
  const std::size_t n = sample.size();
  if (n == 0) throw DegenerateSample("is_probability: empty sample");
  const double m = detail::masked_max(sample.log_ratios, sample.indicators);
  if (!std::isfinite(m)) return 0.0;
  Vector terms;
  terms.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (sample.indicators[i]) terms.push_back(std::exp(sample.log_ratios[i] - m));
  return std::exp(m + std::log(pairwise_sum(terms)) - std::log(static_cast<double>(n)));
}

/// The floor((1 - rho) m)-th smallest score (1-based), clamped to the minimum.
inline double weighted_quantile_step(std::span<const double> scores, double rho) {
  if (scores.empty()) throw DegenerateSample("weighted_quantile_step: empty scores");
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("weighted_quantile_step: rho must lie in (0,1)");
  const std::size_t m = scores.size();
  // The epsilon keeps exact products such as 0.7 * 10 from flooring to 6.
  auto k = static_cast<std::size_t>(std::floor((1.0 - rho) * static_cast<double>(m) + 1e-9));
  k = std::clamp<std::size_t>(k, 1, m);
  std::vector<double> s(scores.begin(), scores.end());
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k - 1), s.end());
  return s[k - 1];
}

/// Weighted mean and covariance from per-point log weights (-inf excludes a
/// point):
///   mu = (1/n) sum w_i X_i,  Sigma = (1/n) sum w_i X_i X_i^T - mu mu^T.
/// p_hat is the mean raw weight. When self-normalized, w_i is divided by p_hat
/// so that the weights sum to n.
inline EstimationResult weighted_moments(const DenseMatrix& points, std::span<const double> log_weights,
                                         bool self_normalize = true) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  if (n == 0) throw DegenerateSample("weighted_moments: empty sample");
  if (log_weights.size() != n) throw DimensionMismatch(n, log_weights.size());

  EstimationResult r;
  double log_max = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) {
    if (std::isnan(lw)) throw DegenerateSample("weighted_moments: NaN weight");
    if (lw > -std::numeric_limits<double>::infinity()) ++r.n_hits;
    log_max = std::max(log_max, lw);
  }
  if (r.n_hits == 0) throw DegenerateSample("weighted_moments: every weight is zero");
  if (!std::isfinite(log_max)) throw DegenerateSample("weighted_moments: infinite weight");

  Vector scaled(n, 0.0);  // w_i / max w
  for (std::size_t i = 0; i < n; ++i) scaled[i] = std::exp(log_weights[i] - log_max);
  const double sum_scaled = pairwise_sum(scaled);
  const double nn = static_cast<double>(n);
  r.p_hat = std::exp(log_max + std::log(sum_scaled) - std::log(nn));
  r.effective_weight_max = static_cast<double>(d) / nn * std::exp(log_max);

  Vector w(n);
  if (self_normalize) {
    for (std::size_t i = 0; i < n; ++i) w[i] = nn * scaled[i] / sum_scaled;
  } else {
    const double m = std::exp(log_max);
    for (std::size_t i = 0; i < n; ++i) w[i] = scaled[i] * m;
  }
  const double total_w = pairwise_sum(w);

  r.mu_hat.assign(d, 0.0);
  {
    Vector col(n);
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t i = 0; i < n; ++i) col[i] = w[i] * points(i, a);
      r.mu_hat[a] = pairwise_sum(col) / nn;
    }
  }

  // Raw second moment minus mu mu^T equals the centred form plus
  // (1 - total_w / n) mu mu^T; the correction vanishes for self-normalized weights.
  r.sigma_hat = SymMatrix(d, 0.0);
  detail::accumulate_outer(r.sigma_hat, points, w, r.mu_hat);
  const double excess = 1.0 - total_w / nn;
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      r.sigma_hat(a, b) = r.sigma_hat(a, b) / nn + excess * r.mu_hat[a] * r.mu_hat[b];
    }
  detail::mirror_upper(r.sigma_hat);
  r.sigma_hat.symmetrize();
  for (double v : r.sigma_hat.data())
    if (!std::isfinite(v)) throw DegenerateSample("weighted_moments: non-finite covariance");
  return r;
}

/// CE update: weights l(X_i) xi(X_i) with xi re-derived as score >= threshold
/// when the sample carries scores (otherwise the stored indicators are used).
inline EstimationResult weighted_mean_cov(const WeightedSample& sample, double threshold,
                                          bool self_normalize = true) {
  const std::size_t n = sample.size();
  if (n == 0) throw DegenerateSample("weighted_mean_cov: empty sample");
  Vector lw(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool hit = sample.has_scores() ? sample.scores[i] >= threshold : sample.indicators[i] != 0;
    lw[i] = hit ? sample.log_ratios[i] : -std::numeric_limits<double>::infinity();
  }
  bool any = false;
  for (double v : lw) any = any || v > -std::numeric_limits<double>::infinity();
  if (!any) throw DegenerateSample("weighted_mean_cov: no sample falls in the event");
  return weighted_moments(sample.points, lw, self_normalize);
}

/// Sigma_hat_A = (1/(n p)) sum l(X_i) xi_A(X_i) X_i X_i^T - mu_A mu_A^T with the
/// true p and mu_A. No hits gives -mu_A mu_A^T.
inline SymMatrix sigma_a_estimator(const WeightedSample& sample, double p, std::span<const double> mu_A) {
  const std::size_t n = sample.size();
  const std::size_t d = sample.dim();
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("sigma_a_estimator: p must lie in (0,1]");
  if (mu_A.size() != d) throw DimensionMismatch(d, mu_A.size());
  if (n == 0) throw DegenerateSample("sigma_a_estimator: empty sample");

  Vector w(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (sample.indicators[i]) w[i] = std::exp(sample.log_ratios[i]);
  const Vector zero(d, 0.0);
  SymMatrix s(d, 0.0);
  detail::accumulate_outer(s, sample.points, w, zero);
  const double denom = static_cast<double>(n) * p;
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) s(a, b) = s(a, b) / denom - mu_A[a] * mu_A[b];
  detail::mirror_upper(s);
  return s;
}

/// Empirical coefficient of variation of w_i = l(Y_i) F_N(score_i / sigma):
/// sqrt(m sum w_i^2) / sum w_i. Returns +inf when every weight vanishes.
inline double ice_delta(const WeightedSample& sample, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("ice_delta: sigma must be positive");
  if (!sample.has_scores()) throw DomainError("ice_delta: sample carries no scores");
  const std::size_t m = sample.size();
  if (m == 0) throw DegenerateSample("ice_delta: empty sample");
  thread_local Vector lw;
  lw.resize(m);
  double lmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    lw[i] = sample.log_ratios[i] + log_std_normal_cdf(sample.scores[i] / sigma);
    lmax = std::max(lmax, lw[i]);
  }
  if (!std::isfinite(lmax)) return std::numeric_limits<double>::infinity();
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double w = std::exp(lw[i] - lmax);
    s1 += w;
    s2 += w * w;
  }
  if (!(s1 > 0.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt(static_cast<double>(m) * s2) / s1;
}

/// Empirical coefficient of variation of the exact-indicator weights
/// xi(Y_i) l(Y_i), in the same normalization as ice_delta.
inline double indicator_cv(const WeightedSample& sample) {
  const std::size_t m = sample.size();
  if (m == 0) throw DegenerateSample("indicator_cv: empty sample");
  const double lmax = detail::masked_max(sample.log_ratios, sample.indicators);
  if (!std::isfinite(lmax)) return std::numeric_limits<double>::infinity();
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!sample.indicators[i]) continue;
    const double w = std::exp(sample.log_ratios[i] - lmax);
    s1 += w;
    s2 += w * w;
  }
  return std::sqrt(static_cast<double>(m) * s2) / s1;
}

/// (d/n) max_i xi_A(X_i) l(X_i); zero when nothing hits.
inline double max_weight_statistic(const WeightedSample& sample, std::size_t d, std::size_t n) {
  if (sample.size() == 0) throw DegenerateSample("max_weight_statistic: empty sample");
  const double lmax = detail::masked_max(sample.log_ratios, sample.indicators);
  if (!std::isfinite(lmax)) return 0.0;
  return static_cast<double>(d) / static_cast<double>(n) * std::exp(lmax);
}

}  // namespace cespectra
