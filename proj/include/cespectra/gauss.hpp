#pragma once

// Gaussian auxiliary laws: the spiked covariance I + sum_k (lambda_k - 1) v_k v_k^T,
// general dense laws, sampling, log-densities, likelihood ratios against the
// nominal N(0, I), and the rank-r projection operator.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "cespectra/errors.hpp"
#include "cespectra/numerics.hpp"
#include "cespectra/rng.hpp"

namespace cespectra {

class SpikedCovariance {
 public:
  /// Identity covariance of dimension `dim` (rank 0).
  explicit SpikedCovariance(std::size_t dim = 0) : dim_(dim) {}

  /// Pairs are re-sorted so that lambdas are ascending. Directions must be
  /// orthonormal within `ortho_tol`.
  SpikedCovariance(std::size_t dim, Vector lambdas, std::vector<Vector> directions,
                   double ortho_tol = 1e-10)
      : dim_(dim) {
    if (lambdas.size() != directions.size())
      throw DimensionMismatch(lambdas.size(), directions.size());
    if (lambdas.size() > dim) throw DomainError("spiked covariance: rank exceeds dimension");
    for (double l : lambdas)
      if (!(l > 0.0) || !std::isfinite(l)) throw DomainError("spiked covariance: lambda must be positive");
    for (const auto& v : directions)
      if (v.size() != dim) throw DimensionMismatch(dim, v.size());
    for (std::size_t a = 0; a < directions.size(); ++a)
      for (std::size_t b = a; b < directions.size(); ++b) {
        const double g = dot(directions[a], directions[b]);
        if (std::abs(g - (a == b ? 1.0 : 0.0)) > ortho_tol)
          throw DomainError("spiked covariance: directions are not orthonormal");
      }
    std::vector<std::size_t> order(lambdas.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return lambdas[a] < lambdas[b]; });
    for (auto k : order) {
      lambdas_.push_back(lambdas[k]);
      directions_.push_back(std::move(directions[k]));
    }
  }

  static SpikedCovariance rank_one(std::size_t dim, double lambda, Vector direction) {
    return SpikedCovariance(dim, {lambda}, {std::move(direction)});
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rank() const noexcept { return lambdas_.size(); }
  const Vector& lambdas() const noexcept { return lambdas_; }
  const std::vector<Vector>& directions() const noexcept { return directions_; }

  double log_det() const {
    double s = 0.0;
    for (double l : lambdas_) s += std::log(l);
    return s;
  }

  double lambda_min() const {
    double m = rank() < dim_ ? 1.0 : std::numeric_limits<double>::infinity();
    for (double l : lambdas_) m = std::min(m, l);
    return m;
  }

  double lambda_max() const {
    double m = rank() < dim_ ? 1.0 : 0.0;
    for (double l : lambdas_) m = std::max(m, l);
    return m;
  }

  /// y^T Sigma^{-1} y, using the rank-r correction of the inverse.
  double inverse_quadratic(std::span<const double> y) const {
    if (y.size() != dim_) throw DimensionMismatch(dim_, y.size());
    double q = dot(y, y);
    for (std::size_t k = 0; k < rank(); ++k) {
      const double c = dot(directions_[k], y);
      q += (1.0 / lambdas_[k] - 1.0) * c * c;
    }
    return q;
  }

  /// u^T Sigma u.
  double variance_along(std::span<const double> u) const {
    if (u.size() != dim_) throw DimensionMismatch(dim_, u.size());
    double q = dot(u, u);
    for (std::size_t k = 0; k < rank(); ++k) {
      const double c = dot(directions_[k], u);
      q += (lambdas_[k] - 1.0) * c * c;
    }
    return q;
  }

  SymMatrix dense() const {
    SymMatrix m = SymMatrix::identity(dim_);
    for (std::size_t k = 0; k < rank(); ++k) {
      const auto& v = directions_[k];
      const double a = lambdas_[k] - 1.0;
      for (std::size_t i = 0; i < dim_; ++i)
        for (std::size_t j = 0; j < dim_; ++j) m(i, j) += a * v[i] * v[j];
    }
    m.symmetrize();
    return m;
  }

  /// Spiked-model constraints of the theory lab: lambda_1 <= 1 and bounded
  /// rank and top eigenvalue.
  void check_theory_constraints(std::size_t max_rank, double max_lambda) const {
    if (rank() == 0) throw DomainError("theory lab requires rank >= 1");
    if (rank() > max_rank) throw DomainError("theory lab: rank exceeds bound");
    if (lambdas_.front() > 1.0) throw DomainError("theory lab: smallest spike must satisfy lambda_1 <= 1");
    if (lambda_max() > max_lambda) throw DomainError("theory lab: lambda_max exceeds bound");
  }

 private:
  std::size_t dim_;
  Vector lambdas_;
  std::vector<Vector> directions_;
};

class GaussianLaw {
 public:
  struct Identity {};
  struct Dense {
    SymMatrix cov;
    DenseMatrix chol;
    double log_det = 0.0;
  };

  static GaussianLaw standard(std::size_t dim) { return GaussianLaw(Vector(dim, 0.0), Identity{}); }

  static GaussianLaw spiked(Vector mean, SpikedCovariance cov) {
    if (mean.size() != cov.dim()) throw DimensionMismatch(cov.dim(), mean.size());
    return GaussianLaw(std::move(mean), std::move(cov));
  }

  /// Factorizes `cov`; throws NotPositiveDefinite if that fails.
  static GaussianLaw dense(Vector mean, SymMatrix cov) {
    if (mean.size() != cov.dim()) throw DimensionMismatch(cov.dim(), mean.size());
    Dense d;
    d.chol = cholesky(cov);
    for (std::size_t i = 0; i < cov.dim(); ++i) d.log_det += 2.0 * std::log(d.chol(i, i));
    d.cov = std::move(cov);
    return GaussianLaw(std::move(mean), std::move(d));
  }

  std::size_t dim() const noexcept { return mean_.size(); }
  const Vector& mean() const noexcept { return mean_; }

  bool is_identity() const noexcept { return std::holds_alternative<Identity>(cov_); }
  bool is_spiked() const noexcept { return std::holds_alternative<SpikedCovariance>(cov_); }
  bool is_dense() const noexcept { return std::holds_alternative<Dense>(cov_); }
  const SpikedCovariance& spiked_cov() const { return std::get<SpikedCovariance>(cov_); }
  const Dense& dense_cov() const { return std::get<Dense>(cov_); }

  double log_det() const {
    if (is_spiked()) return spiked_cov().log_det();
    if (is_dense()) return dense_cov().log_det;
    return 0.0;
  }

  /// y^T Sigma^{-1} y for a centred vector y.
  double inverse_quadratic(std::span<const double> y) const {
    if (y.size() != dim()) throw DimensionMismatch(dim(), y.size());
    if (is_spiked()) return spiked_cov().inverse_quadratic(y);
    if (is_dense()) {
      const auto& L = dense_cov().chol;
      thread_local Vector z;
      z.assign(dim(), 0.0);
      double q = 0.0;
      for (std::size_t i = 0; i < dim(); ++i) {
        const auto li = L.row(i);
        double s = y[i];
        for (std::size_t k = 0; k < i; ++k) s -= li[k] * z[k];
        z[i] = s / li[i];
        q += z[i] * z[i];
      }
      return q;
    }
    return dot(y, y);
  }

  SymMatrix covariance() const {
    if (is_spiked()) return spiked_cov().dense();
    if (is_dense()) return dense_cov().cov;
    return SymMatrix::identity(dim());
  }

  double lambda_min() const {
    if (is_spiked()) return spiked_cov().lambda_min();
    if (is_dense()) return sym_eigen_extremes(dense_cov().cov).lambda_min;
    return 1.0;
  }

  double lambda_max() const {
    if (is_spiked()) return spiked_cov().lambda_max();
    if (is_dense()) return sym_eigen_extremes(dense_cov().cov).lambda_max;
    return 1.0;
  }

 private:
  template <class Cov>
  GaussianLaw(Vector mean, Cov cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    for (double m : mean_)
      if (!std::isfinite(m)) throw DomainError("gaussian law: non-finite mean");
  }

  Vector mean_;
  std::variant<Identity, SpikedCovariance, Dense> cov_;
};

/// n i.i.d. draws, one per row. Consumes exactly n*d normals from `rng`.
inline DenseMatrix sample(const GaussianLaw& law, std::size_t n, RngStream& rng) {
  const std::size_t d = law.dim();
  DenseMatrix out(n, d);
  Vector z(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& zi : z) zi = rng.normal();
    auto x = out.row(i);
    if (law.is_dense()) {
      const auto& L = law.dense_cov().chol;
      for (std::size_t a = 0; a < d; ++a) {
        const auto la = L.row(a);
        double s = 0.0;
        for (std::size_t k = 0; k <= a; ++k) s += la[k] * z[k];
        x[a] = s;
      }
    } else {
      std::copy(z.begin(), z.end(), x.begin());
      if (law.is_spiked()) {
        const auto& cov = law.spiked_cov();
        for (std::size_t k = 0; k < cov.rank(); ++k) {
          const auto& v = cov.directions()[k];
          const double c = (std::sqrt(cov.lambdas()[k]) - 1.0) * dot(z, v);
          for (std::size_t a = 0; a < d; ++a) x[a] += c * v[a];
        }
      }
    }
    const auto& mu = law.mean();
    for (std::size_t a = 0; a < d; ++a) x[a] += mu[a];
  }
  return out;
}

inline double log_density(const GaussianLaw& law, std::span<const double> x) {
  if (x.size() != law.dim()) throw DimensionMismatch(law.dim(), x.size());
  Vector y(x.begin(), x.end());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= law.mean()[i];
  const double d = static_cast<double>(law.dim());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + law.log_det() + law.inverse_quadratic(y));
}

/// log f(x) - log g(x) with f = N(0, I); the 2*pi constants cancel exactly.
inline double log_likelihood_ratio(const GaussianLaw& g, std::span<const double> x) {
  if (x.size() != g.dim()) throw DimensionMismatch(g.dim(), x.size());
  if (g.is_identity()) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += g.mean()[i] * (g.mean()[i] - 2.0 * x[i]);
    return 0.5 * s;
  }
  thread_local Vector y;
  y.assign(x.begin(), x.end());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= g.mean()[i];
  return -0.5 * dot(x, x) + 0.5 * g.log_det() + 0.5 * g.inverse_quadratic(y);
}

/// Closed-form f/g for centred spiked g:
/// |Sigma|^{1/2} exp(1/2 sum_k (1/lambda_k - 1) <v_k, x>^2).
inline double likelihood_ratio(const SpikedCovariance& sigma, std::span<const double> x) {
  if (x.size() != sigma.dim()) throw DimensionMismatch(sigma.dim(), x.size());
  double e = 0.5 * sigma.log_det();
  for (std::size_t k = 0; k < sigma.rank(); ++k) {
    const double c = dot(sigma.directions()[k], x);
    e += 0.5 * (1.0 / sigma.lambdas()[k] - 1.0) * c * c;
  }
  return std::exp(e);
}

inline constexpr double kProjectionFloor = 1e-12;

/// Proj_r: keeps v_k^T Sigma v_k along each direction and the identity on the
/// orthogonal complement. Variances below kProjectionFloor are floored (and
/// counted in `floored`); if every one of them is, throws CollapsedProjection.
inline SpikedCovariance proj_r(const SymMatrix& sigma_hat, const std::vector<Vector>& directions,
                               std::size_t* floored = nullptr) {
  const std::size_t d = sigma_hat.dim();
  for (const auto& v : directions)
    if (v.size() != d) throw DimensionMismatch(d, v.size());
  for (std::size_t a = 0; a < directions.size(); ++a)
    for (std::size_t b = a; b < directions.size(); ++b)
      if (std::abs(dot(directions[a], directions[b]) - (a == b ? 1.0 : 0.0)) > 1e-8)
        throw DomainError("proj_r: directions are not orthonormal");

  // Modified Gram-Schmidt so the stored family is orthonormal to rounding.
  std::vector<Vector> basis;
  for (const auto& v : directions) {
    Vector w = v;
    for (const auto& b : basis) {
      const double c = dot(w, b);
      for (std::size_t i = 0; i < d; ++i) w[i] -= c * b[i];
    }
    const double nw = norm(w);
    for (auto& wi : w) wi /= nw;
    basis.push_back(std::move(w));
  }

  Vector lambdas;
  std::size_t n_floored = 0;
  for (const auto& v : basis) {
    double l = sigma_hat.quadratic_form(v);
    if (!std::isfinite(l)) throw DomainError("proj_r: non-finite variance");
    if (l < kProjectionFloor) {
      l = kProjectionFloor;
      ++n_floored;
    }
    lambdas.push_back(l);
  }
  if (floored) *floored += n_floored;
  if (!basis.empty() && n_floored == basis.size())
    throw CollapsedProjection("proj_r: every projected variance is below the floor");
  return SpikedCovariance(d, std::move(lambdas), std::move(basis));
}

/// A batch of draws with log f/g, event indicators and (optionally) scores.
struct WeightedSample {
  DenseMatrix points;
  Vector log_ratios;
  std::vector<std::uint8_t> indicators;
  Vector scores;

  std::size_t size() const noexcept { return points.rows(); }
  std::size_t dim() const noexcept { return points.cols(); }
  bool has_scores() const noexcept { return !scores.empty(); }

  void validate() const {
    const std::size_t n = size();
    if (log_ratios.size() != n) throw DimensionMismatch(n, log_ratios.size());
    if (indicators.size() != n) throw DimensionMismatch(n, indicators.size());
    if (!scores.empty() && scores.size() != n) throw DimensionMismatch(n, scores.size());
    for (double l : log_ratios)
      if (!std::isfinite(l)) throw DomainError("weighted sample: non-finite log ratio");
  }

  /// Re-derives indicators as score >= threshold.
  void set_threshold(double threshold) {
    if (scores.size() != size()) throw DomainError("weighted sample: no scores to threshold");
    for (std::size_t i = 0; i < size(); ++i) indicators[i] = scores[i] >= threshold ? 1 : 0;
  }

  std::size_t hits() const {
    std::size_t h = 0;
    for (auto b : indicators) h += b;
    return h;
  }
};

/// Draws n points from `law`, scores them with `score` and sets indicators to
/// score >= threshold.
template <class Score>
WeightedSample draw_weighted(const GaussianLaw& law, std::size_t n, RngStream& rng, Score&& score,
                             double threshold = 0.0) {
  WeightedSample s;
  s.points = sample(law, n, rng);
  s.log_ratios.resize(n);
  s.indicators.resize(n);
  s.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = s.points.row(i);
    s.log_ratios[i] = log_likelihood_ratio(law, x);
    s.scores[i] = score(x);
    s.indicators[i] = s.scores[i] >= threshold ? 1 : 0;
  }
  return s;
}

/// v^T Sigma_hat v for the weighted covariance with weights l_i xi_i / p_hat,
/// without forming Sigma_hat: (1/n) sum w_i <v, x_i>^2 - <v, mean>^2.
inline double rayleigh_from_sample(const WeightedSample& sample, std::span<const double> mean,
                                   std::span<const double> v, double p_hat) {
  if (sample.size() == 0) throw DegenerateSample("rayleigh_from_sample: empty sample");
  if (std::abs(norm(v) - 1.0) > 1e-8) throw DomainError("rayleigh_from_sample: v must be a unit vector");
  if (!(p_hat > 0.0)) throw DomainError("rayleigh_from_sample: p_hat must be positive");
  if (mean.size() != sample.dim()) throw DimensionMismatch(sample.dim(), mean.size());
  const double log_p = std::log(p_hat);
  Vector terms;
  terms.reserve(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (!sample.indicators[i]) continue;
    const double c = dot(sample.points.row(i), v);
    terms.push_back(std::exp(sample.log_ratios[i] - log_p) * c * c);
  }
  const double m = dot(mean, v);
  return pairwise_sum(terms) / static_cast<double>(sample.size()) - m * m;
}

}  // namespace cespectra
