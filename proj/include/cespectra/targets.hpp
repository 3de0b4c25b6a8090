#pragma once

// Limit states A = {phi >= 0}: the three benchmark functions and the two
// analytic sets (slab, half-space) whose conditional moments are known in
// closed form.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cespectra/errors.hpp"
#include "cespectra/gauss.hpp"
#include "cespectra/numerics.hpp"

namespace cespectra {

/// Closed-form description of f conditioned on A.
struct AnalyticConditional {
  double p = 0.0;
  Vector mu_A;
  SpikedCovariance sigma_A;
  /// P_g(X in A) for a centred g = N(0, Sigma).
  std::function<double(const SpikedCovariance&)> q_of;
  std::vector<Vector> intrinsic_directions;
};

struct LimitState {
  std::size_t dim = 0;
  std::function<double(std::span<const double>)> evaluate;
  std::string name;
  std::optional<double> reference_p;
  std::optional<AnalyticConditional> analytic;

  double operator()(std::span<const double> x) const { return evaluate(x); }
};

namespace detail {
inline void require_dim(std::span<const double> x, std::size_t min_dim, const char* who) {
  if (x.size() < min_dim) throw DomainError(std::string(who) + ": dimension too small");
}
inline void require_unit(std::span<const double> u) {
  if (std::abs(norm(u) - 1.0) > 1e-10) throw DomainError("direction must be a unit vector");
}
}  // namespace detail

/// <x, 1_d> - 5 with 1_d = (1, ..., 1)/sqrt(d).
inline double phi_lin(std::span<const double> x) {
  detail::require_dim(x, 1, "phi_lin");
  double s = 0.0;
  for (double xi : x) s += xi;
  return s / std::sqrt(static_cast<double>(x.size())) - 5.0;
}

inline double phi_quad(std::span<const double> x) {
  detail::require_dim(x, 2, "phi_quad");
  double s = 0.0;
  for (double xi : x) s += xi;
  const double diff = x[0] - x[1];
  return s / std::sqrt(static_cast<double>(x.size())) - 4.0 - 1.25 * diff * diff;
}

/// Portfolio-loss limit state (t-copula with 12 degrees of freedom): counts
/// the obligors j >= 3 whose latent variable
///   (0.25 x(1) + 3 sqrt(1 - 0.25^2) x(j)) / sqrt(G(x(2)))
/// exceeds 0.5 sqrt(d), with G the Gamma(shape 6, rate 6) quantile of F_N.
inline double phi_fin(std::span<const double> x) {
  detail::require_dim(x, 3, "phi_fin");
  const double d = static_cast<double>(x.size());
  const double u = std_normal_cdf(x[1]);
  double mix;
  if (u <= 0.0) {
    mix = 0.0;
  } else if (u >= 1.0) {
    mix = std::numeric_limits<double>::infinity();
  } else {
    mix = gamma_inverse_cdf(u, 6.0, 1.0 / 6.0);
  }
  const double scale = std::sqrt(mix);
  const double threshold = 0.5 * std::sqrt(d);
  const double load = 3.0 * std::sqrt(1.0 - 0.25 * 0.25);
  double count = 0.0;
  for (std::size_t j = 2; j < x.size(); ++j) {
    const double latent = 0.25 * x[0] + load * x[j];
    // latent / scale >= threshold, written without dividing by a zero scale.
    if (latent >= threshold * scale) count += 1.0;
  }
  return count - 0.25 * d - 0.1;
}

inline LimitState make_lin(std::size_t d) {
  if (d < 1) throw DomainError("lin: d must be positive");
  return {d, [](std::span<const double> x) { return phi_lin(x); }, "lin", std_normal_sf(5.0), std::nullopt};
}

/// Table 1 reference probabilities for quad and fin are only defined at d = 334.
inline LimitState make_quad(std::size_t d) {
  if (d < 2) throw DomainError("quad: d must be at least 2");
  std::optional<double> p;
  if (d == 334) p = 6.6e-6;
  return {d, [](std::span<const double> x) { return phi_quad(x); }, "quad", p, std::nullopt};
}

inline LimitState make_fin(std::size_t d) {
  if (d < 3) throw DomainError("fin: d must be at least 3");
  std::optional<double> p;
  if (d == 334) p = 1.8e-6;
  return {d, [](std::span<const double> x) { return phi_fin(x); }, "fin", p, std::nullopt};
}

/// A = {x : |<u, x>| <= K}, scored as K - |<u, x>|.
inline LimitState slab_set(Vector u, double K) {
  detail::require_unit(u);
  if (!(K > 0.0)) throw DomainError("slab_set: K must be positive");
  const std::size_t d = u.size();
  const double p = 2.0 * std_normal_cdf(K) - 1.0;
  // Var(Z | |Z| <= K) for standard normal Z.
  const double var = 1.0 - 2.0 * K * std_normal_pdf(K) / p;

  AnalyticConditional a;
  a.p = p;
  a.mu_A = Vector(d, 0.0);
  a.sigma_A = SpikedCovariance::rank_one(d, var, u);
  a.q_of = [u, K](const SpikedCovariance& g) {
    const double s = std::sqrt(g.variance_along(u));
    return 2.0 * std_normal_cdf(K / s) - 1.0;
  };
  a.intrinsic_directions = {u};

  LimitState ls;
  ls.dim = d;
  ls.name = "slab";
  ls.evaluate = [u, K](std::span<const double> x) { return K - std::abs(dot(u, x)); };
  ls.reference_p = p;
  ls.analytic = std::move(a);
  return ls;
}

/// A = {x : <u, x> >= K}, scored as <u, x> - K.
inline LimitState halfspace_set(Vector u, double K) {
  detail::require_unit(u);
  if (!std::isfinite(K)) throw DomainError("halfspace_set: K must be finite");
  const std::size_t d = u.size();
  const double p = std_normal_sf(K);
  // Inverse Mills ratio phi(K) / (1 - Phi(K)), evaluated in log space.
  const double hazard = std::exp(-0.5 * K * K - 0.5 * std::log(2.0 * std::numbers::pi) - log_std_normal_cdf(-K));
  const double var = 1.0 - hazard * (hazard - K);

  AnalyticConditional a;
  a.p = p;
  a.mu_A = u;
  for (auto& m : a.mu_A) m *= hazard;
  a.sigma_A = SpikedCovariance::rank_one(d, var, u);
  a.q_of = [u, K](const SpikedCovariance& g) { return std_normal_sf(K / std::sqrt(g.variance_along(u))); };
  a.intrinsic_directions = {u};

  LimitState ls;
  ls.dim = d;
  ls.name = "halfspace";
  ls.evaluate = [u, K](std::span<const double> x) { return dot(u, x) - K; };
  ls.reference_p = p;
  ls.analytic = std::move(a);
  return ls;
}

/// Slab half-width K = 1 + sqrt(2 alpha lambda1 log n). alpha = 0 gives K = 1.
inline double prop_range_K(double alpha, double lambda1, double n) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("prop_range_K: alpha must lie in [0,1]");
  if (!(lambda1 > 0.0 && lambda1 < 1.0)) throw DomainError("prop_range_K: lambda1 must lie in (0,1)");
  if (!(n >= 1.0)) throw DomainError("prop_range_K: n must be >= 1");
  return 1.0 + std::sqrt(2.0 * alpha * lambda1 * std::log(n));
}

/// Sample sizes and reference probabilities of the three benchmark problems.
struct BenchmarkPreset {
  const char* target;
  std::size_t d;
  double p;
  std::size_t n;
};

inline constexpr std::size_t kTable1FinalSize = 2000;
inline constexpr std::size_t kTable1Repetitions = 200;

inline std::vector<BenchmarkPreset> table1_presets() {
  return {{"lin", 100, 2.9e-7, 10000}, {"quad", 334, 6.6e-6, 5000}, {"fin", 334, 1.8e-6, 5000}};
}

/// Benchmark limit states by name: "lin", "quad", "fin".
inline LimitState make_benchmark(const std::string& name, std::size_t d) {
  if (name == "lin") return make_lin(d);
  if (name == "quad") return make_quad(d);
  if (name == "fin") return make_fin(d);
  throw DomainError("unknown benchmark target '" + name + "'");
}

}  // namespace cespectra
