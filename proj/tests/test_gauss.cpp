#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cespectra/errors.hpp"
#include "cespectra/gauss.hpp"
#include "cespectra/numerics.hpp"
#include "cespectra/rng.hpp"
#include "oracles.hpp"

using namespace cespectra;

TEST(Sample, ReproducibleOnRerun) {
  const GaussianLaw law = GaussianLaw::standard(3);
  RngStream a(1234, {7}), b(1234, {7});
  const DenseMatrix x = sample(law, 2, a), y = sample(law, 2, b);
  EXPECT_EQ(x.data(), y.data());
  EXPECT_EQ(x.rows(), 2u);
  EXPECT_EQ(x.cols(), 3u);
}

TEST(Sample, SpikedMomentsMatchCovariance) {
  const SpikedCovariance cov(4, {0.25, 3.0}, {unit_vector(4, 0), unit_vector(4, 2)});
  const GaussianLaw law = GaussianLaw::spiked({1.0, 0.0, -1.0, 0.0}, cov);
  RngStream rng(99);
  const std::size_t n = 200000;
  const DenseMatrix x = sample(law, n, rng);
  for (std::size_t a = 0; a < 4; ++a) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x(i, a);
    m /= n;
    for (std::size_t i = 0; i < n; ++i) v += (x(i, a) - m) * (x(i, a) - m);
    v /= n;
    const double var = cov.dense()(a, a);
    EXPECT_NEAR(m, law.mean()[a], 4.0 * std::sqrt(var / n));
    EXPECT_NEAR(v, var, 4.0 * var * std::sqrt(2.0 / n));
  }
}

TEST(LogDensity, Examples) {
  const Vector zero{0.0, 0.0};
  EXPECT_NEAR(log_density(GaussianLaw::standard(2), zero), -std::log(2 * std::numbers::pi), 1e-14);
  const GaussianLaw spiked = GaussianLaw::spiked(zero, SpikedCovariance::rank_one(2, 0.25, unit_vector(2, 1)));
  EXPECT_NEAR(log_density(spiked, zero), -std::log(2 * std::numbers::pi) - 0.5 * std::log(0.25), 1e-14);
}

TEST(LogDensity, DenseMatchesSpikedAtRandomPoints) {
  const SpikedCovariance cov(6, {0.3, 2.5}, {unit_vector(6, 1), unit_vector(6, 4)});
  const Vector mu{0.1, -0.2, 0.3, 0.0, 1.0, -1.0};
  const GaussianLaw a = GaussianLaw::spiked(mu, cov), b = GaussianLaw::dense(mu, cov.dense());
  RngStream rng(5);
  for (int i = 0; i < 100; ++i) {
    Vector x(6);
    for (auto& xi : x) xi = 2.0 * rng.normal();
    EXPECT_NEAR(log_density(a, x), log_density(b, x), 1e-10);
  }
}

TEST(LikelihoodRatio, Examples) {
  const SpikedCovariance cov = SpikedCovariance::rank_one(3, 0.25, unit_vector(3, 0));
  EXPECT_NEAR(likelihood_ratio(cov, Vector{0, 0, 0}), 0.5, 1e-15);
  // Orthogonal to the spike: |Sigma|^{1/2} regardless of the norm.
  EXPECT_NEAR(likelihood_ratio(cov, Vector{0, 7, -3}), 0.5, 1e-15);
}

TEST(LikelihoodRatio, MatchesLogRatioOfLaw) {
  const SpikedCovariance cov = SpikedCovariance::rank_one(3, 0.6, unit_vector(3, 1));
  const GaussianLaw law = GaussianLaw::spiked(Vector(3, 0.0), cov);
  const Vector x{0.3, -1.2, 2.0};
  EXPECT_NEAR(std::log(likelihood_ratio(cov, x)), log_likelihood_ratio(law, x), 1e-13);
}

TEST(LikelihoodRatio, UnitMeanUnderSamplingLaw) {
  // E_g[l] = 1; lambda = 0.6 >= 0.5 keeps the variance finite.
  const SpikedCovariance cov(5, {0.6}, {unit_vector(5, 3)});
  const GaussianLaw law = GaussianLaw::spiked(Vector(5, 0.0), cov);
  RngStream rng(314);
  const std::size_t n = 1000000;
  double s = 0.0, s2 = 0.0;
  for (std::size_t done = 0; done < n; done += 10000) {
    const DenseMatrix x = sample(law, 10000, rng);
    for (std::size_t i = 0; i < 10000; ++i) {
      const double l = likelihood_ratio(cov, x.row(i));
      s += l;
      s2 += l * l;
    }
  }
  const double mean = s / n, sd = std::sqrt(s2 / n - mean * mean);
  EXPECT_NEAR(mean, 1.0, 3.0 * sd / std::sqrt(double(n)));
}

TEST(ProjR, Examples) {
  const SpikedCovariance id = proj_r(SymMatrix::identity(3), {unit_vector(3, 1)});
  ASSERT_EQ(id.rank(), 1u);
  EXPECT_NEAR(id.lambdas()[0], 1.0, 1e-15);

  const Vector diag{0.2, 1.0, 1.0};
  const SpikedCovariance s = proj_r(SymMatrix::diagonal(diag), {unit_vector(3, 0)});
  EXPECT_NEAR(s.lambdas()[0], 0.2, 1e-15);
  EXPECT_NEAR(s.directions()[0][0], 1.0, 1e-15);
}

TEST(ProjR, EigenvectorOfMinimumGivesMinimum) {
  const SymMatrix m = SymMatrix::from_rows({{2.0, 0.3, 0.1}, {0.3, 0.5, -0.2}, {0.1, -0.2, 1.4}});
  const auto e = sym_eigen_extremes(m);
  const SpikedCovariance s = proj_r(m, {e.v_min});
  EXPECT_NEAR(s.lambdas()[0], e.lambda_min, 1e-8);
}

TEST(ProjR, Errors) {
  EXPECT_THROW(proj_r(SymMatrix::identity(2), {Vector{1.0, 1.0}}), DomainError);
  SymMatrix z(2, 0.0);
  EXPECT_THROW(proj_r(z, {unit_vector(2, 0)}), CollapsedProjection);
  std::size_t floored = 0;
  const Vector diag{0.0, 1.0};
  const SpikedCovariance s = proj_r(SymMatrix::diagonal(diag), {unit_vector(2, 0), unit_vector(2, 1)}, &floored);
  EXPECT_EQ(floored, 1u);
  EXPECT_EQ(s.lambda_min(), kProjectionFloor);
}

TEST(RayleighFromSample, EqualWeightsGiveEmpiricalVariance) {
  WeightedSample s;
  s.points = DenseMatrix(4, 2);
  const double xs[] = {1.0, 2.0, 4.0, 7.0};
  for (std::size_t i = 0; i < 4; ++i) s.points(i, 0) = xs[i];
  s.log_ratios.assign(4, 0.0);
  s.indicators.assign(4, 1);
  const Vector mean{3.5, 0.0};
  EXPECT_NEAR(rayleigh_from_sample(s, mean, unit_vector(2, 0), 1.0), (6.25 + 2.25 + 0.25 + 12.25) / 4, 1e-14);
}

TEST(RayleighFromSample, PointMassHasZeroVariance) {
  WeightedSample s;
  s.points = DenseMatrix(3, 2);
  s.points(0, 0) = 2.0;
  s.points(0, 1) = -1.0;
  s.log_ratios = {std::log(3.0), 0.0, 0.0};
  s.indicators = {1, 0, 0};
  EXPECT_NEAR(rayleigh_from_sample(s, Vector{2.0, -1.0}, Vector{0.6, 0.8}, 1.0), 0.0, 1e-14);
}

TEST(SpikedCovariance, Validation) {
  EXPECT_THROW(SpikedCovariance(2, {0.5, 2.0}, {unit_vector(2, 0), unit_vector(2, 0)}), DomainError);
  EXPECT_THROW(SpikedCovariance::rank_one(2, -1.0, unit_vector(2, 0)), DomainError);
  EXPECT_THROW(SpikedCovariance::rank_one(2, 0.5, unit_vector(3, 0)), DimensionMismatch);
}

TEST(SpikedCovariance, DenseAgreesWithOracleInverse) {
  const SpikedCovariance cov(4, {0.2, 5.0}, {Vector{0.6, 0.8, 0, 0}, Vector{0, 0, 0.8, -0.6}});
  const SymMatrix d = cov.dense();
  auto [inv, logdet] = oracle::inverse_logdet(oracle::to_matrix(4, [&](std::size_t i, std::size_t j) { return d(i, j); }));
  EXPECT_NEAR(cov.log_det(), static_cast<double>(logdet), 1e-13);
  const Vector y{0.3, -1.0, 2.0, 0.5};
  oracle::Real q = 0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) q += y[i] * inv[i][j] * y[j];
  EXPECT_NEAR(cov.inverse_quadratic(y), static_cast<double>(q), 1e-12);
}
