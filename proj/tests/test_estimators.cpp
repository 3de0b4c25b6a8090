#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "cespectra/errors.hpp"
#include "cespectra/estimators.hpp"
#include "cespectra/rng.hpp"
#include "cespectra/targets.hpp"

using namespace cespectra;

namespace {

WeightedSample flat_sample(std::size_t n, std::size_t d, std::uint64_t seed) {
  RngStream rng(seed);
  WeightedSample s = draw_weighted(GaussianLaw::standard(d), n, rng, [](std::span<const double> x) { return x[0]; });
  return s;
}

}  // namespace

TEST(IsProbability, NaiveMonteCarlo) {
  WeightedSample s = flat_sample(10, 2, 1);
  s.indicators.assign(10, 1);
  EXPECT_EQ(is_probability(s), 1.0);
  s.indicators = {1, 0, 0, 1, 0, 0, 0, 1, 0, 0};
  EXPECT_NEAR(is_probability(s), 0.3, 1e-15);
  s.indicators.assign(10, 0);
  EXPECT_EQ(is_probability(s), 0.0);
}

TEST(IsProbability, SlabUnderSpikedLaw) {
  const LimitState slab = slab_set(unit_vector(3, 0), 1.0);
  const GaussianLaw g = GaussianLaw::spiked(Vector(3, 0.0), SpikedCovariance::rank_one(3, 0.5, unit_vector(3, 0)));
  RngStream rng(77);
  const std::size_t n = 100000;
  const WeightedSample s = draw_weighted(g, n, rng, slab);
  double sw = 0.0, sw2 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (s.indicators[i]) {
      const double w = std::exp(s.log_ratios[i]);
      sw += w;
      sw2 += w * w;
    }
  const double p_hat = is_probability(s);
  const double se = std::sqrt((sw2 / n - p_hat * p_hat) / n);
  EXPECT_NEAR(p_hat, 0.68269, 3.0 * se);
}

TEST(IsProbability, UnbiasedOverRepetitions) {
  // t-statistic of 200 independent estimates against the analytic p.
  const LimitState slab = slab_set(unit_vector(2, 0), 1.0);
  const GaussianLaw g = GaussianLaw::spiked(Vector(2, 0.0), SpikedCovariance::rank_one(2, 0.6, unit_vector(2, 0)));
  const RngStream root(2024);
  double s = 0.0, s2 = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    RngStream rng = root.split(r, Purpose::test);
    const double p = is_probability(draw_weighted(g, 500, rng, slab));
    s += p;
    s2 += p * p;
  }
  const double mean = s / reps, sd = std::sqrt((s2 - reps * mean * mean) / (reps - 1));
  const double t = (mean - slab.analytic->p) / (sd / std::sqrt(double(reps)));
  EXPECT_GE(t, -4.0);
  EXPECT_LE(t, 4.0);
}

TEST(WeightedQuantileStep, Examples) {
  const Vector scores{5, 3, 9, 1, 10, 2, 8, 4, 7, 6};
  EXPECT_EQ(weighted_quantile_step(scores, 0.3), 7.0);
  EXPECT_EQ(weighted_quantile_step(scores, 0.999), 1.0);
  EXPECT_EQ(weighted_quantile_step(Vector(7, 2.5), 0.1), 2.5);
  EXPECT_THROW(weighted_quantile_step(Vector{}, 0.1), DegenerateSample);
  EXPECT_THROW(weighted_quantile_step(scores, 1.0), DomainError);
}

TEST(WeightedMeanCov, UnitWeightsGiveSampleMoments) {
  WeightedSample s;
  s.points = DenseMatrix(3, 2);
  const double xs[3][2] = {{1, 0}, {2, 2}, {6, 1}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) s.points(i, j) = xs[i][j];
  s.log_ratios.assign(3, 0.0);
  s.indicators.assign(3, 0);
  s.scores = {-1, -2, -3};
  const auto est = weighted_mean_cov(s, -std::numeric_limits<double>::infinity());
  EXPECT_NEAR(est.mu_hat[0], 3.0, 1e-15);
  EXPECT_NEAR(est.mu_hat[1], 1.0, 1e-15);
  EXPECT_NEAR(est.sigma_hat(0, 0), 14.0 / 3, 1e-14);
  EXPECT_NEAR(est.sigma_hat(1, 1), 2.0 / 3, 1e-14);
  EXPECT_NEAR(est.sigma_hat(0, 1), 1.0 / 3, 1e-14);
  EXPECT_NEAR(est.p_hat, 1.0, 1e-15);
  EXPECT_EQ(est.n_hits, 3u);
}

TEST(WeightedMeanCov, SingleHitIsPointMass) {
  WeightedSample s = flat_sample(20, 3, 9);
  s.scores.assign(20, -1.0);
  s.scores[11] = 1.0;
  const auto est = weighted_mean_cov(s, 0.0);
  for (std::size_t a = 0; a < 3; ++a) {
    EXPECT_NEAR(est.mu_hat[a], s.points(11, a), 1e-13);
    for (std::size_t b = 0; b < 3; ++b) EXPECT_NEAR(est.sigma_hat(a, b), 0.0, 1e-13);
  }
}

TEST(WeightedMeanCov, ZeroHitsIsDegenerate) {
  WeightedSample s = flat_sample(20, 2, 3);
  s.scores.assign(20, -1.0);
  EXPECT_THROW(weighted_mean_cov(s, 0.0), DegenerateSample);
}

TEST(WeightedMeanCov, SurvivesHugeLogWeights) {
  WeightedSample s = flat_sample(50, 2, 4);
  for (auto& l : s.log_ratios) l += 900.0;  // exp overflows without rescaling
  s.scores.assign(50, 1.0);
  const auto est = weighted_mean_cov(s, 0.0);
  for (double v : est.sigma_hat.data()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_TRUE(std::isinf(est.p_hat) || est.p_hat > 1e300);
}

TEST(SigmaAEstimator, AlwaysHitGivesSecondMoment) {
  WeightedSample s = flat_sample(4, 2, 5);
  s.log_ratios.assign(4, 0.0);
  s.indicators.assign(4, 1);
  const Vector zero(2, 0.0);
  const SymMatrix m = sigma_a_estimator(s, 1.0, zero);
  double s00 = 0.0, s01 = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    s00 += s.points(i, 0) * s.points(i, 0) / 4;
    s01 += s.points(i, 0) * s.points(i, 1) / 4;
  }
  EXPECT_NEAR(m(0, 0), s00, 1e-14);
  EXPECT_NEAR(m(1, 0), s01, 1e-14);
}

TEST(SigmaAEstimator, NoHitsGivesMinusMeanOuterProduct) {
  WeightedSample s = flat_sample(4, 2, 6);
  s.indicators.assign(4, 0);
  const Vector mu{0.5, -2.0};
  const SymMatrix m = sigma_a_estimator(s, 0.3, mu);
  EXPECT_DOUBLE_EQ(m(0, 0), -0.25);
  EXPECT_DOUBLE_EQ(m(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(m(1, 1), -4.0);
  EXPECT_THROW(sigma_a_estimator(s, 0.0, mu), DomainError);
}

TEST(IceDelta, Examples) {
  WeightedSample s = flat_sample(25, 1, 8);
  s.log_ratios.assign(25, 0.0);
  s.scores.assign(25, 0.3);
  EXPECT_NEAR(ice_delta(s, 0.7), 1.0, 1e-14);
  // All but one weight vanish: Phi(-1e6) underflows to zero.
  s.scores.assign(25, -1e6);
  s.scores[3] = 1.0;
  EXPECT_NEAR(ice_delta(s, 1.0), 5.0, 1e-12);
  s.scores.assign(25, -std::numeric_limits<double>::infinity());
  EXPECT_TRUE(std::isinf(ice_delta(s, 1.0)));
  EXPECT_THROW(ice_delta(s, 0.0), DomainError);
}

TEST(IceDelta, LargeBandwidthTendsToOne) {
  WeightedSample s = flat_sample(200, 2, 10);
  s.log_ratios.assign(200, 0.0);
  EXPECT_NEAR(ice_delta(s, 1e8), 1.0, 1e-6);
}

TEST(IndicatorCv, LiteralNormalization) {
  WeightedSample s = flat_sample(4, 1, 11);
  s.log_ratios.assign(4, 0.0);
  s.indicators = {1, 1, 0, 0};
  // sqrt(4 * 2) / 2
  EXPECT_NEAR(indicator_cv(s), std::sqrt(2.0), 1e-15);
  s.indicators.assign(4, 0);
  EXPECT_TRUE(std::isinf(indicator_cv(s)));
}

TEST(MaxWeightStatistic, Examples) {
  WeightedSample s = flat_sample(10, 10, 12);
  s.log_ratios.assign(10, 0.0);
  s.indicators.assign(10, 0);
  EXPECT_EQ(max_weight_statistic(s, 10, 10), 0.0);
  s.indicators[4] = 1;
  EXPECT_EQ(max_weight_statistic(s, 10, 10), 1.0);
}
