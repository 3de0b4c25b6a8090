#include <gtest/gtest.h>

#include <cmath>

#include "cespectra/cli/pool.hpp"
#include "cespectra/errors.hpp"
#include "cespectra/phase_lab.hpp"

using namespace cespectra;

TEST(BuildAlignment, MonteCarloCaseIsIdentity) {
  auto [target, g] = build_alignment(PhaseTarget::slab, Alignment::v_in_u, 1.0, 5, 1.0);
  EXPECT_EQ(g.lambda_min(), 1.0);
  EXPECT_EQ(g.lambda_max(), 1.0);
  EXPECT_EQ(target.name, "slab");
}

TEST(BuildAlignment, OrthogonalSpike) {
  auto [target, g] = build_alignment(PhaseTarget::halfspace, Alignment::v_in_u_perp, 0.5, 4, 0.0);
  EXPECT_EQ(dot(g.directions()[0], target.analytic->intrinsic_directions[0]), 0.0);
  EXPECT_THROW(build_alignment(PhaseTarget::halfspace, Alignment::v_in_u, 1.5, 4, 0.0), DomainError);
  EXPECT_THROW(build_alignment(PhaseTarget::halfspace, Alignment::v_in_u, 0.5, 1, 0.0), DomainError);
}

TEST(BuildAlignment, SlabHitRateMatchesAnalyticQ) {
  for (Alignment a : {Alignment::v_in_u, Alignment::v_in_u_perp}) {
    auto [target, g] = build_alignment(PhaseTarget::slab, a, 0.5, 3, 1.0);
    const double q = target.analytic->q_of(g);
    if (a == Alignment::v_in_u_perp) {
      EXPECT_NEAR(q, target.analytic->p, 1e-15);
    }
    RngStream rng(41);
    const std::size_t n = 100000;
    const auto s = draw_weighted(GaussianLaw::spiked(Vector(3, 0.0), g), n, rng, target);
    const double hat = static_cast<double>(s.hits()) / n;
    EXPECT_NEAR(hat, q, 3.0 * std::sqrt(q * (1 - q) / n)) << to_string(a);
  }
}

TEST(SampleSize, RoundingRule) {
  EXPECT_EQ(sample_size_for(20, 2.0), 400u);
  EXPECT_EQ(sample_size_for(20, 2.5), static_cast<std::size_t>(std::ceil(std::pow(20.0, 2.5))));
  EXPECT_EQ(sample_size_for(80, 1.2), 193u);
  EXPECT_EQ(sample_size_for(10, 3.0), 1000u);
  EXPECT_THROW(sample_size_for(10, 0.0), DomainError);
}

TEST(SweepConfig, Validation) {
  SweepConfig c;
  EXPECT_NO_THROW(c.validate());
  c.dims.clear();
  EXPECT_THROW(c.validate(), DomainError);
  c = SweepConfig{};
  c.dims = {40, 20};
  EXPECT_THROW(c.validate(), DomainError);
  c = SweepConfig{};
  c.reps = 5;
  EXPECT_THROW(c.validate(), DomainError);
  c = SweepConfig{};
  c.alpha = 1.0;  // halfspace
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(PhaseSweep, CellsOrderedAndIndependentOfScheduling) {
  SweepConfig c;
  c.kappa = 1.3;
  c.dims = {5, 8};
  c.reps = 10;
  const RngStream root(55);
  const SweepResult a = phase_sweep(c, root);
  const SweepResult b = phase_sweep(c, root, cli::pool_runner(4));
  ASSERT_EQ(a.cells.size(), 20u);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(a.cells[i].d, c.dims[i / 10]);
    EXPECT_EQ(a.cells[i].rep, i % 10);
    EXPECT_EQ(a.cells[i].n_used, sample_size_for(a.cells[i].d, 1.3));
    EXPECT_EQ(a.cells[i].op_error, b.cells[i].op_error);
    EXPECT_EQ(a.cells[i].max_weight, b.cells[i].max_weight);
  }
}

TEST(PhaseSweep, MonteCarloMaxWeightIsDOverN) {
  SweepConfig c;
  c.lambda1 = 1.0;
  c.kappa = 1.5;
  c.dims = {10};
  c.reps = 10;
  const SweepResult r = phase_sweep(c, RngStream(8));
  for (const auto& cell : r.cells) EXPECT_EQ(cell.max_weight, 10.0 / static_cast<double>(cell.n_used));
}

TEST(Ols, ExactLine) {
  const Vector x{1, 2, 3, 4}, y{3, 5, 7, 9};
  const auto [b, a] = ols(x, y);
  EXPECT_NEAR(b, 2.0, 1e-14);
  EXPECT_NEAR(a, 1.0, 1e-14);
  EXPECT_THROW(ols(Vector{1, 1}, Vector{1, 2}), DomainError);
}

TEST(GammaStar, LightTailSlopeIsZero) {
  // g = f on a fixed slab: every weight is 1, so the maximum is exactly 1.
  const LimitState target = slab_set(unit_vector(4, 0), 1.0);
  const GammaFit fit = estimate_gamma_star(target, SpikedCovariance(4), {100, 1000, 3000, 10000}, 10, RngStream(9));
  EXPECT_NEAR(fit.slope, 0.0, 1e-12);
  EXPECT_NEAR(fit.band_lo, 0.0, 1e-12);
  EXPECT_NEAR(fit.band_hi, 0.0, 1e-12);
  EXPECT_EQ(fit.samples.size(), 40u);
}

TEST(GammaStar, GridValidation) {
  const LimitState target = slab_set(unit_vector(2, 0), 1.0);
  const SpikedCovariance g(2);
  EXPECT_THROW(estimate_gamma_star(target, g, {10, 100, 1000}, 5, RngStream(1)), DomainError);
  EXPECT_THROW(estimate_gamma_star(target, g, {10, 20, 30, 40}, 5, RngStream(1)), DomainError);
  EXPECT_THROW(estimate_gamma_star(target, g, {10, 100, 50, 1000}, 5, RngStream(1)), DomainError);
}

TEST(GammaStar, RareEventsDropGridPoints) {
  // A half-space cut at 6 is almost never reached with n <= 1000 under f.
  const LimitState target = halfspace_set(unit_vector(2, 0), 6.0);
  const SpikedCovariance g = SpikedCovariance::rank_one(2, 0.5, unit_vector(2, 1));
  EXPECT_THROW(estimate_gamma_star(target, g, {10, 30, 100, 1000}, 5, RngStream(2)), DegenerateSample);
}

TEST(GammaStar, PredictedExponents) {
  EXPECT_EQ(predicted_gamma_star(PhaseTarget::slab, Alignment::v_in_u, 0.5, 1.0), 0.5);
  EXPECT_EQ(predicted_gamma_star(PhaseTarget::halfspace, Alignment::v_in_u_perp, 0.5, std::nullopt), 0.5);
  EXPECT_EQ(predicted_gamma_star(PhaseTarget::slab, Alignment::v_in_u, 1.0, std::nullopt), 0.0);
}

TEST(Median, EvenAndOdd) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
}
