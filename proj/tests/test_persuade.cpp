#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "diamond/persuade.hpp"

using namespace diamond;

namespace {

PayoffCurve tabulate(const std::vector<double>& grid, double (*f)(double)) {
  PayoffCurve c;
  c.grid = grid;
  for (double x : grid) c.values.push_back(f(x));
  return c;
}

// Best two-point split of the prior mean by exhaustive pair search.
double pair_oracle(const PayoffCurve& c, double mu) {
  double best = -1e300;
  for (std::size_t i = 0; i < c.grid.size(); ++i) {
    if (c.grid[i] > mu) break;
    for (std::size_t j = c.grid.size(); j-- > 0;) {
      if (c.grid[j] < mu) break;
      const double a = c.grid[i], b = c.grid[j];
      const double v = b == a ? c.values[i] : ((b - mu) * c.values[i] + (mu - a) * c.values[j]) / (b - a);
      best = std::max(best, v);
    }
  }
  return best;
}

}  // namespace

TEST(Grid, UniformGridHitsExtras) {
  const auto g = uniform_grid(0.25, {0.1, 0.5, 2.0});
  EXPECT_EQ(g, (std::vector<double>{0.0, 0.1, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_THROW(uniform_grid(0.0), std::invalid_argument);
}

TEST(Envelope, ConcaveCurveIsItsOwnEnvelope) {
  const auto c = tabulate(uniform_grid(0.01), [](double x) { return x * (1 - x); });
  const auto e = concave_envelope(c);
  for (std::size_t i = 0; i < c.grid.size(); ++i) EXPECT_NEAR(e.curve.values[i], c.values[i], 1e-15);
}

TEST(Envelope, ConvexCurveBecomesChord) {
  const auto c = tabulate(uniform_grid(0.01), [](double x) { return x * x; });
  const auto e = concave_envelope(c);
  EXPECT_EQ(e.vertices, (std::vector<std::size_t>{0, c.grid.size() - 1}));
  for (std::size_t i = 0; i < c.grid.size(); ++i) EXPECT_NEAR(e.curve.values[i], c.grid[i], 1e-15);
  EXPECT_NEAR(e(0.375), 0.375, 1e-15);
}

TEST(Envelope, MajorizesAndTouchesAtVertices) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PayoffCurve c;
  c.grid = uniform_grid(0.02);
  for (std::size_t i = 0; i < c.grid.size(); ++i) c.values.push_back(u(rng));
  const auto e = concave_envelope(c);
  for (std::size_t i = 0; i < c.grid.size(); ++i) EXPECT_GE(e.curve.values[i], c.values[i] - 1e-15);
  for (std::size_t v : e.vertices) EXPECT_EQ(e.curve.values[v], c.values[v]);
  // Concavity: slopes between consecutive vertices decrease.
  for (std::size_t k = 2; k < e.vertices.size(); ++k) {
    const auto a = e.vertices[k - 2], b = e.vertices[k - 1], d = e.vertices[k];
    const double s1 = (c.values[b] - c.values[a]) / (c.grid[b] - c.grid[a]);
    const double s2 = (c.values[d] - c.values[b]) / (c.grid[d] - c.grid[b]);
    EXPECT_GT(s1, s2);
  }
  for (double mu : {0.1, 0.33, 0.5, 0.77}) EXPECT_NEAR(e(mu), pair_oracle(c, mu), 1e-12);
}

TEST(Envelope, RejectsBadCurves) {
  PayoffCurve c;
  c.grid = {0.0, 0.5, 0.4};
  c.values = {0, 0, 0};
  EXPECT_THROW(concave_envelope(c), std::invalid_argument);
}

TEST(Splitting, BayesPlausible) {
  const auto c = tabulate(uniform_grid(0.01), [](double x) { return x > 0.6 ? 1.0 : 0.0; });
  const auto s = optimal_splitting(c, 0.3);
  ASSERT_EQ(s.posteriors.size(), 2u);
  EXPECT_NEAR(s.mean(), 0.3, 1e-12);
  EXPECT_NEAR(s.posteriors[0].location, 0.0, 1e-15);
  EXPECT_NEAR(s.posteriors[1].location, 0.61, 1e-12);
  EXPECT_NEAR(s.value, 0.3 / 0.61, 1e-12);
  EXPECT_TRUE(is_mpc(degenerate(0.3), s.distribution()));
}

TEST(Splitting, AtAVertexIsDegenerate) {
  const auto c = tabulate(uniform_grid(0.01), [](double x) { return x * (1 - x); });
  const auto s = optimal_splitting(c, 0.5);
  ASSERT_EQ(s.posteriors.size(), 1u);
  EXPECT_EQ(s.posteriors[0].weight, 1.0);
}

TEST(Example2, PayoffAtCheckpoints) {
  EXPECT_EQ(example2_payoff(0.0), 0.0);
  EXPECT_DOUBLE_EQ(example2_payoff(7.0 / 16.0), 7.0 / 32.0);
  EXPECT_DOUBLE_EQ(example2_payoff(0.6), 7.0 / (21.0 - 9.6) * 7.0 / 16.0);
  EXPECT_DOUBLE_EQ(example2_payoff(7.0 / 8.0), 7.0 / 16.0);
  EXPECT_DOUBLE_EQ(example2_payoff(1.0), 7.0 / 16.0);
  EXPECT_EQ(example2_payoff(0.43), 0.0);
}

TEST(Example2, EnvelopeAndSplitting) {
  const auto curve = example2_curve();
  const auto env = concave_envelope(curve);
  EXPECT_GE(env(0.5), 0.25 - 2e-3);
  EXPECT_NEAR(env(0.5), pair_oracle(example2_curve(1e-3), 0.5), 2e-3);
  const auto s = optimal_splitting(env, 0.5);
  ASSERT_EQ(s.posteriors.size(), 2u);
  EXPECT_NEAR(s.posteriors[0].location, 0.0, 1e-3);
  EXPECT_NEAR(s.posteriors[1].location, 7.0 / 8.0, 1e-3);
  EXPECT_NEAR(s.posteriors[0].weight, 3.0 / 7.0, 1e-3);
  EXPECT_NEAR(s.posteriors[1].weight, 4.0 / 7.0, 1e-3);
  // Full disclosure splits 1/2 into {0, 1}.
  EXPECT_EQ(0.5 * example2_payoff(0.0) + 0.5 * example2_payoff(1.0), 7.0 / 32.0);
}

TEST(Example2, StrategyShape) {
  const auto s = example2_strategy(257);
  double w = 0.0;
  for (const auto& c : s.components()) w += c.weight;
  EXPECT_NEAR(w, 1.0, 1e-12);
  const auto p = s.prices();
  EXPECT_DOUBLE_EQ(p.front(), 7.0 / 16.0);
  EXPECT_DOUBLE_EQ(p.back(), 7.0 / 8.0);
  // Reservation at price p under Bernoulli(1/2), c = 1/16, is 7/8 - p.
  for (double q : {7.0 / 16.0, 0.6, 7.0 / 8.0})
    EXPECT_NEAR(reservation_value(ValueDistribution::bernoulli(0.5), q, 1.0 / 16.0), 7.0 / 8.0 - q, 1e-12);
  EXPECT_THROW(example2_strategy(1), std::invalid_argument);
}

TEST(Example2, SimulatedCurveMatchesFormula) {
  MarketConfig m;
  m.n = 2;
  m.prior = ValueDistribution::bernoulli(0.5);
  m.cost = 1.0 / 16.0;
  m.regime = Regime::posted;
  m.threads = 1;
  const auto phi = example2_strategy();
  const std::vector<double> grid{0.0, 0.3, 7.0 / 16.0, 0.5, 0.6, 0.75, 7.0 / 8.0, 1.0};
  const auto c = estimate_payoff_curve(m, {phi}, phi, 7.0 / 16.0, grid, 20000, 3);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_NEAR(c.values[i], example2_payoff(grid[i]), 3 * c.se[i]) << "x=" << grid[i];
}
