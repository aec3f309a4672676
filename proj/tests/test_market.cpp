#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "diamond/json_io.hpp"
#include "diamond/market.hpp"
#include "diamond/persuade.hpp"

using namespace diamond;

namespace {

MarketConfig uniform_market(int n, Regime regime) {
  MarketConfig m;
  m.n = n;
  m.prior = ValueDistribution::uniform();
  m.cost = 1.0 / 32.0;
  m.regime = regime;
  m.trials = 40000;
  m.seed = 11;
  m.threads = 1;
  return m;
}

}  // namespace

TEST(Market, ConfigValidation) {
  MarketConfig m;
  m.cost = 0.0;
  EXPECT_THROW(m.validate(), std::invalid_argument);
  m.cost = 0.1;
  m.prior = ValueDistribution::uniform(0.0, 2.0);
  EXPECT_THROW(m.validate(), std::invalid_argument);
}

TEST(Market, MonopolyPricingWithNoInformation) {
  for (int n : {2, 3, 5}) {
    const auto m = uniform_market(n, Regime::hidden);
    const auto s = FirmStrategy::pure(0.5, degenerate(0.5));
    const auto out = simulate_market(m, {s}, s);
    double total = 0.0;
    for (const auto& f : out.firms) {
      EXPECT_EQ(f.profit_per_visit.value, 0.5);
      EXPECT_EQ(f.profit_per_visit.se, 0.0);
      total += f.profit.value;
      EXPECT_NEAR(f.profit.value, 0.5 / n, 3 * f.profit.se);
    }
    EXPECT_DOUBLE_EQ(total, 0.5);
    EXPECT_EQ(out.consumer.surplus.value, 0.0);
    EXPECT_EQ(out.consumer.visits.value, 1.0);
    EXPECT_EQ(out.consumer.visits.se, 0.0);
  }
}

TEST(Market, MarginalCostPricingWhenPricesPosted) {
  const auto m = uniform_market(2, Regime::posted);
  const auto s = FirmStrategy::pure(0.0, degenerate(0.5));
  const auto out = simulate_market(m, {s}, s);
  for (const auto& f : out.firms) EXPECT_EQ(f.profit.value, 0.0);
  EXPECT_EQ(out.consumer.surplus.value, 0.5);
  EXPECT_EQ(out.consumer.visits.value, 1.0);
}

TEST(Market, FullInformationRivalsSplitFirstVisits) {
  const auto m = uniform_market(2, Regime::posted);
  const auto s = FirmStrategy::pure(0.25, ValueDistribution::uniform());
  const auto out = simulate_market(m, {s}, s);
  EXPECT_NEAR(out.firms[0].profit.value, out.firms[1].profit.value,
              3 * std::hypot(out.firms[0].profit.se, out.firms[1].profit.se));
}

TEST(Market, AccountingIdentity) {
  for (Regime r : {Regime::hidden, Regime::posted}) {
    const auto m = uniform_market(3, r);
    const auto s = FirmStrategy({{0.5, 0.2, ValueDistribution::uniform()}, {0.5, 0.4, degenerate(0.5)}});
    const auto out = simulate_market(m, {s}, s);
    double profits = 0.0;
    for (const auto& f : out.firms) profits += f.profit.value;
    EXPECT_NEAR(out.consumer.surplus.value + profits + out.consumer.search_cost_paid,
                out.consumer.value_purchased, 1e-12);
  }
}

TEST(Market, DeterministicForAnyThreadCount) {
  auto m = uniform_market(3, Regime::posted);
  m.trials = 20000;
  const auto s = FirmStrategy({{0.5, 0.2, ValueDistribution::uniform()}, {0.5, 0.4, degenerate(0.5)}});
  std::string first;
  for (unsigned t : {1u, 2u, 3u, 8u}) {
    m.threads = t;
    const auto dump = to_json(simulate_market(m, {s}, s)).dump();
    if (first.empty()) first = dump;
    EXPECT_EQ(dump, first) << "threads=" << t;
  }
}

TEST(Market, SameSeedSameResultNewSeedNewResult) {
  auto m = uniform_market(2, Regime::hidden);
  const auto s = FirmStrategy::pure(0.2, ValueDistribution::uniform());
  const auto a = simulate_market(m, {s}, s);
  const auto b = simulate_market(m, {s}, s);
  EXPECT_EQ(a.firms[0].profit.value, b.firms[0].profit.value);
  m.seed = 12;
  EXPECT_NE(simulate_market(m, {s}, s).firms[0].profit.value, a.firms[0].profit.value);
}

TEST(Market, HiddenOrderIgnoresActualOffers) {
  const auto m = uniform_market(3, Regime::hidden);
  const auto conj = FirmStrategy::pure(0.3, ValueDistribution::uniform());
  const auto a = FirmStrategy::pure(0.1, degenerate(0.5));
  const auto b = FirmStrategy::pure(0.6, ValueDistribution::bernoulli(0.5));
  for (std::uint64_t t = 0; t < 200; ++t) {
    const auto x = trace_trial(m, {a, b, conj}, conj, t);
    const auto y = trace_trial(m, {b, conj, a}, conj, t);
    EXPECT_EQ(x.plan.order, y.plan.order);
  }
}

TEST(Market, PostedOrderFollowsPrices) {
  const auto m = uniform_market(2, Regime::posted);
  const auto conj = FirmStrategy({{0.5, 0.3, ValueDistribution::uniform()}, {0.5, 0.1, ValueDistribution::uniform()}});
  const auto dear = FirmStrategy::pure(0.3, ValueDistribution::uniform());
  const auto cheap = FirmStrategy::pure(0.1, ValueDistribution::uniform());
  for (std::uint64_t t = 0; t < 50; ++t) {
    const auto x = trace_trial(m, {dear, cheap}, conj, t);
    EXPECT_EQ(x.plan.order.front(), 1u);
  }
}

TEST(Market, StrategyCountMismatchThrows) {
  const auto m = uniform_market(3, Regime::hidden);
  const auto s = FirmStrategy::pure(0.3, ValueDistribution::uniform());
  EXPECT_THROW(simulate_market(m, {s, s}, s), std::invalid_argument);
}

TEST(Market, OffPathBeliefIsNoInformation) {
  const auto m = uniform_market(2, Regime::posted);
  const auto conj = FirmStrategy::pure(0.3, ValueDistribution::uniform());
  const auto b = belief_at_price(m, conj, 0.4);
  EXPECT_FALSE(b.on_path);
  EXPECT_NEAR(b.reservation, 0.5 - 0.4 - m.cost, 1e-12);
  const auto on = belief_at_price(m, conj, 0.3);
  EXPECT_TRUE(on.on_path);
  EXPECT_NEAR(on.reservation, reservation_value(ValueDistribution::uniform(), 0.3, m.cost), 1e-15);
  auto pessimistic = m;
  pessimistic.off_path = OffPathRule::pessimistic;
  EXPECT_NEAR(belief_at_price(pessimistic, conj, 0.4).reservation, b.reservation, 1e-15);
}

TEST(Market, HiddenPayoffMatchesSimulation) {
  struct Case {
    int n;
    FirmStrategy conj;
    FirmStrategy dev;
  };
  const std::vector<Case> cases{
      {2, FirmStrategy::pure(0.25, ValueDistribution::uniform()), FirmStrategy::pure(0.3, ValueDistribution::uniform())},
      {3, FirmStrategy::pure(0.3, ValueDistribution::discrete({{0.2, 0.5}, {0.8, 0.5}})),
       FirmStrategy::pure(0.35, fuse(ValueDistribution::uniform(), {{{0.6, 1.0, 1.0}}}))},
      {4, FirmStrategy({{0.5, 0.1, ValueDistribution::uniform()}, {0.5, 0.2, degenerate(0.5)}}),
       FirmStrategy::pure(0.15, ValueDistribution::uniform())},
  };
  for (const auto& c : cases) {
    auto m = uniform_market(c.n, Regime::hidden);
    m.trials = 100000;
    const HiddenPayoff hp(c.conj, m.cost, m.n, false);
    std::vector<FirmStrategy> firms(static_cast<std::size_t>(c.n), c.conj);
    firms[0] = c.dev;
    const auto out = simulate_market(m, firms, c.conj);
    EXPECT_NEAR(out.firms[0].profit_per_visit.value, hp.per_visit_profit(c.dev), 3 * out.firms[0].profit_per_visit.se);
    EXPECT_NEAR(out.firms[0].visit_probability, hp.visit_probability(),
                3 * std::sqrt(hp.visit_probability() * (1 - hp.visit_probability()) / m.trials));
  }
}

TEST(Market, HiddenPayoffRevenueCases) {
  const auto conj = FirmStrategy::pure(0.25, ValueDistribution::uniform());
  const HiddenPayoff hp(conj, 1.0 / 32.0, 2, false);
  EXPECT_NEAR(hp.reservation(), 0.5, 1e-12);
  EXPECT_EQ(hp.revenue(0.25, 0.2), 0.0);
  EXPECT_EQ(hp.revenue(0.25, 0.8), 0.25);
  // s = 0.25 < z: the consumer buys here only if the rival falls below 0.25,
  // normalized by the visit mass 1 + P(S < z) = 1.75. Rival surplus is U[-0.25, 0.75].
  EXPECT_NEAR(hp.revenue(0.25, 0.5), 0.25 * 2 * 0.5 / 1.75, 1e-12);
}

TEST(Market, InfiniteMarketIsAnalytic) {
  MarketConfig m;
  m.infinite = true;
  m.prior = ValueDistribution::uniform();
  m.cost = 1.0 / 32.0;
  const auto s = FirmStrategy::pure(0.25, ValueDistribution::uniform());
  const auto out = simulate_market(m, {s}, s);
  EXPECT_TRUE(out.analytic);
  EXPECT_DOUBLE_EQ(out.firms[0].profit_per_visit.value, 1.0 / 16.0);
  // P(X >= 0.75) = 1/4 each visit.
  EXPECT_DOUBLE_EQ(out.consumer.visits.value, 4.0);
  EXPECT_DOUBLE_EQ(out.consumer.surplus.value, 0.5 + 1.0 / 32.0);
  EXPECT_DOUBLE_EQ(analytic_first_visit_profit(s, FirmStrategy::pure(0.25, degenerate(0.5)), m.cost), 0.0);
}

TEST(Market, Example2RivalsEarnEqualProfitAtEveryOnPathPrice) {
  MarketConfig m;
  m.n = 2;
  m.prior = ValueDistribution::bernoulli(0.5);
  m.cost = 1.0 / 16.0;
  m.regime = Regime::posted;
  m.trials = 40000;
  m.seed = 5;
  m.threads = 1;
  const auto phi = example2_strategy();
  const Beliefs beliefs(m, phi);
  // Component prices run from 7/8 (index 0) down to 7/16. At exactly 7/8 the
  // reservation value is 0 and an indifferent consumer never visits.
  const auto& comps = phi.components();
  for (std::size_t k : {comps.size() - 1, std::size_t{12288}, std::size_t{8192}, std::size_t{4096}, std::size_t{1}}) {
    const double p = comps[k].price;
    const auto out = simulate_market(m, {FirmStrategy::pure(p, m.prior), phi}, phi, &beliefs);
    EXPECT_NEAR(out.firms[0].profit.value, 7.0 / 32.0, 3 * out.firms[0].profit.se) << "p=" << p;
  }
  const auto top = simulate_market(m, {FirmStrategy::pure(7.0 / 8.0, m.prior), phi}, phi, &beliefs);
  EXPECT_EQ(top.firms[0].profit.value, 0.0);
}

TEST(Market, ComponentVisitsSumToVisitProbability) {
  const auto m = uniform_market(2, Regime::hidden);
  const auto s = FirmStrategy({{0.3, 0.2, ValueDistribution::uniform()}, {0.7, 0.4, degenerate(0.5)}});
  const auto out = simulate_market(m, {s}, s);
  const auto& cv = out.firms[0].component_visit_probability;
  ASSERT_EQ(cv.size(), 2u);
  EXPECT_NEAR(cv[0] + cv[1], out.firms[0].visit_probability, 1e-12);
}
