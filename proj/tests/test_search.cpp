#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "diamond/search.hpp"
#include "support.hpp"

using namespace diamond;

TEST(Reservation, UniformWithFullInformation) {
  // (1 - z)^2 / 2 = 1/8 at c = 1/8.
  const double z = reservation_value(ValueDistribution::uniform(), 0.0, 0.125);
  EXPECT_EQ(z, 0.5);
  EXPECT_LE(std::abs(ValueDistribution::uniform().expected_excess(z) - 0.125), 1e-10);
}

TEST(Reservation, DegenerateLaw) {
  EXPECT_NEAR(reservation_value(degenerate(0.5), 0.2, 0.1), 0.2, 1e-15);
  EXPECT_NEAR(reservation_value(degenerate(0.5), 0.7, 0.1), -0.3, 1e-15);
}

TEST(Reservation, TwoPointClosedForm) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 500; ++rep) {
    const double q = 0.05 + 0.9 * u(rng);
    const double ps = 0.05 + 0.95 * u(rng);
    const double c = q * ps * (0.001 + 0.998 * u(rng));
    const auto f = ValueDistribution::discrete({{0.0, 1.0 - q}, {ps, q}});
    EXPECT_NEAR(reservation_value(f, ps, c), -c / q, 1e-10) << q << " " << ps << " " << c;
  }
}

TEST(Reservation, ResidualIsTiny) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const auto f = ValueDistribution(0, 1, {{u(rng), 0.3}}, {{0.1, 0.9, 0.7}});
    const double p = 0.5 * u(rng);
    const double c = 0.001 + 0.3 * u(rng);
    const double z = reservation_value(f, p, c);
    EXPECT_LE(std::abs(f.expected_excess(p + z) - c), 1e-10);
  }
}

TEST(Reservation, ShiftsWithPriceAndFallsWithCost) {
  const auto f = ValueDistribution::uniform();
  const double z0 = reservation_value(f, 0.0, 0.05);
  EXPECT_NEAR(reservation_value(f, 0.3, 0.05), z0 - 0.3, 1e-12);
  EXPECT_GT(z0, reservation_value(f, 0.0, 0.06));
}

TEST(Reservation, SpreadRaisesReservation) {
  const double c = 1.0 / 32.0;
  EXPECT_GT(reservation_value(ValueDistribution::uniform(), 0.0, c), reservation_value(degenerate(0.5), 0.0, c));
  EXPECT_GT(reservation_value(ValueDistribution::bernoulli(0.5), 0.0, c),
            reservation_value(ValueDistribution::uniform(), 0.0, c));
}

TEST(Reservation, RejectsNonPositiveCost) {
  EXPECT_THROW(reservation_value(degenerate(0.5), 0.0, 0.0), std::invalid_argument);
}

TEST(FirstVisit, ValueOfFreeVisit) {
  EXPECT_NEAR(first_visit_value(ValueDistribution::uniform(), 0.5), 0.125, 1e-15);
  EXPECT_EQ(first_visit_value(degenerate(0.5), 0.7), 0.0);
}

TEST(Plan, DescendingReservation) {
  ConsumerPolicy p;
  p.reservation = {0.1, 0.3, 0.2};
  CounterStream rng(1, 1);
  const auto plan = plan_search(p, rng);
  EXPECT_EQ(plan.order, (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_TRUE(plan.should_continue(1, 0.15));
  EXPECT_FALSE(plan.should_continue(1, 0.2));  // indifferent consumers stop
  EXPECT_FALSE(plan.should_continue(3, -1.0));
}

TEST(Plan, TiesAreBrokenUniformly) {
  ConsumerPolicy p;
  p.reservation = {0.2, 0.2, 0.2};
  const int n = 30000;
  std::vector<int> first(3, 0);
  for (int t = 0; t < n; ++t) {
    CounterStream rng(5, static_cast<std::uint64_t>(t));
    ++first[plan_search(p, rng).order.front()];
  }
  const double sd = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
  for (int k : first) EXPECT_NEAR(k, n / 3.0, 4 * sd);
}

TEST(Plan, FreeVisitGoesToBestFirstVisitValueWhenAllNegative) {
  ConsumerPolicy p;
  p.reservation = {-0.1, -0.05};
  p.first_visit_value = {0.2, 0.01};
  CounterStream rng(1, 2);
  const auto plan = plan_search(p, rng);
  EXPECT_EQ(plan.order.front(), 0u);
  EXPECT_FALSE(plan.should_continue(1, 0.0));
}

TEST(Run, StopsAndBuysWhenIndifferent) {
  SearchPlan plan;
  plan.order = {0, 1};
  plan.reservation = {0.5, 0.3};
  const std::vector<double> s{0.3, 0.9};
  CounterStream rng(1, 3);
  const auto r = run_search(plan, s, 0.1, rng);
  EXPECT_EQ(r.visits, 1u);
  ASSERT_TRUE(r.purchase.has_value());
  EXPECT_EQ(*r.purchase, 0u);
  EXPECT_DOUBLE_EQ(r.utility, 0.3);
}

TEST(Run, RecallAndCostAccounting) {
  SearchPlan plan;
  plan.order = {0, 1, 2};
  plan.reservation = {0.5, 0.4, 0.35};
  const std::vector<double> s{0.2, 0.1, 0.3};
  CounterStream rng(1, 4);
  const auto r = run_search(plan, s, 0.05, rng);
  EXPECT_EQ(r.visits, 3u);
  EXPECT_EQ(*r.purchase, 2u);
  EXPECT_NEAR(r.utility, 0.3 - 0.1, 1e-15);
}

TEST(Run, OutsideOptionWhenAllNegative) {
  SearchPlan plan;
  plan.order = {0};
  plan.reservation = {-0.1};
  const std::vector<double> s{-0.2};
  CounterStream rng(1, 5);
  const auto r = run_search(plan, s, 0.05, rng);
  EXPECT_FALSE(r.purchase.has_value());
  EXPECT_EQ(r.utility, 0.0);
}

TEST(BruteForce, SingleFirm) {
  const std::vector<FirmOffer> offers{{0.2, ValueDistribution::discrete({{0.0, 0.5}, {1.0, 0.5}})}};
  EXPECT_NEAR(brute_force_policy_value(offers, 0.1), 0.4, 1e-15);
}

TEST(BruteForce, TwoFirmsByHand) {
  // Visit the risky firm first for free: 0.8 w.p. 1/2; otherwise pay 0.1 for a sure 0.5.
  const std::vector<FirmOffer> offers{{0.0, degenerate(0.5)},
                                      {0.0, ValueDistribution::discrete({{0.0, 0.5}, {0.8, 0.5}})}};
  EXPECT_NEAR(brute_force_policy_value(offers, 0.1), 0.5 * 0.8 + 0.5 * 0.4, 1e-15);
}

TEST(BruteForce, IndexPolicyMatchesOnRandomAtomInstances) {
  std::mt19937_64 rng(41);
  int fails = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto inst = fixtures::random_atom_instance(rng);
    const auto& offers = inst.offers;
    const double c = inst.cost;
    const double exact = brute_force_policy_value(offers, c);
    const auto est = simulate_policy_value(offers, c, 20000, 100 + static_cast<std::uint64_t>(rep), 1);
    fails += std::abs(est.value - exact) > 4 * est.se + 1e-12;
  }
  EXPECT_EQ(fails, 0);
}

TEST(Simulate, DeterministicAcrossThreads) {
  const std::vector<FirmOffer> offers{{0.1, ValueDistribution::uniform()}, {0.2, ValueDistribution::bernoulli(0.5)}};
  const auto a = simulate_policy_value(offers, 0.05, 10000, 9, 1);
  const auto b = simulate_policy_value(offers, 0.05, 10000, 9, 4);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.se, b.se);
}
