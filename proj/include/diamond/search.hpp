// Consumer side: reservation values, the optimal sequential search plan with
// recall, and an exhaustive backward-induction oracle for small instances.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "diamond/dist.hpp"
#include "diamond/parallel.hpp"
#include "diamond/random.hpp"

namespace diamond {

enum class Regime { hidden, posted };

struct ReservationProblem {
  ValueDistribution dist;
  double price = 0.0;
  double cost = 0.0;
};

namespace detail {

/// Solves E[(X - t)^+] = cost exactly on a piece (a, b) with no knot inside.
inline double solve_excess_on_piece(const ValueDistribution& f, double a, double b, double cost) {
  const double mid = 0.5 * (a + b);
  double k = 0.0;   // sum of m * x over mass entirely above the piece
  double m = 0.0;   // mass entirely above the piece
  double a2 = 0.0;  // E(t) = a2 t^2 - b1 t + a0 on the piece
  double b1 = 0.0;
  double a0 = 0.0;
  for (const auto& at : f.atoms()) {
    if (at.x > mid) {
      k += at.mass * at.x;
      m += at.mass;
    }
  }
  for (const auto& s : f.segments()) {
    if (s.lo >= b || (s.lo > mid)) {
      k += s.mass * 0.5 * (s.lo + s.hi);
      m += s.mass;
    } else if (s.lo < mid && s.hi > mid) {
      const double d = s.density();
      a2 += 0.5 * d;
      b1 += d * s.hi;
      a0 += 0.5 * d * s.hi * s.hi;
    }
  }
  b1 += m;
  a0 += k;
  const double c = a0 - cost;
  if (a2 == 0.0) return c / b1;
  const double disc = std::max(b1 * b1 - 4.0 * a2 * c, 0.0);
  return 2.0 * c / (b1 + std::sqrt(disc));
}

}  // namespace detail

/// Reservation value z solving cost = E[(X - price - z)^+].
///
/// The left arm of the excess function has slope -1, so expanding the bracket
/// downward always terminates. Bisection narrows the bracket until it holds no
/// breakpoint of `dist`; the root is then read off the quadratic on that piece.
inline double reservation_value(const ValueDistribution& dist, double price, double cost,
                                double tol = 1e-10) {
  if (!(cost > 0.0)) throw std::invalid_argument("reservation_value: cost must be positive");
  auto residual = [&](double t) { return dist.expected_excess(t) - cost; };

  double hi = dist.max_point();  // residual(hi) = -cost < 0
  double step = 1.0;
  double lo = hi - step;
  while (residual(lo) < 0.0) {
    step *= 2.0;
    lo = hi - step;
  }

  const auto knots = dist.breakpoints();
  auto knot_inside = [&](double a, double b) {
    auto it = std::upper_bound(knots.begin(), knots.end(), a);
    return it != knots.end() && *it < b;
  };
  for (int iter = 0; iter < 200 && knot_inside(lo, hi); ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (residual(mid) >= 0.0 ? lo : hi) = mid;
  }

  double t = std::clamp(detail::solve_excess_on_piece(dist, lo, hi, cost), lo, hi);
  if (std::abs(residual(t)) > tol) {
    // Degenerate piece geometry; finish by plain bisection on the residual.
    for (int iter = 0; iter < 200 && std::abs(residual(t)) > tol; ++iter) {
      t = 0.5 * (lo + hi);
      (residual(t) >= 0.0 ? lo : hi) = t;
    }
  }
  return t - price;
}

inline double reservation_value(const ReservationProblem& p, double tol = 1e-10) {
  return reservation_value(p.dist, p.price, p.cost, tol);
}

/// E[max(X - price, outside)] under the consumer's conjectured law.
inline double first_visit_value(const ValueDistribution& dist, double price, double outside = 0.0) {
  return outside + dist.expected_excess(price + outside);
}

struct ConsumerPolicy {
  std::vector<double> reservation;  // z_i per firm
  Regime regime = Regime::hidden;
  double outside_option = 0.0;
  bool first_visit_free = true;
  /// E[max(surplus_i, outside)] per firm; selects the free visit when every
  /// z_i is below the outside option. May be left empty.
  std::vector<double> first_visit_value;
};

/// A known offer: the consumer's conjectured law at a firm together with its price.
struct FirmOffer {
  double price;
  ValueDistribution dist;
};

inline ConsumerPolicy make_policy(std::span<const FirmOffer> offers, double cost, Regime regime) {
  ConsumerPolicy p;
  p.regime = regime;
  for (const auto& o : offers) {
    p.reservation.push_back(reservation_value(o.dist, o.price, cost));
    p.first_visit_value.push_back(first_visit_value(o.dist, o.price));
  }
  return p;
}

/// Visit order plus stopping rule. Stop before visiting position k when the
/// best recalled option is at least the next firm's reservation value.
struct SearchPlan {
  std::vector<std::size_t> order;
  std::vector<double> reservation;
  double outside_option = 0.0;

  bool should_continue(std::size_t next_position, double best_surplus) const {
    if (next_position >= order.size()) return false;
    return std::max(best_surplus, outside_option) < reservation[order[next_position]];
  }
};

/// Descending reservation values (random order under symmetry), ties broken
/// uniformly. The free first visit goes to the top index unless every index is
/// below the outside option, in which case only one firm is worth seeing and the
/// consumer picks the best conjectured first-visit value.
inline SearchPlan plan_search(const ConsumerPolicy& policy, CounterStream& rng) {
  const std::size_t n = policy.reservation.size();
  if (n == 0) throw std::invalid_argument("plan_search: no firms");
  SearchPlan plan;
  plan.reservation = policy.reservation;
  plan.outside_option = policy.outside_option;

  std::vector<std::pair<double, std::uint64_t>> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = {policy.reservation[i], rng()};
  plan.order.resize(n);
  std::iota(plan.order.begin(), plan.order.end(), std::size_t{0});
  std::sort(plan.order.begin(), plan.order.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a].first != keys[b].first) return keys[a].first > keys[b].first;
    return keys[a].second < keys[b].second;
  });

  const double top = policy.reservation[plan.order.front()];
  if (top < policy.outside_option && policy.first_visit_value.size() == n) {
    std::size_t best = plan.order.front();
    std::uint64_t best_key = keys[best].second;
    for (std::size_t i : plan.order) {
      const double v = policy.first_visit_value[i];
      if (v > policy.first_visit_value[best] ||
          (v == policy.first_visit_value[best] && keys[i].second < best_key)) {
        best = i;
        best_key = keys[i].second;
      }
    }
    std::rotate(plan.order.begin(),
                std::find(plan.order.begin(), plan.order.end(), best),
                std::find(plan.order.begin(), plan.order.end(), best) + 1);
  }
  return plan;
}

struct SearchResult {
  std::size_t visits = 0;
  std::optional<std::size_t> purchase;  // firm index
  double utility = 0.0;                 // surplus of purchase (or outside option) minus paid costs
  double value = 0.0;                   // purchased surplus, 0 without purchase
};

/// Executes `plan` against realized surpluses x_i - p_i. Search is with recall;
/// indifferent consumers stop and buy; equal best surpluses are split uniformly.
inline SearchResult run_search(const SearchPlan& plan, std::span<const double> surplus, double cost,
                               CounterStream& rng) {
  SearchResult r;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_firm = 0;
  std::size_t ties = 0;
  for (std::size_t pos = 0; pos < plan.order.size(); ++pos) {
    if (pos > 0 && !plan.should_continue(pos, best)) break;
    const std::size_t i = plan.order[pos];
    ++r.visits;
    const double s = surplus[i];
    if (s > best) {
      best = s;
      best_firm = i;
      ties = 1;
    } else if (s == best) {
      ++ties;
      if (rng.below(ties) == 0) best_firm = i;
    }
  }
  const double paid = cost * static_cast<double>(r.visits - 1);
  if (best >= plan.outside_option) {
    r.purchase = best_firm;
    r.value = best;
    r.utility = best - paid;
  } else {
    r.utility = plan.outside_option - paid;
  }
  return r;
}

/// Exact expected utility of the optimal plan for fully known atom-only offers,
/// by backward induction over (visited set, best recalled surplus).
inline double brute_force_policy_value(std::span<const FirmOffer> offers, double cost,
                                       double outside = 0.0) {
  const std::size_t n = offers.size();
  if (n == 0 || n > 3) throw std::invalid_argument("brute_force_policy_value: need 1 to 3 firms");
  for (const auto& o : offers) {
    if (!o.dist.is_atomic())
      throw std::invalid_argument("brute_force_policy_value: distributions must be atom-only");
    if (o.dist.atoms().size() > 6)
      throw std::invalid_argument("brute_force_policy_value: at most 6 atoms per firm");
  }

  std::function<double(unsigned, double)> value = [&](unsigned visited, double best) {
    double v = best;  // stop: take the better of best recalled surplus and outside option
    for (std::size_t j = 0; j < n; ++j) {
      if (visited & (1u << j)) continue;
      double cont = -cost;
      for (const auto& a : offers[j].dist.atoms())
        cont += a.mass * value(visited | (1u << j), std::max(best, a.x - offers[j].price));
      v = std::max(v, cont);
    }
    return v;
  };

  double v = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double first = 0.0;
    for (const auto& a : offers[i].dist.atoms())
      first += a.mass * value(1u << i, std::max(outside, a.x - offers[i].price));
    v = std::max(v, first);
  }
  return v;
}

/// Monte Carlo value of plan_search when every firm's law and price are known.
inline Estimate simulate_policy_value(std::span<const FirmOffer> offers, double cost,
                                      std::int64_t trials, std::uint64_t seed,
                                      unsigned threads = 0) {
  const ConsumerPolicy policy = make_policy(offers, cost, Regime::posted);
  std::vector<Sampler> samplers;
  for (const auto& o : offers) samplers.emplace_back(o.dist);
  const Moments m = chunked_reduce(
      trials, threads, Moments{},
      [&](std::int64_t begin, std::int64_t end) {
        Moments acc;
        std::vector<double> surplus(offers.size());
        for (std::int64_t t = begin; t < end; ++t) {
          CounterStream order_rng(seed, static_cast<std::uint64_t>(t), 0);
          for (std::size_t i = 0; i < offers.size(); ++i) {
            CounterStream v(seed, static_cast<std::uint64_t>(t), 1 + i);
            surplus[i] = samplers[i](v.uniform()) - offers[i].price;
          }
          const SearchPlan plan = plan_search(policy, order_rng);
          acc.add(run_search(plan, surplus, cost, order_rng).utility);
        }
        return acc;
      },
      [](Moments& a, const Moments& b) { a.merge(b); });
  return m.estimate();
}

}  // namespace diamond
