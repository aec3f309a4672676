// Firm-side information design: payoff-of-posterior curves, their least
// concave majorants, and the optimal (at most two-point) splittings.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "diamond/dist.hpp"
#include "diamond/market.hpp"
#include "diamond/parallel.hpp"
#include "diamond/strategy.hpp"

namespace diamond {

struct PayoffCurve {
  std::vector<double> grid;    // strictly increasing, spans [0, 1]
  std::vector<double> values;  // V(x) at each grid point
  std::vector<double> se;      // optional Monte Carlo standard errors

  void validate() const {
    if (grid.size() < 2) throw std::invalid_argument("PayoffCurve: grid too short");
    if (values.size() != grid.size())
      throw std::invalid_argument("PayoffCurve: grid and values differ in length");
    if (!se.empty() && se.size() != grid.size())
      throw std::invalid_argument("PayoffCurve: grid and se differ in length");
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("PayoffCurve: grid not increasing");
  }
};

inline std::vector<double> uniform_grid(double step, std::vector<double> extra = {}) {
  if (!(step > 0.0) || step > 1.0) throw std::invalid_argument("uniform_grid: bad step");
  const auto count = static_cast<std::int64_t>(std::llround(1.0 / step));
  std::vector<double> g;
  if (std::abs(count * step - 1.0) < 1e-12) {
    for (std::int64_t i = 0; i <= count; ++i) g.push_back(static_cast<double>(i) / static_cast<double>(count));
  } else {
    for (double x = 0.0; x < 1.0; x += step) g.push_back(x);
    g.push_back(1.0);
  }
  for (double x : extra)
    if (x >= 0.0 && x <= 1.0) g.push_back(x);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

struct Envelope {
  PayoffCurve curve;                  // V-hat on the input grid
  std::vector<std::size_t> vertices;  // indices into the grid; V-hat = V there

  /// V-hat at any x in [grid.front(), grid.back()].
  double operator()(double x) const {
    const auto& g = curve.grid;
    auto it = std::upper_bound(vertices.begin(), vertices.end(), x,
                               [&](double v, std::size_t i) { return v < g[i]; });
    if (it == vertices.begin()) return curve.values[vertices.front()];
    if (it == vertices.end()) return curve.values[vertices.back()];
    const std::size_t r = *it;
    const std::size_t l = *(it - 1);
    const double w = (x - g[l]) / (g[r] - g[l]);
    return (1.0 - w) * curve.values[l] + w * curve.values[r];
  }
};

/// Least concave majorant via a single monotone upper-hull pass. Collinear
/// points are dropped, so vertices are the extreme points of the hull.
inline Envelope concave_envelope(const PayoffCurve& v) {
  v.validate();
  const auto& x = v.grid;
  const auto& y = v.values;
  std::vector<std::size_t> hull;
  hull.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2];
      const std::size_t b = hull.back();
      const double cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]);
      if (cross >= 0.0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(i);
  }

  Envelope env;
  env.vertices = hull;
  env.curve.grid = x;
  env.curve.values.resize(x.size());
  if (!v.se.empty()) env.curve.se.resize(x.size());
  for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
    const std::size_t l = hull[h];
    const std::size_t r = hull[h + 1];
    for (std::size_t i = l; i <= r; ++i) {
      const double w = (x[i] - x[l]) / (x[r] - x[l]);
      env.curve.values[i] = i == l ? y[l] : i == r ? y[r] : (1.0 - w) * y[l] + w * y[r];
      if (!v.se.empty())
        env.curve.se[i] = std::hypot((1.0 - w) * v.se[l], w * v.se[r]);
    }
  }
  if (hull.size() == 1) env.curve.values[0] = y[0];
  return env;
}

struct Posterior {
  double location;
  double weight;
};

struct Splitting {
  std::vector<Posterior> posteriors;
  double value = 0.0;
  double se = 0.0;

  double mean() const {
    double m = 0.0;
    for (const auto& p : posteriors) m += p.weight * p.location;
    return m;
  }

  ValueDistribution distribution(double lo = 0.0, double hi = 1.0) const {
    std::vector<Atom> atoms;
    for (const auto& p : posteriors) atoms.push_back({p.location, p.weight});
    return ValueDistribution(lo, hi, std::move(atoms), {});
  }
};

/// The hull vertices bracketing the prior mean, with Bayes-plausible weights.
inline Splitting optimal_splitting(const Envelope& env, double prior_mean) {
  const auto& g = env.curve.grid;
  if (prior_mean < g.front() || prior_mean > g.back())
    throw std::invalid_argument("optimal_splitting: prior mean outside the curve's domain");
  const auto& vs = env.vertices;
  Splitting s;
  auto exact = std::find_if(vs.begin(), vs.end(), [&](std::size_t i) { return g[i] == prior_mean; });
  if (exact != vs.end()) {
    s.posteriors = {{prior_mean, 1.0}};
    s.value = env.curve.values[*exact];
    s.se = env.curve.se.empty() ? 0.0 : env.curve.se[*exact];
    return s;
  }
  auto it = std::upper_bound(vs.begin(), vs.end(), prior_mean,
                             [&](double v, std::size_t i) { return v < g[i]; });
  const std::size_t r = *it;
  const std::size_t l = *(it - 1);
  const double wr = (prior_mean - g[l]) / (g[r] - g[l]);
  const double wl = 1.0 - wr;
  s.posteriors = {{g[l], wl}, {g[r], wr}};
  s.value = wl * env.curve.values[l] + wr * env.curve.values[r];
  if (!env.curve.se.empty()) s.se = std::hypot(wl * env.curve.se[l], wr * env.curve.se[r]);
  return s;
}

inline Splitting optimal_splitting(const PayoffCurve& curve, double prior_mean) {
  return optimal_splitting(concave_envelope(curve), prior_mean);
}

/// Payoff-of-posterior at the lowest on-path price 7/16 in the two-firm
/// Bernoulli(1/2) market with c = 1/16 and full-information rivals whose
/// reservation values follow Phi(z) = 7/(7 - 8z) - 1 on [0, 7/16].
inline double example2_payoff(double x) {
  if (x < 7.0 / 16.0) return 0.0;
  if (x <= 7.0 / 8.0) return (7.0 / (21.0 - 16.0 * x)) * (7.0 / 16.0);
  return 7.0 / 16.0;
}

inline PayoffCurve example2_curve(double step = 1e-4) {
  PayoffCurve c;
  c.grid = uniform_grid(step, {7.0 / 16.0, 7.0 / 8.0, 0.5});
  for (double x : c.grid) c.values.push_back(example2_payoff(x));
  return c;
}

/// Full-information price mixture inducing Phi. With a Bernoulli(1/2) law and
/// c = 1/16 the reservation value at price p is 7/8 - p, and the Phi-quantile of
/// u is 7u / (8(1 + u)). Components sit at quantiles u = i / (K - 1) with
/// trapezoid weights, so both endpoint prices 7/16 and 7/8 are on path.
inline FirmStrategy example2_strategy(int components = 16385) {
  if (components < 2) throw std::invalid_argument("example2_strategy: need >= 2 components");
  const auto bern = ValueDistribution::bernoulli(0.5);
  std::vector<StrategyComponent> comps;
  const double step = 1.0 / (components - 1);
  for (int i = 0; i < components; ++i) {
    const double u = i * step;
    const double z = 7.0 * u / (8.0 * (1.0 + u));
    const double w = (i == 0 || i == components - 1) ? 0.5 * step : step;
    comps.push_back({w, 7.0 / 8.0 - z, bern});
  }
  return FirmStrategy(std::move(comps));
}

/// Monte Carlo revenue per visit as a function of the firm's posterior mean:
/// the firm at `own_price` reveals exactly x, rivals play `rivals`, and the
/// consumer holds `conjecture`. Grid points use independent derived seeds.
inline PayoffCurve estimate_payoff_curve(const MarketConfig& market,
                                         const std::vector<FirmStrategy>& rivals,
                                         const FirmStrategy& conjecture, double own_price,
                                         const std::vector<double>& grid, std::int64_t trials,
                                         std::uint64_t seed, const Beliefs* beliefs = nullptr) {
  market.validate();
  if (trials < 1) throw std::invalid_argument("estimate_payoff_curve: trials must be >= 1");
  PayoffCurve curve;
  curve.grid = grid;
  curve.values.resize(grid.size());
  curve.se.resize(grid.size());

  if (market.infinite) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      curve.values[i] = analytic_first_visit_profit(
          conjecture, FirmStrategy::pure(own_price, degenerate(grid[i])), market.cost);
      curve.se[i] = 0.0;
    }
    return curve;
  }

  std::vector<FirmStrategy> firms;
  firms.push_back(FirmStrategy::pure(own_price, degenerate(0.0)));
  if (rivals.size() == 1)
    firms.insert(firms.end(), static_cast<std::size_t>(market.n - 1), rivals.front());
  else
    firms.insert(firms.end(), rivals.begin(), rivals.end());
  if (firms.size() != static_cast<std::size_t>(market.n))
    throw std::invalid_argument("estimate_payoff_curve: rival count does not match n - 1");

  for (std::size_t i = 0; i < grid.size(); ++i) {
    firms[0] = FirmStrategy::pure(own_price, degenerate(grid[i]));
    MarketConfig cfg = market;
    cfg.trials = trials;
    cfg.seed = derive_seed(seed, i);
    const auto out = simulate_market(cfg, firms, conjecture, beliefs);
    curve.values[i] = out.firms[0].profit_per_visit.value;
    curve.se[i] = out.firms[0].profit_per_visit.se;
  }
  return curve;
}

}  // namespace diamond
