// Firm strategies: finite mixtures over (price, posterior-mean law) pairs.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "diamond/dist.hpp"

namespace diamond {

inline constexpr double kPriceMatchTolerance = 1e-12;

struct StrategyComponent {
  double weight;
  double price;
  ValueDistribution dist;
};

class FirmStrategy {
 public:
  explicit FirmStrategy(std::vector<StrategyComponent> components)
      : components_(std::move(components)) {
    double total = 0.0;
    for (const auto& c : components_) {
      if (!std::isfinite(c.weight) || c.weight < 0.0)
        throw std::invalid_argument("FirmStrategy: negative or non-finite weight");
      if (!std::isfinite(c.price) || c.price < 0.0)
        throw std::invalid_argument("FirmStrategy: negative or non-finite price");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("FirmStrategy: weights must sum to 1");
    std::erase_if(components_, [](const StrategyComponent& c) { return c.weight == 0.0; });
    if (components_.empty()) throw std::invalid_argument("FirmStrategy: no components");
  }

  static FirmStrategy pure(double price, ValueDistribution dist) {
    return FirmStrategy({{1.0, price, std::move(dist)}});
  }

  const std::vector<StrategyComponent>& components() const { return components_; }
  bool is_pure() const { return components_.size() == 1; }

  /// Distinct prices in increasing order.
  std::vector<double> prices() const {
    std::vector<double> p;
    p.reserve(components_.size());
    for (const auto& c : components_) p.push_back(c.price);
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    return p;
  }

  double weight_at_price(double price) const {
    double w = 0.0;
    for (const auto& c : components_)
      if (std::abs(c.price - price) <= kPriceMatchTolerance) w += c.weight;
    return w;
  }

  /// Law of values conditional on the firm charging `price`.
  ValueDistribution dist_at_price(double price) const {
    const double w = weight_at_price(price);
    if (!(w > 0.0)) throw std::invalid_argument("FirmStrategy: price not in support");
    std::vector<std::pair<double, ValueDistribution>> parts;
    double lo = 0.0;
    double hi = 1.0;
    for (const auto& c : components_) {
      if (std::abs(c.price - price) > kPriceMatchTolerance) continue;
      parts.emplace_back(c.weight / w, c.dist);
      lo = c.dist.support_lo();
      hi = c.dist.support_hi();
    }
    if (parts.size() == 1) return parts.front().second;
    return mixture(parts, lo, hi);
  }

  /// Replaces every component charging `price` by one component with law `dist`.
  FirmStrategy with_price_law(double price, ValueDistribution dist) const {
    const double w = weight_at_price(price);
    std::vector<StrategyComponent> out;
    bool placed = false;
    for (const auto& c : components_) {
      if (std::abs(c.price - price) > kPriceMatchTolerance) {
        out.push_back(c);
      } else if (!placed) {
        out.push_back({w, c.price, dist});
        placed = true;
      }
    }
    return FirmStrategy(std::move(out));
  }

  struct PriceGroup {
    double price;
    double weight;
    ValueDistribution dist;  // law conditional on this price
  };

  /// Components grouped by price, in increasing price order.
  std::vector<PriceGroup> price_groups() const {
    std::vector<std::size_t> idx(components_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return components_[a].price < components_[b].price;
    });
    std::vector<PriceGroup> groups;
    std::size_t i = 0;
    while (i < idx.size()) {
      std::size_t j = i;
      const double p = components_[idx[i]].price;
      double w = 0.0;
      while (j < idx.size() && components_[idx[j]].price - p <= kPriceMatchTolerance) {
        w += components_[idx[j]].weight;
        ++j;
      }
      if (j - i == 1) {
        groups.push_back({p, w, components_[idx[i]].dist});
      } else {
        std::vector<std::pair<double, ValueDistribution>> parts;
        for (std::size_t k = i; k < j; ++k)
          parts.emplace_back(components_[idx[k]].weight / w, components_[idx[k]].dist);
        const auto& d0 = components_[idx[i]].dist;
        groups.push_back({p, w, mixture(parts, d0.support_lo(), d0.support_hi())});
      }
      i = j;
    }
    return groups;
  }

  double mean_price() const {
    double m = 0.0;
    for (const auto& c : components_) m += c.weight * c.price;
    return m;
  }

 private:
  std::vector<StrategyComponent> components_;
};

/// Law of the net value X - P when the firm plays `strategy`, housed on [-1, 1].
inline ValueDistribution net_value_mixture(const FirmStrategy& strategy) {
  std::vector<Atom> atoms;
  std::vector<Segment> segs;
  for (const auto& c : strategy.components()) {
    for (const auto& a : c.dist.atoms()) atoms.push_back({a.x - c.price, c.weight * a.mass});
    for (const auto& s : c.dist.segments())
      segs.push_back({s.lo - c.price, s.hi - c.price, c.weight * s.mass});
  }
  return ValueDistribution(-1.0, 1.0, std::move(atoms), std::move(segs));
}

/// True iff every law in the strategy is a contraction of the prior.
inline bool strategy_is_feasible(const FirmStrategy& s, const ValueDistribution& prior,
                                 double tol = kDefaultMpcTolerance) {
  return std::all_of(s.components().begin(), s.components().end(),
                     [&](const StrategyComponent& c) { return is_mpc(c.dist, prior, tol); });
}

}  // namespace diamond
