// Random instance generators shared by the unit tests and the acceptance suite.
#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "diamond/diamond.hpp"

namespace diamond::fixtures {

inline double unit(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Mixed atoms and segments on [0, 1].
inline ValueDistribution random_dist(std::mt19937_64& rng) {
  std::vector<Atom> atoms;
  std::vector<Segment> segs;
  const int na = static_cast<int>(rng() % 4);
  const int ns = 1 + static_cast<int>(rng() % 3);
  std::vector<double> w;
  for (int i = 0; i < na + ns; ++i) w.push_back(0.05 + unit(rng));
  double total = 0.0;
  for (double x : w) total += x;
  for (int i = 0; i < na; ++i) atoms.push_back({unit(rng), w[i] / total});
  for (int i = 0; i < ns; ++i) {
    double a = unit(rng), b = unit(rng);
    if (a > b) std::swap(a, b);
    if (b - a < 1e-3) {
      b = std::min(1.0, a + 0.1);
      a = b - 0.1;
    }
    segs.push_back({a, b, w[na + i] / total});
  }
  return ValueDistribution(0.0, 1.0, atoms, segs);
}

/// One to three disjoint regions with fractions in [0.1, 1].
inline FusionSpec random_spec(std::mt19937_64& rng) {
  std::vector<double> cuts;
  const int k = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < 2 * k; ++i) cuts.push_back(unit(rng));
  std::sort(cuts.begin(), cuts.end());
  FusionSpec s;
  for (int i = 0; i < k; ++i) s.regions.push_back({cuts[2 * i], cuts[2 * i + 1], 0.1 + 0.9 * unit(rng)});
  return s;
}

/// Fusing a random region set of the prior keeps the law feasible.
inline ValueDistribution random_contraction(const ValueDistribution& prior, std::mt19937_64& rng) {
  for (;;) {
    try {
      return fuse(prior, random_spec(rng));
    } catch (const std::invalid_argument&) {
    }
  }
}

struct Instance {
  MarketConfig config;
  FirmStrategy conjecture;
};

/// Hidden-price market with a uniform prior whose conjecture leaves positive
/// mass on both sides of the sure-sale threshold at some on-path price.
inline Instance random_active_search(std::mt19937_64& rng) {
  for (;;) {
    MarketConfig m;
    m.n = 2 + static_cast<int>(rng() % 3);
    m.prior = ValueDistribution::uniform();
    m.cost = 0.005 + 0.06 * unit(rng);
    m.regime = Regime::hidden;
    m.threads = 1;
    const int k = 1 + static_cast<int>(rng() % 2);
    std::vector<StrategyComponent> comps;
    for (int i = 0; i < k; ++i)
      comps.push_back({1.0 / k, 0.05 + 0.55 * unit(rng), random_contraction(m.prior, rng)});
    FirmStrategy conj(std::move(comps));
    const HiddenPayoff hp(conj, m.cost, m.n, false);
    if (!(hp.reservation() > 0.0)) continue;
    bool active = false;
    for (const auto& g : conj.price_groups()) {
      const double tau = g.price + hp.sure_sale_threshold();
      if (g.dist.cdf_left(tau) > 1e-3 && 1.0 - g.dist.cdf_left(tau) > 1e-3) active = true;
    }
    if (active) return {m, conj};
  }
}

/// One or two fully known atom-only offers with a search cost.
struct AtomInstance {
  std::vector<FirmOffer> offers;
  double cost;
};

inline AtomInstance random_atom_instance(std::mt19937_64& rng) {
  AtomInstance inst;
  const int n = 1 + static_cast<int>(rng() % 2);
  for (int i = 0; i < n; ++i) {
    const int k = 1 + static_cast<int>(rng() % 4);
    std::vector<Atom> atoms;
    double tot = 0.0;
    for (int j = 0; j < k; ++j) {
      atoms.push_back({unit(rng), 0.1 + unit(rng)});
      tot += atoms.back().mass;
    }
    for (auto& a : atoms) a.mass /= tot;
    inst.offers.push_back({0.4 * unit(rng), ValueDistribution::discrete(atoms)});
  }
  inst.cost = 0.005 + 0.1 * unit(rng);
  return inst;
}

}  // namespace diamond::fixtures
