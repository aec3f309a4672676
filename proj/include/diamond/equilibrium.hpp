// Deviation search against a candidate symmetric profile. Four classes are
// searched: fusion of below-threshold mass into an atom that sells for sure,
// price-only changes, price changes with no information, and the full
// concavification best response at on-path prices. A report without
// witnesses certifies only that no gain was found within those classes at the
// recorded resolution.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "diamond/dist.hpp"
#include "diamond/market.hpp"
#include "diamond/parallel.hpp"
#include "diamond/persuade.hpp"
#include "diamond/random.hpp"
#include "diamond/search.hpp"
#include "diamond/strategy.hpp"

namespace diamond {

enum class DeviationClass { fusion, price, no_info_price, concavification };

inline constexpr std::array<DeviationClass, 4> kAllDeviationClasses{
    DeviationClass::fusion, DeviationClass::price, DeviationClass::no_info_price,
    DeviationClass::concavification};

inline const char* to_string(DeviationClass c) {
  switch (c) {
    case DeviationClass::fusion: return "fusion";
    case DeviationClass::price: return "price";
    case DeviationClass::no_info_price: return "no_info_price";
    case DeviationClass::concavification: return "concavification";
  }
  return "unknown";
}

inline std::optional<DeviationClass> parse_deviation_class(std::string_view s) {
  for (auto c : kAllDeviationClasses)
    if (s == to_string(c)) return c;
  return std::nullopt;
}

/// Whether profits are conditional on the deviating firm being visited at the
/// deviation price, or unconditional per consumer.
enum class ProfitBasis { per_visit, per_consumer };

inline const char* to_string(ProfitBasis b) {
  return b == ProfitBasis::per_visit ? "per_visit" : "per_consumer";
}

struct FusionProvenance {
  FusionSpec spec;
  double threshold = 0.0;   // p + net surplus at which a visited firm sells for sure
  double target = 0.0;      // barycenter aimed for: threshold + margin
  double atom = 0.0;        // location of the pooled atom
  double below_mass = 0.0;  // conjectured mass strictly below the threshold
  double moved_mass = 0.0;  // part of it pooled into the atom
  double epsilon = 0.0;     // moved_mass / below_mass
  double alpha = 0.0;       // average revenue of the moved mass before fusion
  bool alpha_exact = true;
};

struct PriceProvenance {
  double reference_price = 0.0;  // nearest on-path price
  double offset = 0.0;           // deviation price minus reference price
  bool no_information = false;
};

struct ConcavificationProvenance {
  Splitting splitting;
  double grid_step = 0.0;
  std::size_t grid_points = 0;
  double envelope_at_prior = 0.0;
};

struct DeviationWitness {
  DeviationClass kind;
  FirmStrategy strategy;   // the deviating firm's full strategy
  double price;            // price the deviation acts on
  ValueDistribution law;   // posterior-mean law played at `price` after deviating
  ProfitBasis basis;
  double baseline_profit;
  double deviation_profit;
  double gain;
  double gain_se;          // 0 when evaluated in closed form
  bool exact;
  double expected_gain;    // gain per consumer, used to rank witnesses
  std::optional<FusionProvenance> fusion;
  std::optional<PriceProvenance> price_menu;
  std::optional<ConcavificationProvenance> concavification;
};

struct CheckOptions {
  std::vector<DeviationClass> classes{kAllDeviationClasses.begin(), kAllDeviationClasses.end()};
  int price_grid_points = 512;
  std::vector<double> price_grid;  // replaces the default grid when nonempty
  double epsilon = 1e-6;
  double fusion_margin = 0.0;
  double sigmas = 3.0;
  double tolerance = 1e-4;         // added to sigmas * se for simulated gains
  double exact_tolerance = 1e-12;  // for gains evaluated in closed form
  double curve_grid_step = 1.0 / 64.0;
  std::int64_t eval_trials = 0;    // 0: use the market's trial count
  int max_concavification_prices = 3;
  int max_fusion_simulations = 8;
  double mpc_tolerance = kDefaultMpcTolerance;
};

struct ClassVerdict {
  DeviationClass kind;
  std::optional<DeviationWitness> witness;  // strongest in class
  std::vector<DeviationWitness> by_price;    // concavification: one per evaluated price with a gain
  std::size_t witnesses_found = 0;
  std::size_t evaluations = 0;
  std::vector<std::string> notes;
};

struct CertificationReport {
  bool certified = false;
  std::vector<ClassVerdict> verdicts;
  std::optional<DeviationWitness> strongest;
  MarketOutcome candidate;
  double candidate_profit_per_visit = 0.0;  // exact under hidden prices
  bool candidate_exact = false;
  std::vector<double> price_grid;
  CheckOptions options;
  std::string scope;
};

namespace detail {

inline constexpr std::uint64_t kTagFusion = 1ULL << 40;
inline constexpr std::uint64_t kTagPrice = 2ULL << 40;
inline constexpr std::uint64_t kTagNoInfo = 3ULL << 40;
inline constexpr std::uint64_t kTagConcav = 4ULL << 40;
inline constexpr std::uint64_t kTagReplay = 5ULL << 40;

inline bool significant(double gain, double se, bool exact, const CheckOptions& o) {
  if (exact) return gain > o.exact_tolerance;
  return gain > o.sigmas * se + o.tolerance;
}

/// Shared machinery: closed-form payoffs under hidden prices (and in the
/// infinite market), Monte Carlo under posted prices.
class DeviationEvaluator {
 public:
  DeviationEvaluator(const MarketConfig& config, const FirmStrategy& candidate, const CheckOptions& opts)
      : config_(config), candidate_(candidate), opts_(opts), beliefs_(config_, candidate_),
        groups_(candidate_.price_groups()) {
    config_.validate();
    if (config_.regime == Regime::hidden || config_.infinite)
      payoff_.emplace(candidate_, config_.cost, config_.n, config_.infinite);
  }

  bool exact() const { return payoff_.has_value(); }
  const MarketConfig& config() const { return config_; }
  const FirmStrategy& candidate() const { return candidate_; }
  const std::vector<FirmStrategy::PriceGroup>& groups() const { return groups_; }
  const Beliefs& beliefs() const { return beliefs_; }
  const std::optional<HiddenPayoff>& payoff() const { return payoff_; }
  std::int64_t eval_trials() const { return opts_.eval_trials > 0 ? opts_.eval_trials : config_.trials; }

  /// Net surplus at or above which a visited firm charging `price` sells for sure.
  double net_threshold(double price) const {
    if (payoff_) return config_.infinite ? payoff_->reservation() : payoff_->sure_sale_threshold();
    return std::max(beliefs_.at(price).reservation, 0.0);
  }

  const MarketOutcome& candidate_outcome() const {
    if (!outcome_) outcome_ = simulate_market(config_, {candidate_}, candidate_, &beliefs_);
    return *outcome_;
  }

  /// P(visited while charging group g's price), per consumer.
  double visit_mass(std::size_t g) const {
    if (payoff_) return groups_[g].weight * payoff_->visit_probability();
    if (!group_visits_) {
      const auto& cv = candidate_outcome().firms[0].component_visit_probability;
      std::vector<double> mass(groups_.size(), 0.0);
      const auto& comps = candidate_.components();
      for (std::size_t k = 0; k < comps.size(); ++k) {
        auto it = std::lower_bound(groups_.begin(), groups_.end(), comps[k].price - kPriceMatchTolerance,
                                   [](const FirmStrategy::PriceGroup& a, double v) { return a.price < v; });
        mass[static_cast<std::size_t>(it - groups_.begin())] += cv[k];
      }
      group_visits_ = std::move(mass);
    }
    return (*group_visits_)[g];
  }

  /// Revenue per visit when firm 0 plays (price, dist) against the candidate.
  Estimate per_visit(double price, const ValueDistribution& dist, std::uint64_t tag) const {
    if (payoff_) return {payoff_->per_visit_profit(price, dist), 0.0};
    return simulate_deviant(FirmStrategy::pure(price, dist), tag).profit_per_visit;
  }

  /// Profit per consumer when firm 0 plays `s` against the candidate.
  Estimate per_consumer(const FirmStrategy& s, std::uint64_t tag) const {
    return simulate_deviant(s, tag).profit;
  }

  FirmOutcome simulate_deviant(const FirmStrategy& s, std::uint64_t tag,
                               std::int64_t trials = 0) const {
    MarketConfig cfg = config_;
    cfg.trials = trials > 0 ? trials : eval_trials();
    cfg.seed = derive_seed(config_.seed, tag);
    std::vector<FirmStrategy> firms;
    if (cfg.infinite) {
      firms.push_back(s);
    } else {
      firms.assign(static_cast<std::size_t>(cfg.n), candidate_);
      firms[0] = s;
    }
    return simulate_market(cfg, firms, candidate_, &beliefs_).firms[0];
  }

  std::optional<std::size_t> group_at(double price) const {
    for (std::size_t g = 0; g < groups_.size(); ++g)
      if (std::abs(groups_[g].price - price) <= kPriceMatchTolerance) return g;
    return std::nullopt;
  }

 private:
  MarketConfig config_;
  FirmStrategy candidate_;
  CheckOptions opts_;
  Beliefs beliefs_;
  std::vector<FirmStrategy::PriceGroup> groups_;
  std::optional<HiddenPayoff> payoff_;
  mutable std::optional<MarketOutcome> outcome_;
  mutable std::optional<std::vector<double>> group_visits_;
};

struct ThresholdFusion {
  FusionSpec spec;
  double below_mass = 0.0;
  double moved_mass = 0.0;
  ValueDistribution moved_law = degenerate(0.0);  // normalized law of the pooled below-threshold mass
};

/// Pools all mass at or above `tau` with below-threshold mass taken from the
/// top down, stopping once the pooled barycenter would fall to `target`.
inline std::optional<ThresholdFusion> plan_threshold_fusion(const ValueDistribution& f, double tau,
                                                            double target) {
  const double lo = f.support_lo();
  const double hi = f.support_hi();
  if (!(tau > lo) || tau > hi) return std::nullopt;
  const double below = f.cdf_left(tau);
  if (!(below > 0.0)) return std::nullopt;

  double above = 0.0;
  double excess = 0.0;  // sum over pooled mass of m * (x - target)
  for (const auto& a : f.atoms()) {
    if (a.x >= tau) {
      above += a.mass;
      excess += a.mass * (a.x - target);
    }
  }
  for (const auto& s : f.segments()) {
    if (s.hi <= tau) continue;
    const double l = std::max(s.lo, tau);
    const double d = s.density();
    above += d * (s.hi - l);
    excess += 0.5 * d * ((s.hi - target) * (s.hi - target) - (l - target) * (l - target));
  }
  if (!(above > 0.0) || !(excess > 0.0)) return std::nullopt;

  std::vector<double> knots;
  for (double k : f.breakpoints())
    if (k < tau) knots.push_back(k);
  std::reverse(knots.begin(), knots.end());

  const double top = std::nextafter(tau, -std::numeric_limits<double>::infinity());
  double cur = tau;
  std::optional<double> cut;          // stopped inside a density piece at this point
  std::optional<Atom> partial;        // stopped at an atom with this fraction (in .mass)
  for (double k : knots) {
    const double d = f.density_at(0.5 * (k + cur));
    if (d > 0.0) {
      const double need = 0.5 * d * ((target - k) * (target - k) - (target - cur) * (target - cur));
      if (need >= excess) {
        const double a = target - std::sqrt((target - cur) * (target - cur) + 2.0 * excess / d);
        cut = std::clamp(a, k, cur);
        break;
      }
      excess -= need;
    }
    cur = k;
    const double m = f.atom_mass_at(k);
    if (m > 0.0) {
      const double need = m * (target - k);
      if (need >= excess) {
        partial = Atom{k, excess / need};
        break;
      }
      excess -= need;
    }
  }

  ThresholdFusion out;
  std::vector<Atom> moved_atoms;
  std::vector<Segment> moved_segs;
  auto take_range = [&](double a, double b) {
    if (a > b || !(f.cdf_at(b) - f.cdf_left(a) > 0.0)) return;
    out.spec.regions.push_back({a, b, 1.0});
    for (const auto& at : f.atoms())
      if (at.x >= a && at.x <= b) moved_atoms.push_back(at);
    for (const auto& s : f.segments()) {
      const double l = std::max(s.lo, a);
      const double r = std::min(s.hi, b);
      if (r > l) moved_segs.push_back({l, r, s.density() * (r - l)});
    }
  };
  if (cut) {
    take_range(*cut, top);
  } else if (partial) {
    take_range(std::nextafter(partial->x, std::numeric_limits<double>::infinity()), top);
    out.spec.regions.push_back({partial->x, partial->x, partial->mass});
    moved_atoms.push_back({partial->x, partial->mass * f.atom_mass_at(partial->x)});
  } else {
    take_range(f.min_point(), top);
  }
  out.spec.regions.push_back({tau, hi, 1.0});

  double moved = 0.0;
  for (const auto& a : moved_atoms) moved += a.mass;
  for (const auto& s : moved_segs) moved += s.mass;
  if (!(moved > 0.0)) return std::nullopt;
  for (auto& a : moved_atoms) a.mass /= moved;
  for (auto& s : moved_segs) s.mass /= moved;
  out.below_mass = below;
  out.moved_mass = moved;
  out.moved_law = ValueDistribution(lo, hi, std::move(moved_atoms), std::move(moved_segs));
  return out;
}

/// Location of the atom that fuse() creates for `spec`: the one atom whose mass grew.
inline double pooled_atom(const ValueDistribution& before, const ValueDistribution& after) {
  double best = after.atoms().front().x;
  double grow = -1.0;
  for (const auto& a : after.atoms()) {
    const double g = a.mass - before.atom_mass_at(a.x);
    if (g > grow) {
      grow = g;
      best = a.x;
    }
  }
  return best;
}

struct FusionCandidate {
  std::size_t group;
  ThresholdFusion plan;
  ValueDistribution fused;
  double threshold;
  double target;
  double atom;
  bool alpha_exact;
  double alpha;
};

inline std::optional<FusionCandidate> build_fusion(const DeviationEvaluator& ev, std::size_t g,
                                                   const CheckOptions& opts) {
  const auto& grp = ev.groups()[g];
  const double p = grp.price;
  const double net = ev.net_threshold(p);
  const double tau = p + net;
  double target = tau + opts.fusion_margin;
  // Rounding can leave the pooled atom a hair below the target; nudge the
  // target up until the atom passes the same test the consumer applies.
  double bump = std::max(std::abs(target), 1.0) * 4.0 * std::numeric_limits<double>::epsilon();
  for (int attempt = 0; attempt < 60; ++attempt) {
    auto plan = plan_threshold_fusion(grp.dist, tau, target);
    if (!plan) return std::nullopt;
    ValueDistribution fused = fuse(grp.dist, plan->spec);
    const double atom = pooled_atom(grp.dist, fused);
    if (atom - p >= net && atom >= target - 1e-15) {
      FusionCandidate c{g, std::move(*plan), std::move(fused), tau, target, atom, true, 0.0};
      if (c.plan.moved_law.max_point() < p) {
        c.alpha = 0.0;
      } else if (ev.exact()) {
        c.alpha = ev.payoff()->per_visit_profit(p, c.plan.moved_law);
      } else {
        c.alpha_exact = false;
      }
      return c;
    }
    target += bump;
    bump *= 2.0;
  }
  return std::nullopt;
}

inline DeviationWitness make_fusion_witness(const DeviationEvaluator& ev, FusionCandidate c,
                                            Estimate alpha, std::size_t index) {
  const auto& grp = ev.groups()[c.group];
  const double p = grp.price;
  const double moved = c.plan.moved_mass;
  const double gain = moved * (p - alpha.value);
  const double gain_se = moved * alpha.se;
  const Estimate base = ev.per_visit(p, grp.dist, kTagFusion + 2 * index + 1);
  FusionProvenance prov;
  prov.spec = c.plan.spec;
  prov.threshold = c.threshold;
  prov.target = c.target;
  prov.atom = c.atom;
  prov.below_mass = c.plan.below_mass;
  prov.moved_mass = moved;
  prov.epsilon = moved / c.plan.below_mass;
  prov.alpha = alpha.value;
  prov.alpha_exact = c.alpha_exact;
  return DeviationWitness{DeviationClass::fusion,
                          ev.candidate().with_price_law(p, c.fused),
                          p,
                          c.fused,
                          ProfitBasis::per_visit,
                          base.value,
                          base.value + gain,
                          gain,
                          gain_se,
                          c.alpha_exact,
                          ev.visit_mass(c.group) * gain,
                          prov,
                          std::nullopt,
                          std::nullopt};
}

inline std::optional<DeviationWitness> search_fusion(const DeviationEvaluator& ev, const CheckOptions& opts,
                                                     std::optional<double> only_price, ClassVerdict& verdict) {
  std::vector<std::size_t> targets;
  if (only_price) {
    if (auto g = ev.group_at(*only_price)) targets.push_back(*g);
    else verdict.notes.push_back("requested price is not on path");
  } else {
    for (std::size_t g = 0; g < ev.groups().size(); ++g) targets.push_back(g);
  }

  std::vector<FusionCandidate> exact;
  std::vector<FusionCandidate> simulated;
  for (std::size_t g : targets) {
    auto c = build_fusion(ev, g, opts);
    ++verdict.evaluations;
    if (!c) continue;
    (c->alpha_exact ? exact : simulated).push_back(std::move(*c));
  }

  std::optional<DeviationWitness> best;

  // Witness count and ranking need only the gain; the per-visit baseline is
  // evaluated for the strongest candidate alone.
  std::optional<FusionCandidate> top_exact;
  double top_score = -1.0;
  for (auto& c : exact) {
    const double p = ev.groups()[c.group].price;
    const double gain = c.plan.moved_mass * (p - c.alpha);
    if (!significant(gain, 0.0, true, opts)) continue;
    ++verdict.witnesses_found;
    const double score = ev.visit_mass(c.group) * gain;
    if (score > top_score) {
      top_score = score;
      top_exact = std::move(c);
    }
  }
  if (top_exact) {
    const double a = top_exact->alpha;
    const std::size_t idx = top_exact->group;
    best = make_fusion_witness(ev, std::move(*top_exact), {a, 0.0}, idx);
  }

  std::sort(simulated.begin(), simulated.end(), [&](const FusionCandidate& a, const FusionCandidate& b) {
    const double ua = ev.visit_mass(a.group) * a.plan.moved_mass * ev.groups()[a.group].price;
    const double ub = ev.visit_mass(b.group) * b.plan.moved_mass * ev.groups()[b.group].price;
    return ua > ub;
  });
  const std::size_t limit = std::min<std::size_t>(simulated.size(), static_cast<std::size_t>(
                                                                        std::max(opts.max_fusion_simulations, 1)));
  if (simulated.size() > limit)
    verdict.notes.push_back("simulated the " + std::to_string(limit) + " fusion candidates with the largest gain bound out of " +
                            std::to_string(simulated.size()));
  for (std::size_t i = 0; i < limit; ++i) {
    auto& c = simulated[i];
    const std::size_t idx = c.group;
    const double p = ev.groups()[idx].price;
    const Estimate alpha = ev.per_visit(p, c.plan.moved_law, kTagFusion + 2 * idx);
    const double gain = c.plan.moved_mass * (p - alpha.value);
    if (!significant(gain, c.plan.moved_mass * alpha.se, false, opts)) continue;
    ++verdict.witnesses_found;
    auto w = make_fusion_witness(ev, std::move(c), alpha, idx);
    if (!best || w.expected_gain > best->expected_gain) best = std::move(w);
  }
  return best;
}

inline std::vector<double> default_price_grid(const DeviationEvaluator& ev, const CheckOptions& opts) {
  const auto& cfg = ev.config();
  std::vector<double> g;
  const int points = std::max(opts.price_grid_points, 2);
  for (int i = 0; i < points; ++i) g.push_back(static_cast<double>(i) / (points - 1));
  const double mu = cfg.prior.mean();
  const double c = cfg.cost;
  const double eps = opts.epsilon;
  for (double x : {mu, mu - c, mu - eps}) g.push_back(x);

  const auto& groups = ev.groups();
  std::vector<std::size_t> picks;
  if (groups.size() <= 8) {
    for (std::size_t i = 0; i < groups.size(); ++i) picks.push_back(i);
  } else {
    picks = {0, groups.size() / 2, groups.size() - 1};
  }
  for (std::size_t i : picks) {
    const double p = groups[i].price;
    for (double x : {p - c, p + c, p - eps, p + eps, p + c - eps, p + ev.net_threshold(p)}) g.push_back(x);
  }
  if (ev.exact()) g.push_back(mu - ev.net_threshold(0.0));
  std::erase_if(g, [](double x) { return !(x >= 0.0 && x <= 1.0); });
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

inline double nearest_on_path(const DeviationEvaluator& ev, double q) {
  double best = ev.groups().front().price;
  for (const auto& grp : ev.groups())
    if (std::abs(grp.price - q) < std::abs(best - q)) best = grp.price;
  return best;
}

/// Price deviations with either the candidate's own laws or no information.
inline std::optional<DeviationWitness> search_price_menu(const DeviationEvaluator& ev, const CheckOptions& opts,
                                                         const std::vector<double>& grid, bool no_information,
                                                         ClassVerdict& verdict) {
  if (grid.empty()) throw std::invalid_argument("price_menu_deviation_search: empty price grid");
  const auto& cfg = ev.config();
  std::vector<ValueDistribution> laws;
  if (no_information) {
    laws.push_back(degenerate(cfg.prior.mean()));
  } else {
    for (const auto& grp : ev.groups())
      if (std::find(laws.begin(), laws.end(), grp.dist) == laws.end()) laws.push_back(grp.dist);
  }

  Estimate base;
  ProfitBasis basis;
  if (ev.exact()) {
    base = {ev.payoff()->per_visit_profit(ev.candidate()), 0.0};
    basis = ProfitBasis::per_visit;
  } else {
    base = ev.candidate_outcome().firms[0].profit;
    basis = ProfitBasis::per_consumer;
  }
  const double visit = ev.exact() ? ev.payoff()->visit_probability() : 1.0;
  const std::uint64_t tag0 = no_information ? kTagNoInfo : kTagPrice;

  std::optional<DeviationWitness> best;
  for (std::size_t li = 0; li < laws.size(); ++li) {
    for (std::size_t qi = 0; qi < grid.size(); ++qi) {
      const double q = grid[qi];
      auto strategy = FirmStrategy::pure(q, laws[li]);
      Estimate dev;
      if (ev.exact())
        dev = {ev.payoff()->per_visit_profit(q, laws[li]), 0.0};
      else
        dev = ev.per_consumer(strategy, tag0 + li * grid.size() + qi);
      ++verdict.evaluations;
      const double gain = dev.value - base.value;
      const double se = std::hypot(dev.se, base.se);
      if (!significant(gain, se, ev.exact(), opts)) continue;
      ++verdict.witnesses_found;
      const double expected = gain * visit;
      if (best && expected <= best->expected_gain) continue;
      const double ref = nearest_on_path(ev, q);
      best = DeviationWitness{no_information ? DeviationClass::no_info_price : DeviationClass::price,
                              std::move(strategy),
                              q,
                              laws[li],
                              basis,
                              base.value,
                              dev.value,
                              gain,
                              se,
                              ev.exact(),
                              expected,
                              std::nullopt,
                              PriceProvenance{ref, q - ref, no_information},
                              std::nullopt};
    }
  }
  return best;
}

inline std::optional<DeviationWitness> search_concavification(const DeviationEvaluator& ev,
                                                              const CheckOptions& opts,
                                                              ClassVerdict& verdict) {
  const auto& cfg = ev.config();
  const auto& groups = ev.groups();
  // Lowest, highest and evenly spaced on-path prices in between. A price that
  // is never visited yields a zero curve and hence no gain.
  const std::size_t cap = static_cast<std::size_t>(std::max(opts.max_concavification_prices, 1));
  std::vector<std::size_t> picks;
  if (groups.size() <= cap) {
    for (std::size_t g = 0; g < groups.size(); ++g) picks.push_back(g);
  } else {
    for (std::size_t i = 0; i < cap; ++i) picks.push_back(cap == 1 ? 0 : i * (groups.size() - 1) / (cap - 1));
    picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
    verdict.notes.push_back("evaluated " + std::to_string(picks.size()) + " of " + std::to_string(groups.size()) +
                            " on-path prices");
  }

  const double mu = cfg.prior.mean();
  std::optional<DeviationWitness> best;
  for (std::size_t g : picks) {
    const double p = groups[g].price;
    const auto grid = uniform_grid(opts.curve_grid_step, {p, p + ev.net_threshold(p), mu});
    PayoffCurve curve;
    if (ev.exact()) {
      curve.grid = grid;
      for (double x : grid) curve.values.push_back(ev.payoff()->revenue(p, x));
    } else {
      curve = estimate_payoff_curve(cfg, {ev.candidate()}, ev.candidate(), p, grid, ev.eval_trials(),
                                    derive_seed(cfg.seed, kTagConcav + g), &ev.beliefs());
    }
    ++verdict.evaluations;
    const Envelope env = concave_envelope(curve);
    const Splitting split = optimal_splitting(env, mu);
    const Estimate base = ev.per_visit(p, groups[g].dist, kTagConcav + (1ULL << 32) + g);
    const ValueDistribution law = split.distribution(cfg.prior.support_lo(), cfg.prior.support_hi());
    double value = split.value;
    if (ev.exact()) value = ev.payoff()->per_visit_profit(p, law);
    const double gain = value - base.value;
    const double se = std::hypot(split.se, base.se);
    if (!significant(gain, se, ev.exact(), opts)) continue;
    if (!is_mpc(law, cfg.prior, opts.mpc_tolerance)) {
      verdict.notes.push_back("splitting at price " + std::to_string(p) +
                              " is not a contraction of the prior; its value bounds the gain only");
      continue;
    }
    ++verdict.witnesses_found;
    const double expected = ev.visit_mass(g) * gain;
    verdict.by_price.push_back(DeviationWitness{DeviationClass::concavification,
                            ev.candidate().with_price_law(p, law),
                            p,
                            law,
                            ProfitBasis::per_visit,
                            base.value,
                            value,
                            gain,
                            se,
                            ev.exact(),
                            expected,
                            std::nullopt,
                            std::nullopt,
                            ConcavificationProvenance{split, opts.curve_grid_step, grid.size(), env(mu)}});
    if (!best || expected > best->expected_gain) best = verdict.by_price.back();
  }
  return best;
}

inline void require_feasible(const FirmStrategy& s, const MarketConfig& cfg, const CheckOptions& opts) {
  if (!strategy_is_feasible(s, cfg.prior, opts.mpc_tolerance))
    throw std::invalid_argument("candidate strategy is not a mean-preserving contraction of the prior");
}

}  // namespace detail

/// Fuses below-threshold mass into an atom that sells for sure, at each
/// on-path price (or only `only_price`). Gain per visit is
/// moved_mass * (price - alpha), alpha being the moved mass's old revenue.
inline std::optional<DeviationWitness> fusion_deviation_search(const FirmStrategy& conjecture,
                                                               const MarketConfig& config,
                                                               const CheckOptions& opts = {},
                                                               std::optional<double> only_price = {}) {
  const detail::DeviationEvaluator ev(config, conjecture, opts);
  ClassVerdict v{DeviationClass::fusion, {}, {}, 0, 0, {}};
  return detail::search_fusion(ev, opts, only_price, v);
}

/// Best strict improvement over the grid among (q, candidate law) and
/// (q, no information) deviations.
inline std::optional<DeviationWitness> price_menu_deviation_search(const FirmStrategy& conjecture,
                                                                   const MarketConfig& config,
                                                                   const std::vector<double>& price_grid,
                                                                   const CheckOptions& opts = {}) {
  const detail::DeviationEvaluator ev(config, conjecture, opts);
  ClassVerdict a{DeviationClass::price, {}, {}, 0, 0, {}};
  ClassVerdict b{DeviationClass::no_info_price, {}, {}, 0, 0, {}};
  auto w1 = detail::search_price_menu(ev, opts, price_grid, false, a);
  auto w2 = detail::search_price_menu(ev, opts, price_grid, true, b);
  if (w1 && w2) return w2->expected_gain > w1->expected_gain ? w2 : w1;
  return w1 ? w1 : w2;
}

inline std::vector<double> default_price_grid(const FirmStrategy& conjecture, const MarketConfig& config,
                                              const CheckOptions& opts = {}) {
  const detail::DeviationEvaluator ev(config, conjecture, opts);
  return detail::default_price_grid(ev, opts);
}

inline CertificationReport check_symmetric_equilibrium(const FirmStrategy& candidate,
                                                       const MarketConfig& config,
                                                       const CheckOptions& opts = {}) {
  config.validate();
  detail::require_feasible(candidate, config, opts);
  const detail::DeviationEvaluator ev(config, candidate, opts);

  CertificationReport r;
  r.options = opts;
  r.candidate = ev.candidate_outcome();
  r.candidate_exact = ev.exact();
  r.candidate_profit_per_visit = ev.exact() ? ev.payoff()->per_visit_profit(candidate)
                                            : r.candidate.firms[0].profit_per_visit.value;
  const bool wants_grid = std::any_of(opts.classes.begin(), opts.classes.end(), [](DeviationClass c) {
    return c == DeviationClass::price || c == DeviationClass::no_info_price;
  });
  if (wants_grid) r.price_grid = opts.price_grid.empty() ? detail::default_price_grid(ev, opts) : opts.price_grid;

  for (auto cls : kAllDeviationClasses) {
    if (std::find(opts.classes.begin(), opts.classes.end(), cls) == opts.classes.end()) continue;
    ClassVerdict v{cls, {}, {}, 0, 0, {}};
    switch (cls) {
      case DeviationClass::fusion: v.witness = detail::search_fusion(ev, opts, std::nullopt, v); break;
      case DeviationClass::price: v.witness = detail::search_price_menu(ev, opts, r.price_grid, false, v); break;
      case DeviationClass::no_info_price:
        v.witness = detail::search_price_menu(ev, opts, r.price_grid, true, v);
        break;
      case DeviationClass::concavification: v.witness = detail::search_concavification(ev, opts, v); break;
    }
    if (v.witness && (!r.strongest || v.witness->expected_gain > r.strongest->expected_gain))
      r.strongest = v.witness;
    r.verdicts.push_back(std::move(v));
  }
  r.certified = !r.strongest.has_value();
  r.scope = r.certified
                ? "no profitable deviation found within the searched classes at the recorded resolution; "
                  "this is not a proof of equilibrium"
                : "rejected: a profitable deviation was found within the searched classes";
  return r;
}

/// Re-estimates a witness's gain by fresh simulation with independent seeds.
/// Fusion and concavification witnesses compare the two laws at the deviation
/// price per visit; price witnesses compare whole strategies on the witness's basis.
inline Estimate replay_witness(const DeviationWitness& w, const FirmStrategy& candidate,
                               const MarketConfig& config, std::int64_t trials,
                               std::uint64_t seed) {
  MarketConfig cfg = config;
  cfg.seed = derive_seed(seed, detail::kTagReplay);
  const detail::DeviationEvaluator ev(cfg, candidate, CheckOptions{});
  FirmStrategy dev = FirmStrategy::pure(w.price, w.law);
  std::optional<FirmStrategy> base;
  if (w.kind == DeviationClass::fusion || w.kind == DeviationClass::concavification)
    base = FirmStrategy::pure(w.price, candidate.dist_at_price(w.price));
  else
    base = candidate;
  const auto a = ev.simulate_deviant(dev, 1, trials);
  const auto b = ev.simulate_deviant(*base, 2, trials);
  if (w.basis == ProfitBasis::per_visit)
    return {a.profit_per_visit.value - b.profit_per_visit.value,
            std::hypot(a.profit_per_visit.se, b.profit_per_visit.se)};
  return {a.profit.value - b.profit.value, std::hypot(a.profit.se, b.profit.se)};
}

}  // namespace diamond
