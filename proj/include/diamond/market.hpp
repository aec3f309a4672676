// Market simulator: firms commit to strategies, consumers search sequentially
// with recall, and outcomes are aggregated into profits, consumer surplus and
// visit statistics. Finite markets are simulated by Monte Carlo; the infinite
// market is a stationary no-recall environment handled in closed form.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "diamond/dist.hpp"
#include "diamond/parallel.hpp"
#include "diamond/random.hpp"
#include "diamond/search.hpp"
#include "diamond/strategy.hpp"

namespace diamond {

/// Belief about a firm that posts a price no conjectured strategy charges.
enum class OffPathRule { uninformative, pessimistic };

struct MarketConfig {
  int n = 2;
  bool infinite = false;
  ValueDistribution prior = ValueDistribution::uniform();
  double cost = 1.0 / 32.0;
  Regime regime = Regime::hidden;
  OffPathRule off_path = OffPathRule::uninformative;
  /// Overrides `off_path` when set.
  std::function<ValueDistribution(double price)> custom_off_path;
  std::int64_t trials = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency; never affects results

  void validate() const {
    if (!infinite && n < 1) throw std::invalid_argument("MarketConfig: n must be >= 1");
    if (!(cost > 0.0)) throw std::invalid_argument("MarketConfig: cost must be positive");
    if (prior.support_lo() != 0.0 || prior.support_hi() != 1.0)
      throw std::invalid_argument("MarketConfig: prior must be supported on [0, 1]");
    if (trials < 1) throw std::invalid_argument("MarketConfig: trials must be >= 1");
  }
};

/// Both built-in rules return the uninformative law delta(mu): every mean-mu
/// conjecture yields the same minimum reservation value mu - c - p under the
/// solver, so the most pessimistic belief coincides with no information.
inline ValueDistribution off_path_belief(const MarketConfig& config, double price) {
  if (config.custom_off_path) return config.custom_off_path(price);
  return degenerate(config.prior.mean());
}

/// What the consumer believes about a firm charging a given price.
struct PriceBelief {
  ValueDistribution dist;
  double reservation;
  double first_visit;
  bool on_path;
};

/// Consumer beliefs indexed by posted price: on-path prices map to the
/// conjecture's conditional law, anything else to the off-path rule.
class Beliefs {
 public:
  Beliefs(const MarketConfig& config, const FirmStrategy& conjecture) : config_(&config) {
    for (auto& g : conjecture.price_groups()) {
      const double z = reservation_value(g.dist, g.price, config.cost);
      const double fv = first_visit_value(g.dist, g.price);
      prices_.push_back(g.price);
      on_path_.push_back({std::move(g.dist), z, fv, true});
    }
  }

  PriceBelief at(double price) const {
    if (const auto* b = find(price)) return *b;
    ValueDistribution d = off_path_belief(*config_, price);
    const double z = reservation_value(d, price, config_->cost);
    const double fv = first_visit_value(d, price);
    return {std::move(d), z, fv, false};
  }

  const PriceBelief* find(double price) const {
    auto it = std::lower_bound(prices_.begin(), prices_.end(), price - kPriceMatchTolerance);
    if (it != prices_.end() && std::abs(*it - price) <= kPriceMatchTolerance)
      return &on_path_[static_cast<std::size_t>(it - prices_.begin())];
    return nullptr;
  }

 private:
  const MarketConfig* config_;
  std::vector<double> prices_;
  std::vector<PriceBelief> on_path_;
};

inline PriceBelief belief_at_price(const MarketConfig& config, const FirmStrategy& conjecture,
                                   double price) {
  return Beliefs(config, conjecture).at(price);
}

/// Common reservation value under hidden prices.
inline double hidden_reservation(const FirmStrategy& conjecture, double cost) {
  return reservation_value(net_value_mixture(conjecture), 0.0, cost);
}

struct FirmOutcome {
  Estimate profit;             // per consumer
  Estimate profit_per_visit;   // conditional on being visited
  double visit_probability = 0.0;
  double purchase_given_visit = 0.0;
  std::vector<double> component_visit_probability;  // P(visited and playing component k)
};

struct ConsumerOutcome {
  Estimate surplus;
  Estimate visits;
  double purchase_probability = 0.0;
  double search_cost_paid = 0.0;
  double value_purchased = 0.0;  // E[x_chosen; purchase]
};

struct MarketOutcome {
  std::vector<FirmOutcome> firms;
  ConsumerOutcome consumer;
  std::int64_t trials = 0;
  bool analytic = false;
};

/// Deviant's profit per visit in the infinite market: the consumer never
/// returns, so a visited firm sells iff x - p >= z(conjecture).
inline double analytic_first_visit_profit(const FirmStrategy& conjecture,
                                          const FirmStrategy& deviant, double cost) {
  const double z = hidden_reservation(conjecture, cost);
  double profit = 0.0;
  for (const auto& c : deviant.components())
    profit += c.weight * c.price * c.dist.survival(z + c.price);
  return profit;
}

/// Exact revenue per visit, as a function of the firm's posterior mean, when
/// prices are hidden and every rival plays the conjecture.
///
/// With n firms, common reservation value z >= 0 and own surplus 0 <= s < z,
/// the consumer reaches the firm at position k only if the k-1 earlier rivals
/// fell short of z, and buys here only if no rival beats s. Writing a = P(S < s),
/// b = P(S = s) for a rival's surplus S and g = P(S < z), the tie-broken win
/// probability integrates to
///     V(s) = p * ((a + b)^n - a^n) / (b * sum_{k<n} g^k),
/// which reduces to p * n * a^(n-1) / sum g^k when b = 0.
class HiddenPayoff {
 public:
  HiddenPayoff(const FirmStrategy& conjecture, double cost, int n, bool infinite)
      : rival_(net_value_mixture(conjecture)), n_(n), infinite_(infinite) {
    z_ = reservation_value(rival_, 0.0, cost);
    const double g = rival_.cdf_left(z_);
    double gk = 1.0;
    for (int k = 0; k < n_; ++k) {
      visit_norm_ += gk;
      gk *= g;
    }
  }

  double reservation() const { return z_; }
  const ValueDistribution& rival_net_law() const { return rival_; }

  /// Probability that a given firm is visited at all (finite market).
  double visit_probability() const {
    if (infinite_) return 1.0;
    if (z_ < 0.0) return 1.0 / n_;
    return visit_norm_ / n_;
  }

  /// Net value at or above which the firm sells for sure once visited.
  double sure_sale_threshold() const { return std::max(z_, 0.0); }

  double revenue(double price, double x) const {
    const double s = x - price;
    if (infinite_) return s >= z_ ? price : 0.0;
    if (s < 0.0) return 0.0;
    if (z_ < 0.0 || s >= z_) return price;
    const double a = rival_.cdf_left(s);
    const double b = rival_.atom_mass_at(s);
    return price * win_share(a, b) / visit_norm_;
  }

  /// E[revenue | visit] when charging `price` with posterior law `dist`.
  double per_visit_profit(double price, const ValueDistribution& dist) const {
    double total = 0.0;
    for (const auto& a : dist.atoms()) total += a.mass * revenue(price, a.x);
    for (const auto& seg : dist.segments()) total += seg.density() * integrate(price, seg.lo, seg.hi);
    return total;
  }

  double per_visit_profit(const FirmStrategy& s) const {
    double total = 0.0;
    for (const auto& c : s.components()) total += c.weight * per_visit_profit(c.price, c.dist);
    return total;
  }

 private:
  double win_share(double a, double b) const {
    if (b > 0.0) return (std::pow(a + b, n_) - std::pow(a, n_)) / b;
    return n_ * std::pow(a, n_ - 1);
  }

  /// Integral of revenue(price, x) dx over (lo, hi), exact up to rounding:
  /// between knots the rival CDF is linear and the integrand a polynomial.
  double integrate(double price, double lo, double hi) const {
    std::vector<double> cuts{lo, hi};
    auto add = [&](double x) {
      if (x > lo && x < hi) cuts.push_back(x);
    };
    add(price);
    add(price + z_);
    if (!infinite_)
      for (double k : rival_.breakpoints()) add(k + price);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const auto& [nodes, weights] = gauss_legendre();
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double u = cuts[i];
      const double v = cuts[i + 1];
      const double half = 0.5 * (v - u);
      const double mid = 0.5 * (u + v);
      double piece = 0.0;
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        const double x = mid + half * nodes[j];
        const double s = x - price;
        double r;
        if (infinite_) {
          r = s >= z_ ? price : 0.0;
        } else if (s < 0.0) {
          r = 0.0;
        } else if (z_ < 0.0 || s >= z_) {
          r = price;
        } else {
          r = price * n_ * std::pow(rival_.cdf_left(s), n_ - 1) / visit_norm_;
        }
        piece += weights[j] * r;
      }
      total += half * piece;
    }
    return total;
  }

  /// Nodes on [-1, 1], exact for polynomials of degree < 2 * count.
  const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre() const {
    if (!gl_.first.empty()) return gl_;
    const int m = std::max(8, n_ / 2 + 2);
    gl_.first.resize(m);
    gl_.second.resize(m);
    for (int i = 0; i < m; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (m + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= m; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = m * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      gl_.first[i] = x;
      gl_.second[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return gl_;
  }

  ValueDistribution rival_;
  int n_;
  bool infinite_;
  double z_ = 0.0;
  double visit_norm_ = 0.0;
  mutable std::pair<std::vector<double>, std::vector<double>> gl_;
};

namespace detail {

struct PreparedComponent {
  double price;
  Sampler sampler;
  double reservation;
  double first_visit;
};

struct PreparedFirm {
  std::vector<double> cumulative;  // cumulative component weights
  std::vector<PreparedComponent> components;

  std::size_t pick(double u) const {
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                 components.size() - 1);
  }
};

class PreparedMarket {
 public:
  PreparedMarket(const MarketConfig& config, const std::vector<FirmStrategy>& actual,
                 const FirmStrategy& conjecture, const Beliefs* beliefs = nullptr)
      : cost_(config.cost), regime_(config.regime) {
    std::optional<double> hidden_z;
    std::optional<double> hidden_fv;
    std::optional<Beliefs> own;
    if (regime_ == Regime::hidden) {
      const auto h = net_value_mixture(conjecture);
      hidden_z = reservation_value(h, 0.0, cost_);
      hidden_fv = first_visit_value(h, 0.0);
    } else if (beliefs == nullptr) {
      own.emplace(config, conjecture);
      beliefs = &*own;
    }
    std::map<double, std::pair<double, double>> off_path;
    for (const auto& s : actual) {
      PreparedFirm f;
      double acc = 0.0;
      for (const auto& c : s.components()) {
        acc += c.weight;
        f.cumulative.push_back(acc);
        double z, fv;
        if (hidden_z) {
          z = *hidden_z;
          fv = *hidden_fv;
        } else if (const auto* b = beliefs->find(c.price)) {
          z = b->reservation;
          fv = b->first_visit;
        } else {
          auto it = off_path.find(c.price);
          if (it == off_path.end()) {
            const auto b2 = beliefs->at(c.price);
            it = off_path.emplace(c.price, std::make_pair(b2.reservation, b2.first_visit)).first;
          }
          z = it->second.first;
          fv = it->second.second;
        }
        f.components.push_back({c.price, Sampler(c.dist), z, fv});
      }
      f.cumulative.back() = 1.0;
      firms_.push_back(std::move(f));
    }
  }

  std::size_t size() const { return firms_.size(); }
  std::size_t components(std::size_t firm) const { return firms_[firm].components.size(); }
  double cost() const { return cost_; }

  struct Trial {
    SearchPlan plan;
    SearchResult result;
    std::vector<std::size_t> component;
    std::vector<double> surplus;
  };

  /// One consumer. Stream 0 drives ordering and tie-breaks; stream 1 + i drives
  /// firm i's component and value draws.
  void run(std::uint64_t seed, std::uint64_t trial, Trial& out) const {
    const std::size_t n = firms_.size();
    out.component.resize(n);
    out.surplus.resize(n);
    ConsumerPolicy policy;
    policy.regime = regime_;
    policy.reservation.resize(n);
    policy.first_visit_value.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      CounterStream rng(seed, trial, 1 + i);
      const auto& firm = firms_[i];
      const std::size_t k = firm.components.size() == 1 ? 0 : firm.pick(rng.uniform());
      const auto& comp = firm.components[k];
      const double x = comp.sampler(rng.uniform());
      out.component[i] = k;
      out.surplus[i] = x - comp.price;
      policy.reservation[i] = comp.reservation;
      policy.first_visit_value[i] = comp.first_visit;
    }
    CounterStream order_rng(seed, trial, 0);
    out.plan = plan_search(policy, order_rng);
    out.result = run_search(out.plan, out.surplus, cost_, order_rng);
  }

  double price_of(std::size_t firm, std::size_t component) const {
    return firms_[firm].components[component].price;
  }

 private:
  double cost_;
  Regime regime_;
  std::vector<PreparedFirm> firms_;
};

struct FirmTally {
  Moments revenue;          // per consumer
  Moments revenue_visited;  // per visit
  std::int64_t purchases = 0;
  std::vector<std::int64_t> component_visits;
};

struct Tally {
  std::vector<FirmTally> firms;
  Moments utility;
  Moments visits;
  std::int64_t purchases = 0;
  double cost_paid = 0.0;
  double value = 0.0;

  void merge(const Tally& o) {
    if (firms.size() < o.firms.size()) firms.resize(o.firms.size());
    for (std::size_t i = 0; i < o.firms.size(); ++i) {
      firms[i].revenue.merge(o.firms[i].revenue);
      firms[i].revenue_visited.merge(o.firms[i].revenue_visited);
      firms[i].purchases += o.firms[i].purchases;
      auto& cv = firms[i].component_visits;
      if (cv.size() < o.firms[i].component_visits.size()) cv.resize(o.firms[i].component_visits.size());
      for (std::size_t k = 0; k < o.firms[i].component_visits.size(); ++k) cv[k] += o.firms[i].component_visits[k];
    }
    utility.merge(o.utility);
    visits.merge(o.visits);
    purchases += o.purchases;
    cost_paid += o.cost_paid;
    value += o.value;
  }
};

inline std::vector<FirmStrategy> expand_actual(const MarketConfig& config,
                                               const std::vector<FirmStrategy>& actual) {
  if (actual.size() == static_cast<std::size_t>(config.n)) return actual;
  if (actual.size() == 1) return std::vector<FirmStrategy>(static_cast<std::size_t>(config.n), actual[0]);
  throw std::invalid_argument("simulate_market: expected " + std::to_string(config.n) +
                              " strategies, got " + std::to_string(actual.size()));
}

inline MarketOutcome infinite_outcome(const MarketConfig& config,
                                      const std::vector<FirmStrategy>& actual,
                                      const FirmStrategy& conjecture) {
  MarketOutcome out;
  out.analytic = true;
  const auto h = net_value_mixture(conjecture);
  const double z = reservation_value(h, 0.0, config.cost);
  const double stop = h.survival(z);
  if (!(stop > 0.0)) throw std::invalid_argument("simulate_market: consumers never stop");
  for (const auto& s : actual) {
    FirmOutcome f;
    const double p = analytic_first_visit_profit(conjecture, s, config.cost);
    f.profit = {p, 0.0};
    f.profit_per_visit = {p, 0.0};
    f.visit_probability = 1.0;
    double sell = 0.0;
    for (const auto& c : s.components()) sell += c.weight * c.dist.survival(z + c.price);
    f.purchase_given_visit = sell;
    for (const auto& c : s.components()) f.component_visit_probability.push_back(c.weight);
    out.firms.push_back(f);
  }
  // Stationary search: E[S | S >= z] = z + c / P(S >= z), visits ~ Geometric.
  const double visits = 1.0 / stop;
  out.consumer.visits = {visits, 0.0};
  out.consumer.search_cost_paid = config.cost * (visits - 1.0);
  out.consumer.surplus = {z + config.cost, 0.0};
  out.consumer.purchase_probability = 1.0;
  double value = 0.0;
  for (const auto& c : conjecture.components()) {
    const double t = z + c.price;
    value += c.weight * (c.dist.expected_excess(t) + t * c.dist.survival(t));
  }
  out.consumer.value_purchased = value / stop;
  return out;
}

}  // namespace detail

/// Monte Carlo market outcome. `actual` lists one strategy per firm (or one
/// strategy shared by all); the consumer's beliefs come only from `conjecture`,
/// plus the off-path rule for unlisted posted prices.
inline MarketOutcome simulate_market(const MarketConfig& config, const std::vector<FirmStrategy>& actual,
                                     const FirmStrategy& conjecture, const Beliefs* beliefs = nullptr) {
  config.validate();
  if (config.infinite) return detail::infinite_outcome(config, actual, conjecture);
  const auto firms = detail::expand_actual(config, actual);
  const detail::PreparedMarket market(config, firms, conjecture, beliefs);
  const std::size_t n = market.size();

  detail::Tally init;
  init.firms.resize(n);
  const detail::Tally tally = chunked_reduce(
      config.trials, config.threads, init,
      [&](std::int64_t begin, std::int64_t end) {
        detail::Tally t;
        t.firms.resize(n);
        for (std::size_t i = 0; i < n; ++i) t.firms[i].component_visits.assign(market.components(i), 0);
        detail::PreparedMarket::Trial trial;
        std::vector<char> visited(n);
        for (std::int64_t k = begin; k < end; ++k) {
          market.run(config.seed, static_cast<std::uint64_t>(k), trial);
          const auto& r = trial.result;
          std::fill(visited.begin(), visited.end(), 0);
          for (std::size_t pos = 0; pos < r.visits; ++pos) visited[trial.plan.order[pos]] = 1;
          for (std::size_t i = 0; i < n; ++i) {
            double rev = 0.0;
            if (r.purchase && *r.purchase == i) {
              rev = market.price_of(i, trial.component[i]);
              ++t.firms[i].purchases;
            }
            t.firms[i].revenue.add(rev);
            if (visited[i]) {
              t.firms[i].revenue_visited.add(rev);
              ++t.firms[i].component_visits[trial.component[i]];
            }
          }
          t.utility.add(r.utility);
          t.visits.add(static_cast<double>(r.visits));
          const double paid = config.cost * static_cast<double>(r.visits - 1);
          t.cost_paid += paid;
          if (r.purchase) {
            ++t.purchases;
            t.value += r.value + market.price_of(*r.purchase, trial.component[*r.purchase]);
          }
        }
        return t;
      },
      [](detail::Tally& a, const detail::Tally& b) { a.merge(b); });

  MarketOutcome out;
  out.trials = config.trials;
  const double trials = static_cast<double>(config.trials);
  for (const auto& f : tally.firms) {
    FirmOutcome o;
    o.profit = f.revenue.estimate();
    o.profit_per_visit = f.revenue_visited.estimate();
    o.visit_probability = static_cast<double>(f.revenue_visited.count) / trials;
    o.purchase_given_visit =
        f.revenue_visited.count > 0
            ? static_cast<double>(f.purchases) / static_cast<double>(f.revenue_visited.count)
            : 0.0;
    for (auto v : f.component_visits) o.component_visit_probability.push_back(static_cast<double>(v) / trials);
    out.firms.push_back(o);
  }
  out.consumer.surplus = tally.utility.estimate();
  out.consumer.visits = tally.visits.estimate();
  out.consumer.purchase_probability = static_cast<double>(tally.purchases) / trials;
  out.consumer.search_cost_paid = tally.cost_paid / trials;
  out.consumer.value_purchased = tally.value / trials;
  return out;
}

/// Replays a single consumer; exposes the visit order for instrumentation.
inline detail::PreparedMarket::Trial trace_trial(const MarketConfig& config,
                                                 const std::vector<FirmStrategy>& actual,
                                                 const FirmStrategy& conjecture, std::uint64_t trial) {
  const detail::PreparedMarket market(config, detail::expand_actual(config, actual), conjecture);
  detail::PreparedMarket::Trial t;
  market.run(config.seed, trial, t);
  return t;
}

}  // namespace diamond
