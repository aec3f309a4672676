// Reproduction cases. Each case recomputes its quantities from scratch and
// only then compares them with the bundled manifest of expected values.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "diamond/dist.hpp"
#include "diamond/equilibrium.hpp"
#include "diamond/json_io.hpp"
#include "diamond/market.hpp"
#include "diamond/persuade.hpp"
#include "diamond/search.hpp"
#include "diamond/strategy.hpp"

namespace diamond {

/// Expected value of one reproduced quantity. `source` is "stated" for values
/// given in the source text and "derived" for values worked out independently.
struct ManifestEntry {
  const char* case_name;
  const char* quantity;
  double expected;
  const char* source;
};

inline const std::vector<ManifestEntry>& repro_manifest() {
  static const std::vector<ManifestEntry> m{
      {"example1", "reservation_value", 0.5, "stated"},
      {"example1", "baseline_profit", 1.0 / 16.0, "stated"},
      {"example1", "deviation_profit", 1.0 / 8.0, "stated"},
      {"example1", "fusion_gain", 1.0 / 16.0, "derived"},
      {"example2", "V(0)", 0.0, "stated"},
      {"example2", "V(7/16)", 7.0 / 32.0, "stated"},
      {"example2", "V(0.6)", 49.0 / 182.4, "stated"},
      {"example2", "V(7/8)", 7.0 / 16.0, "stated"},
      {"example2", "V(1)", 7.0 / 16.0, "stated"},
      {"example2", "full_information_value", 7.0 / 32.0, "derived"},
      {"example2", "envelope_at_prior", 0.25, "derived"},
      {"example2", "split_low", 0.0, "derived"},
      {"example2", "split_high", 7.0 / 8.0, "derived"},
      {"example2", "weight_low", 3.0 / 7.0, "derived"},
      {"example2", "weight_high", 4.0 / 7.0, "derived"},
      {"theorem1", "profit_per_visit", 0.5, "stated"},
      {"theorem1", "consumer_surplus", 0.0, "stated"},
      {"theorem1", "visits", 1.0, "stated"},
      {"theorem1", "certified", 1.0, "derived"},
      {"theorem2", "firm_profit", 0.0, "stated"},
      {"theorem2", "consumer_surplus", 0.5, "stated"},
      {"theorem2", "certified", 1.0, "derived"},
  };
  return m;
}

inline constexpr std::array<std::string_view, 4> kReproCases{"example1", "example2", "theorem1", "theorem2"};

struct ReproOptions {
  std::uint64_t seed = 1;
  std::int64_t trials = 100000;
  double grid_step = 1e-4;   // envelope grid and CSV resolution
  double tol = 1e-9;         // for closed-form quantities
  double sigmas = 3.0;       // for simulated quantities
  std::int64_t check_trials = 20000;
  unsigned threads = 0;
};

struct ReproCheck {
  std::string quantity;
  double expected;
  std::string source;
  double computed;
  double se;         // 0 for closed-form quantities
  double tolerance;  // allowed |computed - expected|
  bool passed;
};

struct ReproResult {
  std::string name;
  Json parameters;
  Json details;
  std::vector<ReproCheck> checks;
  std::string csv;  // figure data, when the case has any

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

namespace detail {

class ReproBuilder {
 public:
  ReproBuilder(std::string name, const ReproOptions& o) : o_(o) { r_.name = std::move(name); }

  void exact(const std::string& q, double computed) { add(q, computed, 0.0, o_.tol); }
  void simulated(const std::string& q, Estimate e) { add(q, e.value, e.se, o_.sigmas * e.se + 1e-12); }

  ReproResult& result() { return r_; }

 private:
  void add(const std::string& q, double computed, double se, double tol) {
    for (const auto& m : repro_manifest()) {
      if (r_.name == m.case_name && q == m.quantity) {
        const bool ok = std::isfinite(computed) && std::abs(computed - m.expected) <= tol;
        r_.checks.push_back({q, m.expected, m.source, computed, se, tol, ok});
        return;
      }
    }
    throw std::logic_error("repro: no manifest entry for " + r_.name + "/" + q);
  }

  ReproOptions o_;
  ReproResult r_;
};

inline ReproResult repro_example1(const ReproOptions& o) {
  ReproBuilder b("example1", o);
  MarketConfig cfg;
  cfg.infinite = true;
  cfg.prior = ValueDistribution::uniform();
  cfg.cost = 1.0 / 32.0;
  cfg.regime = Regime::hidden;
  cfg.seed = o.seed;
  cfg.trials = o.trials;
  cfg.threads = o.threads;
  const double price = 0.25;
  const auto conj = FirmStrategy::pure(price, cfg.prior);

  const double z = reservation_value(cfg.prior, price, cfg.cost);
  b.exact("reservation_value", z);
  b.exact("baseline_profit", analytic_first_visit_profit(conj, conj, cfg.cost));

  CheckOptions opts;
  const auto w = fusion_deviation_search(conj, cfg, opts);
  if (!w) throw std::runtime_error("example1: fusion search found no witness");
  b.exact("deviation_profit", analytic_first_visit_profit(conj, FirmStrategy::pure(price, w->law), cfg.cost));
  b.exact("fusion_gain", w->gain);

  auto& r = b.result();
  r.parameters = to_json(cfg);
  r.parameters["price"] = price;
  r.details = {{"witness", to_json(*w)}};

  std::ostringstream csv;
  csv.precision(17);
  csv << "x,F_tilde,F_hat\n";
  const auto grid = uniform_grid(std::max(o.grid_step, 1e-4));
  for (double x : grid) csv << x << ',' << cfg.prior.cdf_at(x) << ',' << w->law.cdf_at(x) << '\n';
  r.csv = csv.str();
  return r;
}

inline ReproResult repro_example2(const ReproOptions& o) {
  ReproBuilder b("example2", o);
  MarketConfig cfg;
  cfg.n = 2;
  cfg.prior = ValueDistribution::bernoulli(0.5);
  cfg.cost = 1.0 / 16.0;
  cfg.regime = Regime::posted;
  cfg.seed = o.seed;
  cfg.trials = o.trials;
  cfg.threads = o.threads;
  const double price = 7.0 / 16.0;
  const auto phi = example2_strategy();

  b.exact("V(0)", example2_payoff(0.0));
  b.exact("V(7/16)", example2_payoff(7.0 / 16.0));
  b.exact("V(0.6)", example2_payoff(0.6));
  b.exact("V(7/8)", example2_payoff(7.0 / 8.0));
  b.exact("V(1)", example2_payoff(1.0));

  // The closed form against a direct simulation of the market.
  const std::vector<double> sim_grid{0.0, 0.25, 7.0 / 16.0, 0.5, 0.6, 0.75, 7.0 / 8.0, 1.0};
  const Beliefs beliefs(cfg, phi);
  const auto sim = estimate_payoff_curve(cfg, {phi}, phi, price, sim_grid, o.trials, o.seed, &beliefs);
  Json sim_rows = Json::array();
  bool sim_ok = true;
  for (std::size_t i = 0; i < sim_grid.size(); ++i) {
    const double f = example2_payoff(sim_grid[i]);
    const bool ok = std::abs(sim.values[i] - f) <= o.sigmas * sim.se[i] + 1e-12;
    sim_ok = sim_ok && ok;
    sim_rows.push_back({{"x", sim_grid[i]}, {"closed_form", f}, {"simulated", sim.values[i]},
                        {"se", sim.se[i]}, {"within", ok}});
  }

  const PayoffCurve curve = example2_curve(o.grid_step);
  const Envelope env = concave_envelope(curve);
  const Splitting split = optimal_splitting(env, cfg.prior.mean());
  b.exact("full_information_value", 0.5 * example2_payoff(0.0) + 0.5 * example2_payoff(1.0));
  b.exact("envelope_at_prior", env(0.5));
  const auto& lo = split.posteriors.front();
  const auto& hi = split.posteriors.back();
  b.exact("split_low", lo.location);
  b.exact("split_high", hi.location);
  b.exact("weight_low", lo.weight);
  b.exact("weight_high", hi.weight);

  auto& r = b.result();
  r.checks.push_back({"simulated_curve_within_sigmas", 1.0, "derived", sim_ok ? 1.0 : 0.0, 0.0, 0.0, sim_ok});
  r.parameters = to_json(cfg);
  r.parameters["price"] = price;
  r.parameters["phi_components"] = phi.components().size();
  r.parameters["grid_step"] = o.grid_step;
  r.details = {{"simulated_curve", sim_rows}, {"splitting", to_json(split)}, {"envelope", to_json(env)}};
  r.csv = curve_csv(curve, env);
  return r;
}

inline ReproResult repro_theorem1(const ReproOptions& o) {
  ReproBuilder b("theorem1", o);
  MarketConfig cfg;
  cfg.n = 2;
  cfg.prior = ValueDistribution::uniform();
  cfg.cost = 1.0 / 32.0;
  cfg.regime = Regime::hidden;
  cfg.seed = o.seed;
  cfg.trials = o.trials;
  cfg.threads = o.threads;
  const double mu = cfg.prior.mean();
  const auto cand = FirmStrategy::pure(mu, degenerate(mu));
  const auto out = simulate_market(cfg, {cand}, cand);
  b.simulated("profit_per_visit", out.firms[0].profit_per_visit);
  b.simulated("consumer_surplus", out.consumer.surplus);
  b.exact("visits", out.consumer.visits.value);
  CheckOptions opts;
  opts.eval_trials = o.check_trials;
  const auto rep = check_symmetric_equilibrium(cand, cfg, opts);
  b.exact("certified", rep.certified ? 1.0 : 0.0);
  auto& r = b.result();
  r.parameters = to_json(cfg);
  r.parameters["price"] = mu;
  r.details = {{"outcome", to_json(out)}, {"certification", to_json(rep)}};
  return r;
}

inline ReproResult repro_theorem2(const ReproOptions& o) {
  ReproBuilder b("theorem2", o);
  MarketConfig cfg;
  cfg.n = 2;
  cfg.prior = ValueDistribution::uniform();
  cfg.cost = 1.0 / 32.0;
  cfg.regime = Regime::posted;
  cfg.off_path = OffPathRule::uninformative;
  cfg.seed = o.seed;
  cfg.trials = o.trials;
  cfg.threads = o.threads;
  const double mu = cfg.prior.mean();
  const auto cand = FirmStrategy::pure(0.0, degenerate(mu));
  const auto out = simulate_market(cfg, {cand}, cand);
  double max_profit = 0.0;
  for (const auto& f : out.firms) max_profit = std::max(max_profit, std::abs(f.profit.value));
  b.exact("firm_profit", max_profit);
  b.simulated("consumer_surplus", out.consumer.surplus);
  CheckOptions opts;
  opts.eval_trials = o.check_trials;
  const auto rep = check_symmetric_equilibrium(cand, cfg, opts);
  b.exact("certified", rep.certified ? 1.0 : 0.0);
  auto& r = b.result();
  r.parameters = to_json(cfg);
  r.parameters["price"] = 0.0;
  r.parameters["reservation_value"] = reservation_value(degenerate(mu), 0.0, cfg.cost);
  r.details = {{"outcome", to_json(out)}, {"certification", to_json(rep)}};
  return r;
}

}  // namespace detail

inline ReproResult run_repro(std::string_view name, const ReproOptions& o = {}) {
  if (name == "example1") return detail::repro_example1(o);
  if (name == "example2") return detail::repro_example2(o);
  if (name == "theorem1") return detail::repro_theorem1(o);
  if (name == "theorem2") return detail::repro_theorem2(o);
  throw std::invalid_argument("unknown repro case '" + std::string(name) +
                              "' (known: example1, example2, theorem1, theorem2)");
}

inline Json to_json(const ReproResult& r) {
  Json checks = Json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"quantity", c.quantity},
                      {"expected", c.expected},
                      {"source", c.source},
                      {"computed", c.computed},
                      {"se", c.se},
                      {"tolerance", c.tolerance},
                      {"passed", c.passed}});
  return {{"case", r.name}, {"passed", r.passed()}, {"parameters", r.parameters}, {"checks", checks},
          {"details", r.details}};
}

}  // namespace diamond
