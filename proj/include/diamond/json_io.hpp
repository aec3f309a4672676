// JSON and CSV encodings for distributions, strategies, market specs,
// outcomes, deviation witnesses and certification reports. Parse errors carry
// the path of the offending field.
#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "diamond/dist.hpp"
#include "diamond/equilibrium.hpp"
#include "diamond/market.hpp"
#include "diamond/persuade.hpp"
#include "diamond/strategy.hpp"

namespace diamond {

using Json = nlohmann::json;

class SpecError : public std::invalid_argument {
 public:
  SpecError(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

namespace json_detail {

inline const Json& member(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw SpecError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SpecError(path + "." + key, "missing");
  return *it;
}

inline double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw SpecError(path, "expected a number");
  return j.get<double>();
}

inline std::int64_t integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SpecError(path, "expected an integer");
  return j.get<std::int64_t>();
}

inline const Json& array(const Json& j, const std::string& path) {
  if (!j.is_array()) throw SpecError(path, "expected an array");
  return j;
}

template <class F>
auto wrap(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const SpecError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw SpecError(path, e.what());
  }
}

}  // namespace json_detail

// ---- distributions ----

inline Json to_json(const ValueDistribution& f) {
  Json atoms = Json::array();
  for (const auto& a : f.atoms()) atoms.push_back({a.x, a.mass});
  Json segs = Json::array();
  for (const auto& s : f.segments()) segs.push_back({s.lo, s.hi, s.mass});
  return {{"support", {f.support_lo(), f.support_hi()}}, {"atoms", atoms}, {"segments", segs}};
}

/// Accepts the canonical object, or the shorthands {"uniform": true},
/// {"degenerate": mu} and {"bernoulli": mean}.
inline ValueDistribution dist_from_json(const Json& j, const std::string& path = "dist") {
  using namespace json_detail;
  if (!j.is_object()) throw SpecError(path, "expected an object");
  double lo = 0.0, hi = 1.0;
  if (j.contains("support")) {
    const auto& s = array(j["support"], path + ".support");
    if (s.size() != 2) throw SpecError(path + ".support", "expected [lo, hi]");
    lo = number(s[0], path + ".support[0]");
    hi = number(s[1], path + ".support[1]");
  }
  if (j.contains("uniform")) return wrap(path, [&] { return ValueDistribution::uniform(lo, hi); });
  if (j.contains("degenerate")) {
    const double mu = number(j["degenerate"], path + ".degenerate");
    return wrap(path, [&] { return ValueDistribution::degenerate(mu, lo, hi); });
  }
  if (j.contains("bernoulli")) {
    const double m = number(j["bernoulli"], path + ".bernoulli");
    return wrap(path, [&] { return ValueDistribution::bernoulli(m, lo, hi); });
  }
  std::vector<Atom> atoms;
  std::vector<Segment> segs;
  if (j.contains("atoms")) {
    const auto& a = array(j["atoms"], path + ".atoms");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = path + ".atoms[" + std::to_string(i) + "]";
      if (!a[i].is_array() || a[i].size() != 2) throw SpecError(p, "expected [x, mass]");
      atoms.push_back({number(a[i][0], p + "[0]"), number(a[i][1], p + "[1]")});
    }
  }
  if (j.contains("segments")) {
    const auto& a = array(j["segments"], path + ".segments");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string p = path + ".segments[" + std::to_string(i) + "]";
      if (!a[i].is_array() || a[i].size() != 3) throw SpecError(p, "expected [lo, hi, mass]");
      segs.push_back({number(a[i][0], p + "[0]"), number(a[i][1], p + "[1]"), number(a[i][2], p + "[2]")});
    }
  }
  if (atoms.empty() && segs.empty()) throw SpecError(path, "needs atoms or segments");
  return wrap(path, [&] { return ValueDistribution(lo, hi, std::move(atoms), std::move(segs)); });
}

inline Json to_json(const FusionSpec& s) {
  Json r = Json::array();
  for (const auto& g : s.regions) r.push_back({g.lo, g.hi, g.fraction});
  return {{"regions", r}};
}

inline FusionSpec fusion_spec_from_json(const Json& j, const std::string& path = "fusion") {
  using namespace json_detail;
  const auto& r = array(member(j, "regions", path), path + ".regions");
  FusionSpec s;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const std::string p = path + ".regions[" + std::to_string(i) + "]";
    if (!r[i].is_array() || r[i].size() != 3) throw SpecError(p, "expected [lo, hi, fraction]");
    s.regions.push_back({number(r[i][0], p + "[0]"), number(r[i][1], p + "[1]"), number(r[i][2], p + "[2]")});
  }
  return s;
}

// ---- strategies ----

inline Json to_json(const FirmStrategy& s) {
  if (s.is_pure()) {
    const auto& c = s.components().front();
    return {{"price", c.price}, {"dist", to_json(c.dist)}};
  }
  Json mix = Json::array();
  for (const auto& c : s.components())
    mix.push_back({{"weight", c.weight}, {"price", c.price}, {"dist", to_json(c.dist)}});
  return {{"mixture", mix}};
}

/// Pure {"price", "dist"}, mixed {"mixture": [{"weight", "price", "dist"}]},
/// or the built-in {"generator": "example2_phi", "components": K}.
inline FirmStrategy strategy_from_json(const Json& j, const std::string& path = "strategy") {
  using namespace json_detail;
  if (!j.is_object()) throw SpecError(path, "expected an object");
  if (j.contains("generator")) {
    const auto& g = j["generator"];
    if (!g.is_string() || g.get<std::string>() != "example2_phi")
      throw SpecError(path + ".generator", "unknown generator (known: example2_phi)");
    const int k = j.contains("components") ? static_cast<int>(integer(j["components"], path + ".components"))
                                           : 16385;
    return wrap(path, [&] { return example2_strategy(k); });
  }
  if (j.contains("mixture")) {
    const auto& m = array(j["mixture"], path + ".mixture");
    std::vector<StrategyComponent> comps;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const std::string p = path + ".mixture[" + std::to_string(i) + "]";
      comps.push_back({number(member(m[i], "weight", p), p + ".weight"),
                       number(member(m[i], "price", p), p + ".price"),
                       dist_from_json(member(m[i], "dist", p), p + ".dist")});
    }
    return wrap(path, [&] { return FirmStrategy(std::move(comps)); });
  }
  const double price = number(member(j, "price", path), path + ".price");
  auto dist = dist_from_json(member(j, "dist", path), path + ".dist");
  return wrap(path, [&] { return FirmStrategy::pure(price, std::move(dist)); });
}

// ---- market specs ----

struct MarketSpec {
  MarketConfig config;
  std::vector<FirmStrategy> strategies;  // one per firm, or one shared
  std::optional<FirmStrategy> conjecture;

  const FirmStrategy& conjectured() const { return conjecture ? *conjecture : strategies.front(); }
};

inline const char* to_string(Regime r) { return r == Regime::hidden ? "hidden" : "posted"; }
inline const char* to_string(OffPathRule r) {
  return r == OffPathRule::uninformative ? "uninformative" : "pessimistic";
}

inline Json to_json(const MarketConfig& c) {
  Json j;
  if (c.infinite) j["n"] = "infinite";
  else j["n"] = c.n;
  j["prior"] = to_json(c.prior);
  j["cost"] = c.cost;
  j["regime"] = to_string(c.regime);
  j["off_path_belief"] = to_string(c.off_path);
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  return j;
}

inline MarketConfig market_config_from_json(const Json& j, const std::string& path = "market") {
  using namespace json_detail;
  if (!j.is_object()) throw SpecError(path, "expected an object");
  MarketConfig c;
  if (j.contains("n")) {
    const auto& n = j["n"];
    if (n.is_string() && n.get<std::string>() == "infinite") {
      c.infinite = true;
    } else {
      const auto v = integer(n, path + ".n");
      if (v < 1) throw SpecError(path + ".n", "must be >= 1 or \"infinite\"");
      c.n = static_cast<int>(v);
    }
  }
  if (j.contains("prior")) c.prior = dist_from_json(j["prior"], path + ".prior");
  if (j.contains("cost")) {
    c.cost = number(j["cost"], path + ".cost");
    if (!(c.cost > 0.0)) throw SpecError(path + ".cost", "must be positive");
  }
  if (j.contains("regime")) {
    const auto& r = j["regime"];
    if (r == "hidden") c.regime = Regime::hidden;
    else if (r == "posted") c.regime = Regime::posted;
    else throw SpecError(path + ".regime", "expected \"hidden\" or \"posted\"");
  }
  if (j.contains("off_path_belief")) {
    const auto& r = j["off_path_belief"];
    if (r == "uninformative") c.off_path = OffPathRule::uninformative;
    else if (r == "pessimistic") c.off_path = OffPathRule::pessimistic;
    else throw SpecError(path + ".off_path_belief", "expected \"uninformative\" or \"pessimistic\"");
  }
  if (j.contains("trials")) {
    c.trials = integer(j["trials"], path + ".trials");
    if (c.trials < 1) throw SpecError(path + ".trials", "must be >= 1");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      throw SpecError(path + ".seed", "expected a non-negative integer");
    if (j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() < 0)
      throw SpecError(path + ".seed", "expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (c.prior.support_lo() != 0.0 || c.prior.support_hi() != 1.0)
    throw SpecError(path + ".prior", "must be supported on [0, 1]");
  return c;
}

inline MarketSpec market_spec_from_json(const Json& j, const std::string& path = "market") {
  using namespace json_detail;
  MarketSpec s;
  s.config = market_config_from_json(j, path);
  if (j.contains("strategies")) {
    const auto& a = array(j["strategies"], path + ".strategies");
    for (std::size_t i = 0; i < a.size(); ++i)
      s.strategies.push_back(strategy_from_json(a[i], path + ".strategies[" + std::to_string(i) + "]"));
  }
  if (j.contains("conjecture")) s.conjecture = strategy_from_json(j["conjecture"], path + ".conjecture");
  if (s.strategies.empty()) {
    if (!s.conjecture) throw SpecError(path + ".strategies", "missing (and no conjecture to replicate)");
    s.strategies.push_back(*s.conjecture);
  }
  if (!s.config.infinite && s.strategies.size() != 1 &&
      s.strategies.size() != static_cast<std::size_t>(s.config.n))
    throw SpecError(path + ".strategies", "expected 1 or n entries");
  return s;
}

inline Json to_json(const MarketSpec& s) {
  Json j = to_json(s.config);
  Json st = Json::array();
  for (const auto& f : s.strategies) st.push_back(to_json(f));
  j["strategies"] = st;
  j["conjecture"] = to_json(s.conjectured());
  return j;
}

// ---- outcomes ----

inline Json to_json(const Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }

inline Json to_json(const MarketOutcome& o) {
  Json firms = Json::array();
  for (std::size_t i = 0; i < o.firms.size(); ++i) {
    const auto& f = o.firms[i];
    firms.push_back({{"firm", i},
                     {"profit", to_json(f.profit)},
                     {"profit_per_visit", to_json(f.profit_per_visit)},
                     {"visit_probability", f.visit_probability},
                     {"purchase_given_visit", f.purchase_given_visit}});
  }
  return {{"trials", o.trials},
          {"analytic", o.analytic},
          {"firms", firms},
          {"consumer",
           {{"surplus", to_json(o.consumer.surplus)},
            {"visits", to_json(o.consumer.visits)},
            {"purchase_probability", o.consumer.purchase_probability},
            {"search_cost_paid", o.consumer.search_cost_paid},
            {"value_purchased", o.consumer.value_purchased}}}};
}

inline const char* kOutcomeCsvHeader =
    "row,profit,profit_se,profit_per_visit,profit_per_visit_se,visit_probability,purchase_given_visit,"
    "surplus,surplus_se,visits,visits_se,purchase_probability,search_cost_paid,value_purchased";

/// One row per firm ("firm<i>") followed by a "consumer" row; unused cells are empty.
inline std::string outcome_csv(const MarketOutcome& o) {
  std::ostringstream out;
  out.precision(17);
  out << kOutcomeCsvHeader << '\n';
  for (std::size_t i = 0; i < o.firms.size(); ++i) {
    const auto& f = o.firms[i];
    out << "firm" << i << ',' << f.profit.value << ',' << f.profit.se << ',' << f.profit_per_visit.value
        << ',' << f.profit_per_visit.se << ',' << f.visit_probability << ',' << f.purchase_given_visit
        << ",,,,,,,\n";
  }
  const auto& c = o.consumer;
  out << "consumer,,,,,,," << c.surplus.value << ',' << c.surplus.se << ',' << c.visits.value << ','
      << c.visits.se << ',' << c.purchase_probability << ',' << c.search_cost_paid << ','
      << c.value_purchased << '\n';
  return out.str();
}

// ---- persuasion ----

inline Json to_json(const Splitting& s) {
  Json p = Json::array();
  for (const auto& q : s.posteriors) p.push_back({{"location", q.location}, {"weight", q.weight}});
  return {{"posteriors", p}, {"value", s.value}, {"se", s.se}};
}

inline PayoffCurve curve_from_json(const Json& j, const std::string& path = "curve") {
  using namespace json_detail;
  PayoffCurve c;
  const auto& g = array(member(j, "grid", path), path + ".grid");
  const auto& v = array(member(j, "values", path), path + ".values");
  for (std::size_t i = 0; i < g.size(); ++i) c.grid.push_back(number(g[i], path + ".grid[" + std::to_string(i) + "]"));
  for (std::size_t i = 0; i < v.size(); ++i)
    c.values.push_back(number(v[i], path + ".values[" + std::to_string(i) + "]"));
  if (j.contains("se")) {
    const auto& s = array(j["se"], path + ".se");
    for (std::size_t i = 0; i < s.size(); ++i) c.se.push_back(number(s[i], path + ".se[" + std::to_string(i) + "]"));
  }
  wrap(path, [&] {
    c.validate();
    return 0;
  });
  return c;
}

inline Json to_json(const Envelope& e) {
  Json v = Json::array();
  for (auto i : e.vertices) v.push_back({e.curve.grid[i], e.curve.values[i]});
  return {{"vertices", v}};
}

/// Columns x, V, V_hat (V_hat is the least concave majorant on the same grid).
inline std::string curve_csv(const PayoffCurve& v, const Envelope& e) {
  std::ostringstream out;
  out.precision(17);
  out << "x,V,V_hat\n";
  for (std::size_t i = 0; i < v.grid.size(); ++i)
    out << v.grid[i] << ',' << v.values[i] << ',' << e.curve.values[i] << '\n';
  return out.str();
}

// ---- equilibrium ----

inline Json to_json(const DeviationWitness& w) {
  Json j{{"class", to_string(w.kind)},
         {"price", w.price},
         {"law", to_json(w.law)},
         {"basis", to_string(w.basis)},
         {"baseline_profit", w.baseline_profit},
         {"deviation_profit", w.deviation_profit},
         {"gain", w.gain},
         {"gain_se", w.gain_se},
         {"exact", w.exact},
         {"expected_gain", w.expected_gain},
         {"strategy", to_json(w.strategy)}};
  Json prov = Json::object();
  if (w.fusion) {
    const auto& f = *w.fusion;
    prov = {{"regions", to_json(f.spec)["regions"]},
            {"threshold", f.threshold},
            {"target", f.target},
            {"atom", f.atom},
            {"below_mass", f.below_mass},
            {"moved_mass", f.moved_mass},
            {"epsilon", f.epsilon},
            {"alpha", f.alpha},
            {"alpha_exact", f.alpha_exact}};
  }
  if (w.price_menu) {
    prov = {{"reference_price", w.price_menu->reference_price},
            {"offset", w.price_menu->offset},
            {"no_information", w.price_menu->no_information}};
  }
  if (w.concavification) {
    const auto& c = *w.concavification;
    prov = {{"splitting", to_json(c.splitting)},
            {"grid_step", c.grid_step},
            {"grid_points", c.grid_points},
            {"envelope_at_prior", c.envelope_at_prior}};
  }
  j["provenance"] = prov;
  return j;
}

inline Json to_json(const CheckOptions& o) {
  Json classes = Json::array();
  for (auto c : o.classes) classes.push_back(to_string(c));
  return {{"classes", classes},
          {"price_grid_points", o.price_grid_points},
          {"epsilon", o.epsilon},
          {"fusion_margin", o.fusion_margin},
          {"sigmas", o.sigmas},
          {"tolerance", o.tolerance},
          {"exact_tolerance", o.exact_tolerance},
          {"curve_grid_step", o.curve_grid_step},
          {"eval_trials", o.eval_trials},
          {"max_concavification_prices", o.max_concavification_prices},
          {"max_fusion_simulations", o.max_fusion_simulations},
          {"mpc_tolerance", o.mpc_tolerance}};
}

inline Json to_json(const CertificationReport& r) {
  Json verdicts = Json::array();
  for (const auto& v : r.verdicts) {
    Json by_price = Json::array();
    for (const auto& w : v.by_price) by_price.push_back(to_json(w));
    verdicts.push_back({{"class", to_string(v.kind)},
                        {"by_price", by_price},
                        {"verdict", v.witness ? "witness" : "none_found"},
                        {"witnesses_found", v.witnesses_found},
                        {"evaluations", v.evaluations},
                        {"notes", v.notes},
                        {"witness", v.witness ? to_json(*v.witness) : Json(nullptr)}});
  }
  return {{"certified", r.certified},
          {"scope", r.scope},
          {"candidate",
           {{"outcome", to_json(r.candidate)},
            {"profit_per_visit", r.candidate_profit_per_visit},
            {"profit_per_visit_exact", r.candidate_exact}}},
          {"verdicts", verdicts},
          {"strongest", r.strongest ? to_json(*r.strongest) : Json(nullptr)},
          {"options", to_json(r.options)},
          {"price_grid", r.price_grid}};
}

}  // namespace diamond
