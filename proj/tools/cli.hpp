// Command-line front end. run_cli() is separate from main() so tests can drive
// it in-process.
#pragma once

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "diamond/diamond.hpp"

namespace diamond::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitRepro = 2;

inline constexpr const char* kFooter = R"(
JSON arguments accept inline JSON or a path to a JSON file.

CSV side files (--csv PATH):
  simulate  row,profit,profit_se,profit_per_visit,profit_per_visit_se,visit_probability,
            purchase_given_visit,surplus,surplus_se,visits,visits_se,purchase_probability,
            search_cost_paid,value_purchased  (one row per firm "firm<i>", then "consumer")
  envelope  x,V,V_hat    payoff of posterior and its least concave majorant
  repro example1  x,F_tilde,F_hat    conjectured and fused CDFs
  repro example2  x,V,V_hat          payoff curve at price 7/16 and its envelope

Exit codes: 0 success, 1 input error, 2 failed reproduction check.)";

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> trials;
  std::optional<double> tol;
  std::optional<double> grid_step;
  unsigned threads = 0;
  std::string out;
  std::string csv;
};

inline Json load_json(const std::string& arg, const std::string& field) {
  if (arg.empty()) throw SpecError(field, "missing");
  std::string text;
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (arg[first] == '{' || arg[first] == '[')) {
    text = arg;
  } else {
    std::ifstream in(arg);
    if (!in) throw SpecError(field, "cannot open file '" + arg + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SpecError(field, std::string("malformed JSON: ") + e.what());
  }
}

inline void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

inline void emit(const Globals& g, const Json& j, std::ostream& out) { write_text(g.out, j.dump(2) + "\n", out); }

inline void apply_globals(const Globals& g, MarketConfig& c) {
  if (g.seed) c.seed = *g.seed;
  if (g.trials) c.trials = *g.trials;
  c.threads = g.threads;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Sequential search with persuasion: solvers, market simulation and deviation checks"};
  app.footer(kFooter);
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed (overrides --spec)");
  app.add_option("--trials", g.trials, "Monte Carlo trials (overrides --spec)")->check(CLI::PositiveNumber);
  app.add_option("--tol", g.tol, "Tolerance: solver residual, closed-form repro checks");
  app.add_option("--grid-step", g.grid_step, "Grid step for payoff curves and CSV output")
      ->check(CLI::Range(1e-6, 1.0));
  app.add_option("--threads", g.threads, "Worker threads, 0 = all cores; never changes results");
  app.add_option("--out", g.out, "Write the JSON report here instead of stdout");
  app.add_option("--csv", g.csv, "Write CSV side data here");

  // reserve
  auto* reserve = app.add_subcommand("reserve", "Reservation value z solving c = E[(X - p - z)^+]")->fallthrough();
  std::string r_dist, r_spec;
  std::optional<double> r_price, r_cost;
  reserve->add_option("--dist", r_dist, "Value distribution (JSON)");
  reserve->add_option("--price", r_price, "Price p");
  reserve->add_option("--cost", r_cost, "Search cost c > 0");
  reserve->add_option("--spec", r_spec, "JSON object with dist, price, cost");

  // envelope
  auto* envelope = app.add_subcommand("envelope", "Concave envelope and optimal splitting of a payoff curve")
                       ->fallthrough();
  std::string e_curve, e_builtin;
  double e_mean = 0.5;
  envelope->add_option("--curve", e_curve, "Curve JSON: {\"grid\": [...], \"values\": [...]}");
  envelope->add_option("--builtin", e_builtin, "Named curve (example2)");
  envelope->add_option("--prior-mean", e_mean, "Prior mean at which to split");

  // fuse
  auto* fusecmd = app.add_subcommand("fuse", "Pool mass from regions into one atom at its barycenter")->fallthrough();
  std::string f_dist, f_spec;
  fusecmd->add_option("--dist", f_dist, "Value distribution (JSON)")->required();
  fusecmd->add_option("--fusion", f_spec, "Fusion spec JSON: {\"regions\": [[lo, hi, fraction], ...]}")->required();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo market outcome")->fallthrough();
  std::string s_spec;
  simulate->add_option("--spec", s_spec, "Market spec (JSON)")->required();

  // check
  auto* check = app.add_subcommand("check", "Search deviation classes against a symmetric candidate")->fallthrough();
  std::string c_spec;
  std::vector<std::string> c_classes;
  std::optional<std::int64_t> c_eval;
  std::optional<int> c_grid_points;
  std::optional<double> c_margin;
  check->add_option("--spec", c_spec, "Market spec; the conjecture is the candidate")->required();
  check->add_option("--classes", c_classes, "fusion, price, no_info_price, concavification (default all)")
      ->delimiter(',');
  check->add_option("--eval-trials", c_eval, "Trials per simulated deviation (default: --trials)");
  check->add_option("--price-grid-points", c_grid_points, "Uniform price grid size");
  check->add_option("--fusion-margin", c_margin, "Pooled atom must clear the threshold by this much");

  // repro
  auto* repro = app.add_subcommand("repro", "Re-run a reproduction case and compare with the manifest")->fallthrough();
  std::string case_name;
  std::optional<std::int64_t> rp_check_trials;
  repro->add_option("case", case_name, "example1 | example2 | theorem1 | theorem2")->required();
  repro->add_option("--check-trials", rp_check_trials, "Trials per simulated deviation in certification");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (reserve->parsed()) {
      Json spec = r_spec.empty() ? Json::object() : load_json(r_spec, "spec");
      if (!r_dist.empty()) spec["dist"] = load_json(r_dist, "dist");
      if (r_price) spec["price"] = *r_price;
      if (r_cost) spec["cost"] = *r_cost;
      const std::string base = r_spec.empty() ? "" : "spec.";
      const auto dist = dist_from_json(json_detail::member(spec, "dist", "spec"), base + "dist");
      const double price = json_detail::number(json_detail::member(spec, "price", "spec"), base + "price");
      const double cost = json_detail::number(json_detail::member(spec, "cost", "spec"), base + "cost");
      if (!(cost > 0.0)) throw SpecError(base + "cost", "must be positive");
      const double tol = g.tol.value_or(1e-10);
      const double z = reservation_value(dist, price, cost, tol);
      emit(g, {{"reservation_value", z},
               {"residual", dist.expected_excess(price + z) - cost},
               {"dist", to_json(dist)},
               {"price", price},
               {"cost", cost},
               {"tol", tol}},
           out);
      return kExitOk;
    }

    if (envelope->parsed()) {
      PayoffCurve curve;
      std::string source;
      const double step = g.grid_step.value_or(1e-4);
      if (!e_builtin.empty()) {
        if (e_builtin != "example2") throw SpecError("builtin", "unknown curve '" + e_builtin + "' (known: example2)");
        curve = example2_curve(step);
        source = "builtin:example2";
      } else {
        curve = curve_from_json(load_json(e_curve, "curve"), "curve");
        source = "curve";
      }
      const Envelope env = concave_envelope(curve);
      const Splitting split = optimal_splitting(env, e_mean);
      if (!g.csv.empty()) write_text(g.csv, curve_csv(curve, env), out);
      emit(g, {{"source", source},
               {"grid_points", curve.grid.size()},
               {"grid_step", e_builtin.empty() ? Json(nullptr) : Json(step)},
               {"prior_mean", e_mean},
               {"envelope_at_prior", env(e_mean)},
               {"splitting", to_json(split)},
               {"envelope", to_json(env)}},
           out);
      return kExitOk;
    }

    if (fusecmd->parsed()) {
      const auto dist = dist_from_json(load_json(f_dist, "dist"), "dist");
      const auto spec = fusion_spec_from_json(load_json(f_spec, "fusion"), "fusion");
      const auto fused = json_detail::wrap("fusion", [&] { return fuse(dist, spec); });
      const double tol = g.tol.value_or(kDefaultMpcTolerance);
      emit(g, {{"fused", to_json(fused)},
               {"mean_before", dist.mean()},
               {"mean_after", fused.mean()},
               {"is_mpc", is_mpc(fused, dist, tol)},
               {"tol", tol}},
           out);
      return kExitOk;
    }

    if (simulate->parsed()) {
      auto spec = market_spec_from_json(load_json(s_spec, "spec"), "spec");
      apply_globals(g, spec.config);
      const auto outcome = json_detail::wrap("spec", [&] {
        return simulate_market(spec.config, spec.strategies, spec.conjectured());
      });
      if (!g.csv.empty()) write_text(g.csv, outcome_csv(outcome), out);
      emit(g, {{"spec", to_json(spec)}, {"outcome", to_json(outcome)}}, out);
      return kExitOk;
    }

    if (check->parsed()) {
      auto spec = market_spec_from_json(load_json(c_spec, "spec"), "spec");
      apply_globals(g, spec.config);
      CheckOptions opts;
      if (!c_classes.empty()) {
        opts.classes.clear();
        for (const auto& s : c_classes) {
          auto c = parse_deviation_class(s);
          if (!c) throw SpecError("classes", "unknown class '" + s + "'");
          opts.classes.push_back(*c);
        }
      }
      if (c_eval) opts.eval_trials = *c_eval;
      if (c_grid_points) opts.price_grid_points = *c_grid_points;
      if (c_margin) opts.fusion_margin = *c_margin;
      if (g.grid_step) opts.curve_grid_step = *g.grid_step;
      if (g.tol) opts.exact_tolerance = *g.tol;
      const auto& cand = spec.conjectured();
      const auto report =
          json_detail::wrap("spec", [&] { return check_symmetric_equilibrium(cand, spec.config, opts); });
      emit(g, {{"spec", to_json(spec)}, {"report", to_json(report)}}, out);
      return kExitOk;
    }

    if (repro->parsed()) {
      ReproOptions o;
      if (g.seed) o.seed = *g.seed;
      if (g.trials) o.trials = *g.trials;
      if (g.tol) o.tol = *g.tol;
      if (g.grid_step) o.grid_step = *g.grid_step;
      if (rp_check_trials) o.check_trials = *rp_check_trials;
      o.threads = g.threads;
      const auto r = run_repro(case_name, o);
      if (!g.csv.empty() && !r.csv.empty()) write_text(g.csv, r.csv, out);
      Json j = to_json(r);
      j["options"] = {{"seed", o.seed},
                      {"trials", o.trials},
                      {"tol", o.tol},
                      {"grid_step", o.grid_step},
                      {"sigmas", o.sigmas},
                      {"check_trials", o.check_trials}};
      emit(g, j, out);
      if (!r.passed()) {
        for (const auto& c : r.checks)
          if (!c.passed)
            err << "repro " << r.name << ": " << c.quantity << " = " << c.computed << ", expected " << c.expected
                << " (tolerance " << c.tolerance << ")\n";
        return kExitRepro;
      }
      return kExitOk;
    }
  } catch (const SpecError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace diamond::cli
