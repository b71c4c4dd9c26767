#pragma once

// Experiment orchestration: turns an ExperimentConfig into CSV/JSON files in
// an output directory, each accompanied by a manifest.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "twostage/acceptance.hpp"
#include "twostage/experiments.hpp"
#include "twostage/json_io.hpp"
#include "twostage/report.hpp"

namespace twostage {

enum ExitStatus : int { kExitPass = 0, kExitAcceptanceFailure = 1, kExitUsage = 2 };

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {"social_cost_vs_n", "payment_sensitivity",
                                                 "posted_price_comparison", "acceptance_suite",
                                                 "simulate"};
  return kinds;
}

/// Optional command-line overrides of the mechanism parameters.
struct MechanismOverrides {
  std::optional<double> gamma;
  std::optional<double> penalty_exponent;

  bool any() const { return gamma || penalty_exponent; }
  MechanismParams apply(MechanismParams p) const {
    if (gamma) p.gamma = *gamma;
    if (penalty_exponent) p.penalty_exponent = *penalty_exponent;
    p.validate();
    return p;
  }
};

struct ExperimentConfig {
  std::string kind;
  Json parameters = Json::object();
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir = "out";
  std::filesystem::path base_dir = ".";  // relative paths in parameters resolve here
  MechanismOverrides overrides;
  RunManifest manifest;                  // command, flags and config hash to record

  void validate() const {
    if (std::find(experiment_kinds().begin(), experiment_kinds().end(), kind) ==
        experiment_kinds().end())
      throw ConfigError("/kind", "unknown experiment kind '" + kind + "'");
    if (seeds.empty()) throw ConfigError("/seeds", "at least one seed is required");
  }
};

/// {"kind", "parameters": {...}, "seeds": [...], "output_dir"}; every field
/// is optional here and checked once command-line values are merged in.
inline ExperimentConfig experiment_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("", "expected an object");
  ExperimentConfig c;
  if (auto it = j.find("kind"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("/kind", "expected a string");
    c.kind = it->get<std::string>();
  }
  if (auto it = j.find("parameters"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("/parameters", "expected an object");
    c.parameters = *it;
  }
  if (auto it = j.find("seeds"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("/seeds", "expected an array");
    for (std::size_t k = 0; k < it->size(); ++k)
      c.seeds.push_back(detail::count_of((*it)[k], "/seeds/" + std::to_string(k)));
  }
  if (auto it = j.find("output_dir"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("/output_dir", "expected a string");
    c.output_dir = it->get<std::string>();
  }
  return c;
}

namespace detail {

inline double param_number(const Json& p, const char* key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : number_of(*it, std::string("/parameters/") + key);
}
inline std::size_t param_count(const Json& p, const char* key, std::size_t fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : count_of(*it, std::string("/parameters/") + key);
}

/// A parameter that is either an inline JSON object or a path to a JSON file.
inline Json param_document(const Json& p, const char* key, const std::filesystem::path& base) {
  const Json& v = require(p, key, "/parameters");
  if (v.is_object()) return v;
  if (!v.is_string()) throw ConfigError(std::string("/parameters/") + key, "expected an object or a path");
  std::filesystem::path file = v.get<std::string>();
  if (file.is_relative()) file = base / file;
  return read_json_file(file.string());
}

inline DrStudyOptions study_options(const ExperimentConfig& c) {
  DrStudyOptions o;
  o.days = param_count(c.parameters, "days", o.days);
  o.grid_points = param_count(c.parameters, "grid_points", o.grid_points);
  o.demand = param_number(c.parameters, "demand", o.demand);
  o.variance = param_number(c.parameters, "variance", o.variance);
  o.mechanism = c.overrides.apply(o.mechanism);
  if (o.days < 1) throw ConfigError("/parameters/days", "must be at least 1");
  return o;
}

inline std::ofstream open_output(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("", "cannot write '" + file.string() + "'");
  return out;
}

inline void write_series(const std::filesystem::path& file, const char* header,
                         const std::vector<SeriesPoint>& series) {
  auto out = open_output(file);
  out << header << '\n';
  for (const auto& p : series)
    out << csv_number(p.x) << ',' << csv_number(p.mean) << ',' << csv_number(p.std_error) << '\n';
}

template <TwoStageGame G>
void write_simulation(const SimulationConfig<G>& config, const std::filesystem::path& dir,
                      std::vector<std::string>& outputs) {
  const auto ledger = run_simulation(config);
  {
    auto out = open_output(dir / "ledger.csv");
    write_ledger_csv(out, *config.game, ledger);
  }
  auto summary = ledger_summary(ledger);
  summary["config_hash"] = RunManifest::hex_hash(ledger.config_hash);
  summary["penalty_audit_mismatches"] = audit_penalty_flags(ledger, config.params);
  auto out = open_output(dir / "summary.json");
  out << summary.dump(2) << '\n';
  outputs.push_back("ledger.csv");
  outputs.push_back("summary.json");
}

}  // namespace detail

/// Runs a simulation document for `days` days with `seed`, writing
/// ledger.csv and summary.json into `dir`.
inline void run_simulation_document(const Json& doc, std::size_t days, std::uint64_t seed,
                                    const MechanismOverrides& overrides,
                                    const std::filesystem::path& dir,
                                    std::vector<std::string>& outputs) {
  auto sim = simulation_from_json(doc);
  std::visit(
      [&](auto& config) {
        config.params = overrides.apply(config.params);
        if (days > 0) config.params.horizon = days;
        config.seed = seed;
        detail::write_simulation(config, dir, outputs);
      },
      sim.config);
}

/// Runs one experiment and writes its files plus manifest.json. Returns the
/// process exit status.
inline int run_experiment(ExperimentConfig config, std::ostream& log = std::cout) {
  config.validate();
  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);
  const fs::path& dir = config.output_dir;
  const Json& p = config.parameters;
  std::vector<std::string> outputs;
  int status = kExitPass;

  if (config.kind == "social_cost_vs_n") {
    const auto opt = detail::study_options(config);
    const auto series = social_cost_vs_n(detail::param_count(p, "n_min", 1),
                                         detail::param_count(p, "n_max", 8), config.seeds, opt);
    detail::write_series(dir / "social_cost_vs_n.csv", "n,mean_social_cost,stderr", series);
    outputs.push_back("social_cost_vs_n.csv");
  } else if (config.kind == "payment_sensitivity") {
    const auto opt = detail::study_options(config);
    std::vector<double> means = {0.5, 1.0, 2.0, 4.0};
    if (auto it = p.find("means"); it != p.end()) means = detail::numbers_of(*it, "/parameters/means");
    const auto series =
        payment_sensitivity(detail::param_count(p, "n", 3), means,
                            detail::param_number(p, "fixed_delta", 4.0), config.seeds, opt);
    detail::write_series(dir / "payment_sensitivity.csv",
                         "others_mean,mean_payment_received,stderr", series);
    outputs.push_back("payment_sensitivity.csv");
  } else if (config.kind == "posted_price_comparison") {
    const auto opt = detail::study_options(config);
    DrSpec spec = p.contains("instance")
                      ? dr_spec_from_json(detail::param_document(p, "instance", config.base_dir),
                                          "/parameters/instance")
                      : default_dr_spec(detail::param_count(p, "n", 3), opt.grid_points, opt.demand);
    const auto cmp = posted_price_comparison(spec, opt.days, config.seeds, opt.mechanism);
    detail::write_series(dir / "posted_price_sweep.csv", "price,mean_social_cost,stderr", cmp.sweep);
    auto out = detail::open_output(dir / "mechanism_cost.csv");
    out << "mean_social_cost,stderr,best_price,best_posted_cost,gap\n"
        << csv_number(cmp.mechanism.mean) << ',' << csv_number(cmp.mechanism.std_error) << ','
        << csv_number(cmp.sweep[cmp.best].x) << ',' << csv_number(cmp.sweep[cmp.best].mean)
        << ',' << csv_number(cmp.gap()) << '\n';
    outputs.push_back("posted_price_sweep.csv");
    outputs.push_back("mechanism_cost.csv");
  } else if (config.kind == "acceptance_suite") {
    if (config.overrides.any())
      throw ConfigError("", "acceptance criteria fix gamma and the penalty exponent; drop the overrides");
    AcceptanceOptions opt;
    if (p.contains("reference_game")) {
      auto doc = game_from_json(detail::param_document(p, "reference_game", config.base_dir),
                                "/parameters/reference_game");
      opt.game = std::move(doc.game);
      if (!doc.supertypes.empty()) opt.supertypes = std::move(doc.supertypes);
    }
    opt.dr_days = detail::param_count(p, "dr_days", opt.dr_days);
    const std::uint64_t first = config.seeds.front();
    opt.seeds20 = AcceptanceOptions::range(first, 20);
    opt.seeds50 = AcceptanceOptions::range(first, 50);
    opt.seeds100 = AcceptanceOptions::range(first, 100);
    const auto results =
        run_acceptance_suite(opt, [&](const CriterionResult& r) { print_criterion(log, r); });
    auto out = detail::open_output(dir / "acceptance_report.csv");
    out << "criterion,name,passed,detail\n";
    bool all = true;
    for (const auto& r : results) {
      all = all && r.passed;
      out << r.id << ',' << csv_field(r.name) << ',' << (r.passed ? 1 : 0) << ','
          << csv_field(r.detail) << '\n';
    }
    log << (all ? "all criteria passed" : "some criteria FAILED") << '\n';
    outputs.push_back("acceptance_report.csv");
    status = all ? kExitPass : kExitAcceptanceFailure;
  } else {  // simulate
    run_simulation_document(detail::param_document(p, "simulation", config.base_dir),
                            detail::param_count(p, "days", 0), config.seeds.front(),
                            config.overrides, dir, outputs);
  }

  RunManifest& m = config.manifest;
  if (m.kind.empty()) m.kind = config.kind;
  m.seeds = config.seeds;
  m.outputs = outputs;
  auto out = detail::open_output(dir / "manifest.json");
  out << m.to_json().dump(2) << '\n';
  return status;
}

}  // namespace twostage
