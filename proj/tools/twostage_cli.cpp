// Command-line front end: single simulations, the numerical studies, the
// acceptance suite, and manifest replay.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "twostage/run_experiment.hpp"

namespace fs = std::filesystem;
using namespace twostage;

namespace {

struct Flags {
  std::string config;
  std::size_t days = 0;
  std::uint64_t seed = 1;
  std::string seeds;
  std::string out;
  std::string kind;
  std::optional<double> gamma;
  std::optional<double> penalty_exponent;
  std::string manifest;
};

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item.front() == '-')
      throw ConfigError("--seeds", "'" + item + "' is not a nonnegative integer");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw ConfigError("--seeds", "no seeds given");
  return seeds;
}

MechanismOverrides overrides_of(const Flags& f) { return {f.gamma, f.penalty_exponent}; }

Json flags_json(const Flags& f) {
  Json j = {{"config", f.config}, {"out", f.out}};
  if (f.days) j["days"] = f.days;
  if (!f.kind.empty()) j["kind"] = f.kind;
  if (!f.seeds.empty()) j["seeds"] = f.seeds;
  else j["seed"] = f.seed;
  if (f.gamma) j["gamma"] = *f.gamma;
  if (f.penalty_exponent) j["penalty_exponent"] = *f.penalty_exponent;
  return j;
}

std::uint64_t file_hash(const std::string& path) {
  return path.empty() ? 0 : json_hash(read_json_file(path));
}

int run_simulate(const Flags& f) {
  const Json doc = read_json_file(f.config);
  const fs::path dir = f.out.empty() ? fs::path("out") : fs::path(f.out);
  fs::create_directories(dir);
  std::vector<std::string> outputs;
  run_simulation_document(doc, f.days, f.seed, overrides_of(f), dir, outputs);
  RunManifest m;
  m.command = "simulate";
  m.kind = "simulate";
  m.config_file = f.config;
  m.config_hash = json_hash(doc);
  m.seeds = {f.seed};
  m.flags = flags_json(f);
  m.outputs = outputs;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << m.to_json().dump(2) << '\n';
  std::cout << "wrote " << (dir / "ledger.csv").string() << '\n';
  return kExitPass;
}

int run_experiment_command(const Flags& f) {
  ExperimentConfig c;
  if (!f.config.empty()) {
    c = experiment_from_json(read_json_file(f.config));
    c.base_dir = fs::path(f.config).parent_path();
    if (c.base_dir.empty()) c.base_dir = ".";
    if (!c.kind.empty() && c.kind != f.kind)
      throw ConfigError("/kind", "config is for '" + c.kind + "' but '" + f.kind + "' was requested");
  }
  c.kind = f.kind;
  if (!f.seeds.empty()) c.seeds = parse_seeds(f.seeds);
  if (c.seeds.empty()) c.seeds = AcceptanceOptions::range(1, 20);
  if (!f.out.empty()) c.output_dir = f.out;
  c.overrides = overrides_of(f);
  c.manifest.command = "experiment";
  c.manifest.config_file = f.config;
  c.manifest.config_hash = file_hash(f.config);
  c.manifest.flags = flags_json(f);
  const int status = run_experiment(c, std::cout);
  std::cout << "wrote " << c.output_dir.string() << '\n';
  return status;
}

/// Re-executes the command recorded in a manifest. The config file must
/// still hash to the recorded value.
int run_rerun(const std::string& manifest_path, const std::string& out_override) {
  const Json m = read_json_file(manifest_path);
  const Json& flags = detail::require(m, "flags", "");
  Flags f;
  f.config = flags.value("config", "");
  f.out = out_override.empty() ? flags.value("out", "") : out_override;
  f.days = flags.value("days", std::size_t{0});
  f.seed = flags.value("seed", std::uint64_t{1});
  f.seeds = flags.value("seeds", "");
  f.kind = flags.value("kind", "");
  if (flags.contains("gamma")) f.gamma = flags["gamma"].get<double>();
  if (flags.contains("penalty_exponent")) f.penalty_exponent = flags["penalty_exponent"].get<double>();
  const std::string recorded = m.value("config_hash", "");
  if (!f.config.empty() && RunManifest::hex_hash(file_hash(f.config)) != recorded)
    throw ConfigError("/config_hash", "config file '" + f.config + "' changed since the manifest was written");
  const std::string command = m.value("command", "");
  if (command == "simulate") return run_simulate(f);
  if (command == "experiment") return run_experiment_command(f);
  throw ConfigError("/command", "unknown command '" + command + "'");
}

void add_mechanism_flags(CLI::App* app, Flags& f) {
  app->add_option("--gamma", f.gamma, "window exponent override (> 0)");
  app->add_option("--penalty-exponent", f.penalty_exponent, "penalty exponent override (> 1)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage repeated-game mechanism toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto* simulate = app.add_subcommand("simulate", "run one simulation and write its ledger");
  simulate->add_option("--config", f.config, "simulation JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--days", f.days, "horizon in days (default: from config)");
  simulate->add_option("--seed", f.seed, "random seed");
  simulate->add_option("--out", f.out, "output directory");
  add_mechanism_flags(simulate, f);

  auto* experiment = app.add_subcommand("experiment", "run a numerical study or the acceptance suite");
  experiment->add_option("kind", f.kind, "experiment kind")
      ->required()
      ->check(CLI::IsMember(experiment_kinds()));
  experiment->add_option("--config", f.config, "experiment JSON")->check(CLI::ExistingFile);
  experiment->add_option("--seeds", f.seeds, "comma-separated seeds");
  experiment->add_option("--out", f.out, "output directory");
  add_mechanism_flags(experiment, f);

  std::string out_override;
  auto* rerun = app.add_subcommand("rerun", "replay the command recorded in a manifest");
  rerun->add_option("--manifest", f.manifest, "manifest.json")->required()->check(CLI::ExistingFile);
  rerun->add_option("--out", out_override, "write to this directory instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (simulate->parsed()) return run_simulate(f);
    if (experiment->parsed()) return run_experiment_command(f);
    return run_rerun(f.manifest, out_override);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kExitUsage;
}
