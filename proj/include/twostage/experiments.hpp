#pragma once

// Numerical studies on the demand-response market and the repeated-game
// simulation entry point. Each study fans out over seeds and merges results
// in parameter order.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "twostage/dr_market.hpp"
#include "twostage/engine.hpp"
#include "twostage/json_io.hpp"
#include "twostage/parallel.hpp"

namespace twostage {

// ---------------------------------------------------------------------------
// Simulation documents

/// A runnable simulation: either a finite game or a DR instance, plus the
/// strategies, mechanism parameters and seed.
struct SimulationDocument {
  std::variant<SimulationConfig<GameSpec>, SimulationConfig<DrGame>> config;
};

/// {"game": GameSpec | "dr": DrSpec, "strategies": [...], "mechanism": {...},
///  "seed": S}. Strategies default to truthful for every player; true
/// supertypes come from the game's "supertypes" field.
inline SimulationDocument simulation_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("", "expected an object");
  const bool has_game = j.contains("game");
  const bool has_dr = j.contains("dr");
  if (has_game == has_dr) throw ConfigError("", "exactly one of \"game\" and \"dr\" is required");

  MechanismParams params;
  if (auto it = j.find("mechanism"); it != j.end()) params = params_from_json(*it, "/mechanism");
  std::uint64_t seed = 1;
  if (auto it = j.find("seed"); it != j.end()) seed = detail::count_of(*it, "/seed");

  auto build = [&]<class G>(std::shared_ptr<const G> game, SupertypeProfile truth) {
    SimulationConfig<G> c;
    c.game = std::move(game);
    c.true_supertypes = std::move(truth);
    c.params = params;
    c.seed = seed;
    const std::size_t n = c.game->players();
    if (auto it = j.find("strategies"); it != j.end()) {
      if (!it->is_array() || it->size() != n)
        throw ConfigError("/strategies", "expected one strategy per player");
      for (std::size_t i = 0; i < n; ++i)
        c.strategies.push_back(
            make_strategy<G>(strategy_from_json((*it)[i], "/strategies/" + std::to_string(i))));
    } else {
      c.strategies.assign(n, truthful_strategy<G>());
    }
    return c;
  };

  if (has_game) {
    auto doc = game_from_json(j["game"], "/game");
    if (doc.supertypes.empty()) throw ConfigError("/game/supertypes", "missing field");
    return {build(std::make_shared<const GameSpec>(std::move(doc.game)), std::move(doc.supertypes))};
  }
  auto spec = dr_spec_from_json(j["dr"], "/dr");
  auto truth = spec.supertypes;
  return {build(std::make_shared<const DrGame>(std::move(spec)), std::move(truth))};
}

// ---------------------------------------------------------------------------
// DR studies

struct SeriesPoint {
  double x = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
};

/// Counts audited ledgers and flag mismatches across a study.
struct AuditTally {
  std::size_t ledgers = 0;
  std::size_t mismatches = 0;
  std::size_t flags = 0;

  template <TwoStageGame G>
  void add(const Ledger<G>& ledger, const MechanismParams& params) {
    ++ledgers;
    mismatches += audit_penalty_flags(ledger, params);
    for (const auto& rec : ledger.days)
      for (auto f : rec.penalty_flags) flags += f;
  }
  void merge(const AuditTally& other) {
    ledgers += other.ledgers;
    mismatches += other.mismatches;
    flags += other.flags;
  }
};

/// All-truthful DR simulation through the mechanism with cached quotes.
struct DrRunner {
  std::shared_ptr<const DrGame> game;
  std::shared_ptr<const MechanismQuotes<DrGame>> quotes;
  MechanismParams params;

  DrRunner(DrSpec spec, std::size_t days, MechanismParams base = {})
      : game(std::make_shared<const DrGame>(std::move(spec))), params(base) {
    params.horizon = days;
    quotes = std::make_shared<const MechanismQuotes<DrGame>>(
        MechanismQuotes<DrGame>::compute(*game, game->spec().supertypes));
  }

  Ledger<DrGame> run(std::uint64_t seed) const {
    SimulationConfig<DrGame> c;
    c.game = game;
    c.strategies.assign(game->players(), truthful_strategy<DrGame>());
    c.true_supertypes = game->spec().supertypes;
    c.params = params;
    c.seed = seed;
    c.quotes = quotes;
    c.quoted_bids = c.true_supertypes;
    return run_simulation(c);
  }
};

/// Provider and reserve cost parameters on the default grid, mean 1 and the
/// given variance.
struct DrStudyOptions {
  std::size_t days = 2000;
  std::size_t grid_points = 16;
  double demand = 10.0;
  double variance = 2.0;
  MechanismParams mechanism{};
};

/// Social cost (provider costs plus reserve cost) of the mechanism under
/// truthful play, for n = n_min..n_max. Seeds pair across n: provider i and
/// the reserve see the same draws whatever n is.
inline std::vector<SeriesPoint> social_cost_vs_n(std::size_t n_min, std::size_t n_max,
                                                 std::span<const std::uint64_t> seeds,
                                                 const DrStudyOptions& opt = {},
                                                 AuditTally* audit = nullptr) {
  if (n_min < 1 || n_max < n_min) throw InvalidInput("invalid provider-count range");
  if (seeds.empty()) throw InvalidInput("need at least one seed");
  const auto dist = default_cost_distribution(1.0, opt.grid_points, opt.variance);
  std::vector<SeriesPoint> out;
  for (std::size_t n = n_min; n <= n_max; ++n) {
    DrSpec spec = default_dr_spec(n, opt.grid_points, opt.demand);
    spec.supertypes.assign(n, dist.pmf);
    spec.reserve_dist = dist.pmf;
    const DrRunner runner(spec, opt.days, opt.mechanism);
    auto per_seed = parallel_map(seeds.size(), [&](std::size_t s) {
      auto ledger = runner.run(seeds[s]);
      AuditTally t;
      if (audit) t.add(ledger, runner.params);
      return std::pair{-estimate_welfare(ledger), t};
    });
    std::vector<double> costs;
    for (const auto& [c, t] : per_seed) {
      costs.push_back(c);
      if (audit) audit->merge(t);
    }
    const auto m = mean_with_error(costs);
    out.push_back({static_cast<double>(n), m.mean, m.std_error});
  }
  return out;
}

/// Sorted union of two grids.
inline std::vector<double> merge_grids(std::span<const double> a, std::span<const double> b) {
  std::set<double> all(a.begin(), a.end());
  all.insert(b.begin(), b.end());
  return {all.begin(), all.end()};
}

/// Average payment received by provider 0, whose cost parameter is fixed at
/// `fixed_delta` every day, as the other providers' mean cost parameter
/// varies (variance held fixed). The reserve keeps the default mean-1 law.
inline std::vector<SeriesPoint> payment_sensitivity(std::size_t n,
                                                    std::span<const double> other_means,
                                                    double fixed_delta,
                                                    std::span<const std::uint64_t> seeds,
                                                    const DrStudyOptions& opt = {},
                                                    AuditTally* audit = nullptr) {
  if (n < 2) throw InvalidInput("payment sensitivity needs at least two providers");
  if (seeds.empty()) throw InvalidInput("need at least one seed");
  if (!(fixed_delta > 0.0)) throw InvalidInput("fixed cost parameter must be positive");
  const auto reserve = default_cost_distribution(1.0, opt.grid_points, opt.variance);
  std::vector<SeriesPoint> out;
  for (double mean : other_means) {
    const auto others = default_cost_distribution(mean, opt.grid_points, opt.variance);
    const double fixed[] = {fixed_delta};
    DrSpec spec;
    spec.n = n;
    spec.grid = merge_grids(merge_grids(others.points, reserve.points), fixed);
    spec.demand = opt.demand;
    const auto where = std::find(spec.grid.begin(), spec.grid.end(), fixed_delta);
    spec.supertypes.push_back(
        Supertype::point_mass(spec.grid.size(), static_cast<TypeIndex>(where - spec.grid.begin())));
    for (std::size_t i = 1; i < n; ++i) spec.supertypes.push_back(embed_distribution(others, spec.grid));
    spec.reserve_dist = embed_distribution(reserve, spec.grid);
    const DrRunner runner(spec, opt.days, opt.mechanism);
    auto per_seed = parallel_map(seeds.size(), [&](std::size_t s) {
      auto ledger = runner.run(seeds[s]);
      AuditTally t;
      if (audit) t.add(ledger, runner.params);
      return std::pair{-average_payment(ledger, 0), t};
    });
    std::vector<double> received;
    for (const auto& [p, t] : per_seed) {
      received.push_back(p);
      if (audit) audit->merge(t);
    }
    const auto m = mean_with_error(received);
    out.push_back({mean, m.mean, m.std_error});
  }
  return out;
}

struct PostedPriceComparison {
  std::vector<SeriesPoint> sweep;  // x = price
  SeriesPoint mechanism;           // x unused
  std::size_t best = 0;            // index of the cheapest price
  double gap() const { return sweep[best].mean - mechanism.mean; }
};

/// Posted-price social cost per price and the mechanism's social cost under
/// truthful play, on common draws. Statistics are across seeds.
inline PostedPriceComparison posted_price_comparison(const DrSpec& spec, std::size_t days,
                                                     std::span<const std::uint64_t> seeds,
                                                     const MechanismParams& mechanism = {},
                                                     AuditTally* audit = nullptr) {
  if (seeds.empty()) throw InvalidInput("need at least one seed");
  if (spec.price_grid.empty()) throw InvalidInput("price grid is empty");
  const DrRunner runner(spec, days, mechanism);
  struct SeedResult {
    std::vector<double> posted;
    double mechanism = 0.0;
    AuditTally tally;
  };
  auto per_seed = parallel_map(seeds.size(), [&](std::size_t s) {
    SeedResult r;
    const auto sweep = posted_price_sweep(spec, days, seeds[s]);
    for (const auto& c : sweep.costs) r.posted.push_back(c.mean);
    auto ledger = runner.run(seeds[s]);
    r.mechanism = -estimate_welfare(ledger);
    if (audit) r.tally.add(ledger, runner.params);
    return r;
  });
  PostedPriceComparison out;
  std::vector<double> column(seeds.size());
  for (std::size_t p = 0; p < spec.price_grid.size(); ++p) {
    for (std::size_t s = 0; s < seeds.size(); ++s) column[s] = per_seed[s].posted[p];
    const auto m = mean_with_error(column);
    out.sweep.push_back({spec.price_grid[p], m.mean, m.std_error});
    if (m.mean < out.sweep[out.best].mean) out.best = p;
  }
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    column[s] = per_seed[s].mechanism;
    if (audit) audit->merge(per_seed[s].tally);
  }
  const auto m = mean_with_error(column);
  out.mechanism = {0.0, m.mean, m.std_error};
  return out;
}

/// Point-mass providers δ = [4, 2], reserve δ_s = 1, demand 7: the posted
/// price 4 reproduces the welfare-optimal dispatch.
inline DrSpec degenerate_dr_spec() {
  DrSpec spec;
  spec.n = 2;
  spec.grid = {1.0, 2.0, 4.0};
  spec.supertypes = {Supertype::point_mass(3, 2), Supertype::point_mass(3, 1)};
  spec.reserve_dist = Supertype::point_mass(3, 0);
  spec.demand = 7.0;
  for (int j = 0; j < 50; ++j) spec.price_grid.push_back(j / 5.0);
  return spec;
}

}  // namespace twostage
