#pragma once

// Day-by-day simulation of the repeated game under the two-part payment rule,
// and finite-horizon estimators of the long-run quantities.

#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "twostage/core.hpp"
#include "twostage/game_core.hpp"
#include "twostage/mechanism.hpp"
#include "twostage/parallel.hpp"
#include "twostage/random.hpp"
#include "twostage/strategies.hpp"

namespace twostage {

template <TwoStageGame G>
struct SimulationConfig {
  std::shared_ptr<const G> game;
  std::vector<Strategy<G>> strategies;
  SupertypeProfile true_supertypes;
  MechanismParams params;
  std::uint64_t seed = 1;
  /// Optional precomputed quotes. Used only when `quoted_bids` equals the
  /// supertype bids the strategies actually make; otherwise recomputed.
  std::shared_ptr<const MechanismQuotes<G>> quotes;
  SupertypeProfile quoted_bids;
};

template <TwoStageGame G>
struct DayRecord {
  std::size_t day = 0;
  std::vector<TypeIndex> true_types;
  std::vector<TypeIndex> bids;
  OutcomeIndex o1 = 0;
  OutcomeOf<G> o2{};
  std::size_t state = 0;  // nature's draw for the day
  std::vector<PaymentBreakdown> payments;
  std::vector<std::uint8_t> penalty_flags;
  std::vector<double> valuations;  // at true types
  double planner_cost = 0.0;
};

template <TwoStageGame G>
struct Ledger {
  std::uint64_t config_hash = 0;
  std::vector<std::string> strategy_names;
  SupertypeProfile reported;  // supertype bids
  MechanismQuotes<G> quotes;
  std::vector<DayRecord<G>> days;
  DiscrepancyStats stats{1, 1};

  std::size_t players() const { return reported.size(); }
};

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < size; ++k) {
    h ^= bytes[k];
    h *= 0x100000001b3ull;
  }
  return h;
}
inline std::uint64_t fnv1a(std::uint64_t h, double x) {
  return fnv1a(h, &x, sizeof x);
}
inline std::uint64_t fnv1a(std::uint64_t h, std::uint64_t x) { return fnv1a(h, &x, sizeof x); }
inline std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
  h = fnv1a(h, static_cast<std::uint64_t>(s.size()));
  return fnv1a(h, s.data(), s.size());
}
inline std::uint64_t fnv1a(std::uint64_t h, const Supertype& s) {
  for (double m : s.masses()) h = fnv1a(h, m);
  return h;
}

inline std::uint64_t hash_strategy(std::uint64_t h, const StrategyConfig& config) {
  h = fnv1a(h, static_cast<std::uint64_t>(config.index()));
  std::visit(
      [&](const auto& c) {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, MisreportConfig>) {
          h = fnv1a(h, c.reported);
        } else if constexpr (std::is_same_v<C, StationaryConfig>) {
          for (const auto& row : c.kernel) h = fnv1a(h, row);
          h = fnv1a(h, c.reported);
        } else if constexpr (std::is_same_v<C, MimicConfig>) {
          h = fnv1a(h, static_cast<std::uint64_t>(c.target));
          h = fnv1a(h, c.bias);
        }
      },
      config);
  return h;
}

}  // namespace detail

/// Hash of everything that determines a run other than the game tables:
/// type labels, supertypes, strategies, mechanism parameters and seed.
template <TwoStageGame G>
std::uint64_t config_hash(const SimulationConfig<G>& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  h = detail::fnv1a(h, static_cast<std::uint64_t>(config.game->players()));
  for (const auto& label : config.game->types().labels()) h = detail::fnv1a(h, label);
  for (const auto& s : config.true_supertypes) h = detail::fnv1a(h, s);
  for (const auto& s : config.strategies) {
    h = detail::fnv1a(h, s.name());
    if (s.config()) h = detail::hash_strategy(h, *s.config());
  }
  h = detail::fnv1a(h, config.params.gamma);
  h = detail::fnv1a(h, config.params.penalty_exponent);
  h = detail::fnv1a(h, static_cast<std::uint64_t>(config.params.horizon));
  return detail::fnv1a(h, config.seed);
}

/// Plays `params.horizon` days. Supertype bids are collected once; each day
/// nature draws every player's type from its own seeded stream, policies bid,
/// the planner picks the recourse from the bids, and payments are charged.
/// Throws InvalidBid if a policy bids outside the type space.
template <TwoStageGame G>
Ledger<G> run_simulation(const SimulationConfig<G>& config) {
  if (!config.game) throw InvalidInput("simulation has no game");
  const G& game = *config.game;
  const std::size_t n = game.players();
  const std::size_t k = game.types().size();
  const MechanismParams& params = config.params;
  params.validate();
  if (config.strategies.size() != n) throw InvalidInput("need one strategy per player");
  check_profile(config.true_supertypes, n, k);

  Ledger<G> ledger;
  ledger.config_hash = config_hash(config);
  for (PlayerIndex i = 0; i < n; ++i) {
    ledger.strategy_names.push_back(config.strategies[i].name());
    ledger.reported.push_back(config.strategies[i].first_stage(config.true_supertypes[i]));
  }
  check_profile(ledger.reported, n, k);
  if (config.quotes && config.quoted_bids == ledger.reported)
    ledger.quotes = *config.quotes;
  else
    ledger.quotes = MechanismQuotes<G>::compute(game, ledger.reported);
  const auto& quotes = ledger.quotes;
  const OutcomeIndex o1 = quotes.first_stage;
  const PlayerSet all = PlayerSet::all(n);

  std::vector<std::unique_ptr<BiddingPolicy<G>>> policies;
  std::vector<Stream> type_streams, policy_streams;
  for (PlayerIndex i = 0; i < n; ++i) {
    policies.push_back(config.strategies[i].make_policy(game, i));
    type_streams.emplace_back(config.seed, StreamTag::kTypes, i);
    policy_streams.emplace_back(config.seed, StreamTag::kPolicy, i);
  }
  Stream nature_stream(config.seed, StreamTag::kNature, 0);

  DiscrepancyStats stats(n, k);
  PenaltyMonitor monitor(n, k, ledger.reported, params);
  std::vector<std::vector<TypeIndex>> own_types(n), own_bids(n);
  std::vector<OutcomeOf<G>> outcomes;
  for (PlayerIndex i = 0; i < n; ++i) {
    own_types[i].reserve(params.horizon);
    own_bids[i].reserve(params.horizon);
  }
  outcomes.reserve(params.horizon);
  ledger.days.reserve(params.horizon);

  for (std::size_t l = 1; l <= params.horizon; ++l) {
    DayRecord<G> rec;
    rec.day = l;
    rec.o1 = o1;
    rec.true_types.resize(n);
    rec.bids.resize(n);
    for (PlayerIndex i = 0; i < n; ++i) {
      rec.true_types[i] = config.true_supertypes[i].sample(type_streams[i].uniform());
      own_types[i].push_back(rec.true_types[i]);
    }
    rec.state = game.nature().sample(nature_stream.uniform());

    for (PlayerIndex i = 0; i < n; ++i) {
      HistoryView<G> view{game,         params,       i,           l,       o1,
                          ledger.reported[i], own_types[i], own_bids[i], outcomes};
      const TypeIndex b = policies[i]->bid(view, policy_streams[i]);
      if (b >= k) throw InvalidBid(i, l, b);
      rec.bids[i] = b;
    }

    rec.o2 = game.best_second_stage(o1, rec.bids, rec.state, all);
    stats.record(rec.bids);
    monitor.observe(stats, rec.bids);

    rec.payments.resize(n);
    rec.penalty_flags.resize(n);
    rec.valuations.resize(n);
    for (PlayerIndex i = 0; i < n; ++i) {
      const bool flag = monitor.event(stats, i);
      rec.penalty_flags[i] = flag ? 1 : 0;
      rec.valuations[i] = game.valuation(i, rec.true_types[i], o1, rec.o2, rec.state);
      const double base = game.valuation(i, rec.bids[i], o1, rec.o2, rec.state) -
                          quotes.expected_values[i].value;
      rec.payments[i] = PaymentBreakdown::make(quotes.first_stage_payments[i].value, base,
                                               flag ? penalty_Jp(l, params) : 0.0);
    }
    rec.planner_cost = game.cost(o1, rec.o2, rec.state);

    for (PlayerIndex i = 0; i < n; ++i) own_bids[i].push_back(rec.bids[i]);
    outcomes.push_back(rec.o2);
    ledger.days.push_back(std::move(rec));
  }
  ledger.stats = std::move(stats);
  return ledger;
}

// ---------------------------------------------------------------------------
// Estimators

/// Average of v_i − p_i over the first `days` days (all days by default).
template <TwoStageGame G>
double running_utility(const Ledger<G>& ledger, PlayerIndex i, std::size_t days = 0) {
  if (ledger.days.empty()) throw InvalidInput("empty ledger");
  if (days == 0 || days > ledger.days.size()) days = ledger.days.size();
  double sum = 0.0;
  for (std::size_t d = 0; d < days; ++d)
    sum += ledger.days[d].valuations[i] - ledger.days[d].payments[i].total;
  return sum / static_cast<double>(days);
}

template <TwoStageGame G>
double estimate_utility(const Ledger<G>& ledger, PlayerIndex i) {
  return running_utility(ledger, i);
}

/// Average realized welfare: true-type valuations at bid-driven outcomes,
/// minus the planner's cost.
template <TwoStageGame G>
double estimate_welfare(const Ledger<G>& ledger) {
  if (ledger.days.empty()) throw InvalidInput("empty ledger");
  double sum = 0.0;
  for (const auto& rec : ledger.days) {
    double w = 0.0;
    for (double v : rec.valuations) w += v;
    sum += w - rec.planner_cost;
  }
  return sum / static_cast<double>(ledger.days.size());
}

template <TwoStageGame G>
double average_payment(const Ledger<G>& ledger, PlayerIndex i) {
  if (ledger.days.empty()) throw InvalidInput("empty ledger");
  double sum = 0.0;
  for (const auto& rec : ledger.days) sum += rec.payments[i].total;
  return sum / static_cast<double>(ledger.days.size());
}

template <TwoStageGame G>
std::size_t penalty_days(const Ledger<G>& ledger, PlayerIndex i, std::size_t from_day = 1) {
  std::size_t count = 0;
  for (const auto& rec : ledger.days)
    if (rec.day >= from_day && rec.penalty_flags[i]) ++count;
  return count;
}

/// max over observed type-bid profiles d of |empirical frequency of d −
/// Π_j θ̂_j(d_j)|.
template <TwoStageGame G>
double verify_product_form(const Ledger<G>& ledger, std::span<const Supertype> reported) {
  if (ledger.days.empty()) throw InvalidInput("empty ledger");
  const std::size_t n = ledger.players();
  if (reported.size() != n) throw InvalidInput("reported profile length mismatch");
  const std::size_t k = reported[0].size();
  std::map<std::vector<TypeIndex>, std::uint64_t> counts;
  for (const auto& rec : ledger.days) ++counts[rec.bids];
  const double days = static_cast<double>(ledger.days.size());
  double gap = 0.0;
  for (const auto& [profile, count] : counts) {
    double product = 1.0;
    for (PlayerIndex j = 0; j < n; ++j) {
      if (profile[j] >= k) throw InvalidInput("bid outside the reported supertype's support");
      product *= reported[j](profile[j]);
    }
    gap = std::max(gap, std::abs(static_cast<double>(count) / days - product));
  }
  return gap;
}

namespace detail {

/// Running max of |l·ĥ| numerators for one player. Keeps the current argmax
/// and rescans all cells only when that cell shrinks.
class LazyMax {
 public:
  void update(std::uint64_t key, double magnitude) {
    auto [it, inserted] = cells_.try_emplace(key, magnitude);
    if (!inserted) it->second = magnitude;
    if (magnitude >= max_) {
      max_ = magnitude;
      arg_ = key;
    } else if (key == arg_) {
      max_ = 0.0;
      for (const auto& [k, m] : cells_)
        if (m >= max_) {
          max_ = m;
          arg_ = k;
        }
    }
  }
  double max() const { return max_; }

 private:
  std::unordered_map<std::uint64_t, double> cells_;
  double max_ = 0.0;
  std::uint64_t arg_ = 0;
};

}  // namespace detail

/// Replays the raw bid log through fresh statistics and returns the number
/// of (day, player) flags that differ from what penalty_event decides. Days
/// whose largest discrepancy is clearly inside or outside the window are
/// settled from incrementally tracked maxima; the rest call penalty_event.
template <TwoStageGame G>
std::size_t audit_penalty_flags(const Ledger<G>& ledger, const MechanismParams& params) {
  constexpr double kMargin = 1e-9;
  const std::size_t n = ledger.players();
  const std::size_t k = ledger.reported[0].size();
  DiscrepancyStats stats(n, k);
  std::vector<detail::LazyMax> maxima(n);
  std::size_t mismatches = 0;
  for (const auto& rec : ledger.days) {
    stats.record(rec.bids);
    const double l = static_cast<double>(rec.day);
    const double r = window_r(rec.day, params.gamma);
    for (PlayerIndex i = 0; i < n; ++i) {
      const Supertype& reported = ledger.reported[i];
      const auto others = stats.others_key(i, rec.bids);
      const double c = static_cast<double>(stats.others_count(i, others));
      for (TypeIndex own = 0; own < k; ++own)
        maxima[i].update(others * k + own,
                         std::abs(static_cast<double>(stats.joint_count(i, own, others)) -
                                  reported(own) * c));
      const double largest = std::max(max_abs_f(stats, i, reported), maxima[i].max() / l);
      bool offline;
      if (largest < r - kMargin) offline = false;
      else if (largest >= r + kMargin) offline = true;
      else offline = penalty_event(stats, i, reported, rec.day, params);
      if (offline != static_cast<bool>(rec.penalty_flags[i])) ++mismatches;
    }
  }
  return mismatches;
}

/// Same as audit_penalty_flags but calls penalty_event on every day. Cost
/// grows with the number of distinct bid profiles seen; meant for short logs.
template <TwoStageGame G>
std::size_t audit_penalty_flags_exhaustive(const Ledger<G>& ledger,
                                           const MechanismParams& params) {
  const std::size_t n = ledger.players();
  DiscrepancyStats stats(n, ledger.reported[0].size());
  std::size_t mismatches = 0;
  for (const auto& rec : ledger.days) {
    stats.record(rec.bids);
    for (PlayerIndex i = 0; i < n; ++i) {
      const bool offline = penalty_event(stats, i, ledger.reported[i], rec.day, params);
      if (offline != static_cast<bool>(rec.penalty_flags[i])) ++mismatches;
    }
  }
  return mismatches;
}

template <TwoStageGame G>
using LedgerInspector = std::function<void(const Ledger<G>&)>;

/// Mean over seeds of u_i(truthful) − u_i(alt), everyone else unchanged and
/// type draws shared per seed. `inspect`, if set, sees every ledger produced
/// and may be called concurrently.
template <TwoStageGame G>
double deviation_gain(const SimulationConfig<G>& base, PlayerIndex i, const Strategy<G>& alt,
                      std::span<const std::uint64_t> seeds,
                      const LedgerInspector<G>& inspect = {}) {
  if (seeds.empty()) throw InvalidInput("deviation_gain needs at least one seed");
  if (i >= base.strategies.size()) throw InvalidInput("player out of range");
  auto diffs = parallel_map(seeds.size(), [&](std::size_t s) {
    SimulationConfig<G> honest = base;
    honest.seed = seeds[s];
    honest.strategies[i] = truthful_strategy<G>();
    SimulationConfig<G> deviant = honest;
    deviant.strategies[i] = alt;
    const auto a = run_simulation(honest);
    if (inspect) inspect(a);
    const double u_honest = estimate_utility(a, i);
    const auto b = run_simulation(deviant);
    if (inspect) inspect(b);
    return u_honest - estimate_utility(b, i);
  });
  double sum = 0.0;
  for (double d : diffs) sum += d;
  return sum / static_cast<double>(seeds.size());
}

}  // namespace twostage
