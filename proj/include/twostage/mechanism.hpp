#pragma once

// Two-part payment rule: a VCG charge fixed by the supertype bids, plus a
// daily transfer of realized-minus-expected valuation and a penalty whenever
// a player's reported types stray from its reported supertype.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "twostage/core.hpp"
#include "twostage/game_core.hpp"

namespace twostage {

struct MechanismParams {
  double gamma = 1.0;             // window exponent
  double penalty_exponent = 2.0;  // J_p(l) = l^penalty_exponent
  std::size_t horizon = 50'000;

  void validate() const {
    if (!(gamma > 0.0)) throw InvalidInput("gamma must be positive");
    if (!(penalty_exponent > 1.0)) throw InvalidInput("penalty_exponent must exceed 1");
    if (horizon < 1) throw InvalidInput("horizon must be at least 1 day");
  }

  friend bool operator==(const MechanismParams&, const MechanismParams&) = default;
};

/// Smallest admissible discrepancy window on day l: sqrt(ln(2 l^(1+γ)) / (2l)).
inline double window_r(std::size_t l, double gamma) {
  if (l < 1) throw InvalidInput("window is defined from day 1");
  const double day = static_cast<double>(l);
  return std::sqrt((std::log(2.0) + (1.0 + gamma) * std::log(day)) / (2.0 * day));
}

inline double penalty_Jp(std::size_t l, const MechanismParams& params) {
  return std::pow(static_cast<double>(l), params.penalty_exponent);
}

// ---------------------------------------------------------------------------
// Discrepancy statistics

/// Running counts of reported types. For each player i, tracks how often it
/// reported each type, how often the others reported each profile d₋ᵢ, and
/// the joint counts of (d_i, d₋ᵢ). Profiles of the others are keyed by their
/// mixed-radix index over players j ≠ i in increasing order.
class DiscrepancyStats {
 public:
  using Key = std::uint64_t;

  DiscrepancyStats(std::size_t players, std::size_t types)
      : n_(players), k_(types), per_player_(players) {
    if (players < 1 || types < 1) throw InvalidInput("empty game");
    // The joint key is others_key * k + d_i and must fit 64 bits.
    long double span = 1.0L;
    for (std::size_t j = 0; j < players; ++j) span *= static_cast<long double>(types);
    if (span > static_cast<long double>(std::numeric_limits<Key>::max()))
      throw InvalidInput("type profile space too large for discrepancy keys");
    for (auto& p : per_player_) p.type_counts.assign(types, 0);
  }

  std::size_t players() const noexcept { return n_; }
  std::size_t types() const noexcept { return k_; }
  std::size_t day() const noexcept { return day_; }

  /// Adds one day's reported type profile.
  void record(std::span<const TypeIndex> bids) {
    if (bids.size() != n_) throw InvalidInput("bid profile length mismatch");
    for (PlayerIndex i = 0; i < n_; ++i)
      if (bids[i] >= k_) throw InvalidBid(i, day_ + 1, bids[i]);
    ++day_;
    for (PlayerIndex i = 0; i < n_; ++i) {
      auto& p = per_player_[i];
      const Key others = others_key(i, bids);
      ++p.type_counts[bids[i]];
      ++p.others_counts[others];
      ++p.joint_counts[others * k_ + bids[i]];
    }
  }

  Key others_key(PlayerIndex i, std::span<const TypeIndex> profile) const {
    Key key = 0;
    for (PlayerIndex j = 0; j < n_; ++j)
      if (j != i) key = key * k_ + profile[j];
    return key;
  }

  /// Inverse of others_key: writes d₋ᵢ into `profile` (entry i untouched).
  void decode_others(PlayerIndex i, Key key, std::span<TypeIndex> profile) const {
    for (PlayerIndex j = n_; j-- > 0;) {
      if (j == i) continue;
      profile[j] = static_cast<TypeIndex>(key % k_);
      key /= k_;
    }
  }

  std::uint64_t type_count(PlayerIndex i, TypeIndex t) const {
    return per_player_.at(i).type_counts.at(t);
  }
  std::uint64_t others_count(PlayerIndex i, Key others) const {
    const auto& m = per_player_.at(i).others_counts;
    auto it = m.find(others);
    return it == m.end() ? 0 : it->second;
  }
  std::uint64_t joint_count(PlayerIndex i, TypeIndex own, Key others) const {
    const auto& m = per_player_.at(i).joint_counts;
    auto it = m.find(others * k_ + own);
    return it == m.end() ? 0 : it->second;
  }
  const std::unordered_map<Key, std::uint64_t>& others_counts(PlayerIndex i) const {
    return per_player_.at(i).others_counts;
  }
  const std::unordered_map<Key, std::uint64_t>& joint_counts(PlayerIndex i) const {
    return per_player_.at(i).joint_counts;
  }

 private:
  struct PerPlayer {
    std::vector<std::uint64_t> type_counts;
    std::unordered_map<Key, std::uint64_t> others_counts;
    std::unordered_map<Key, std::uint64_t> joint_counts;
  };

  std::size_t n_;
  std::size_t k_;
  std::size_t day_ = 0;
  std::vector<PerPlayer> per_player_;
};

inline DiscrepancyStats update_stats(DiscrepancyStats stats, std::span<const TypeIndex> bids) {
  stats.record(bids);
  return stats;
}

/// Empirical frequency of player i reporting t, minus θ̂_i(t).
inline double discrepancy_f(const DiscrepancyStats& stats, PlayerIndex i, TypeIndex t,
                            const Supertype& reported) {
  const double l = static_cast<double>(stats.day());
  return static_cast<double>(stats.type_count(i, t)) / l - reported(t);
}

namespace detail {
inline double correlation_h_keyed(const DiscrepancyStats& stats, PlayerIndex i, TypeIndex own,
                                  DiscrepancyStats::Key others, const Supertype& reported) {
  const double l = static_cast<double>(stats.day());
  return static_cast<double>(stats.joint_count(i, own, others)) / l -
         reported(own) * (static_cast<double>(stats.others_count(i, others)) / l);
}
}  // namespace detail

/// Joint frequency of (d_i, d₋ᵢ) minus θ̂_i(d_i) times the frequency of d₋ᵢ.
/// `profile` is a full type profile; only d_i and d₋ᵢ are read.
inline double correlation_h(const DiscrepancyStats& stats, PlayerIndex i,
                            std::span<const TypeIndex> profile, const Supertype& reported) {
  return detail::correlation_h_keyed(stats, i, profile[i], stats.others_key(i, profile), reported);
}

inline double max_abs_f(const DiscrepancyStats& stats, PlayerIndex i, const Supertype& reported) {
  double m = 0.0;
  for (TypeIndex t = 0; t < stats.types(); ++t)
    m = std::max(m, std::abs(discrepancy_f(stats, i, t, reported)));
  return m;
}

/// max |ĥ| over all d_i and the observed d₋ᵢ; unobserved d₋ᵢ give ĥ = 0.
inline double max_abs_h(const DiscrepancyStats& stats, PlayerIndex i, const Supertype& reported) {
  double m = 0.0;
  for (const auto& [others, count] : stats.others_counts(i))
    for (TypeIndex own = 0; own < stats.types(); ++own)
      m = std::max(m, std::abs(detail::correlation_h_keyed(stats, i, own, others, reported)));
  return m;
}

/// Whether player i is penalized on day l: some |f̂| or |ĥ| reaches r(l).
inline bool penalty_event(const DiscrepancyStats& stats, PlayerIndex i, const Supertype& reported,
                          std::size_t l, const MechanismParams& params) {
  if (l != stats.day()) throw InvalidInput("penalty evaluated on a day other than the stats day");
  const double r = window_r(l, params.gamma);
  return max_abs_f(stats, i, reported) >= r || max_abs_h(stats, i, reported) >= r;
}

/// Incremental version of penalty_event for long runs. Tracks |l·ĥ| for every
/// observed (d_i, d₋ᵢ) in an ordered set so the maximum is available without
/// a scan; when that maximum lands within kBoundaryMargin of r(l) the exact
/// scan decides, so results always agree with penalty_event.
class PenaltyMonitor {
 public:
  static constexpr double kBoundaryMargin = 1e-12;

  PenaltyMonitor(std::size_t players, std::size_t types, SupertypeProfile reported,
                 MechanismParams params)
      : k_(types), reported_(std::move(reported)), params_(params), per_player_(players) {
    check_profile(reported_, players, types);
  }

  /// Call after `stats.record(bids)`.
  void observe(const DiscrepancyStats& stats, std::span<const TypeIndex> bids) {
    for (PlayerIndex i = 0; i < per_player_.size(); ++i) {
      auto& p = per_player_[i];
      const auto others = stats.others_key(i, bids);
      const double c = static_cast<double>(stats.others_count(i, others));
      for (TypeIndex own = 0; own < k_; ++own) {
        const auto key = others * k_ + own;
        const double numerator =
            static_cast<double>(stats.joint_count(i, own, others)) - reported_[i](own) * c;
        auto it = p.handles.find(key);
        if (it != p.handles.end()) p.magnitudes.erase(it->second);
        p.handles[key] = p.magnitudes.insert(std::abs(numerator));
      }
    }
  }

  bool event(const DiscrepancyStats& stats, PlayerIndex i) const {
    const std::size_t l = stats.day();
    const double r = window_r(l, params_.gamma);
    const Supertype& reported = reported_[i];
    if (max_abs_f(stats, i, reported) >= r) return true;
    const auto& p = per_player_[i];
    if (p.magnitudes.empty()) return false;
    const double largest = *p.magnitudes.rbegin() / static_cast<double>(l);
    if (largest < r - kBoundaryMargin) return false;
    if (largest >= r + kBoundaryMargin) return true;
    return max_abs_h(stats, i, reported) >= r;
  }

 private:
  struct PerPlayer {
    std::multiset<double> magnitudes;
    std::unordered_map<DiscrepancyStats::Key, std::multiset<double>::iterator> handles;
  };

  std::size_t k_;
  SupertypeProfile reported_;
  MechanismParams params_;
  std::vector<PerPlayer> per_player_;
};

// ---------------------------------------------------------------------------
// Payments

struct PaymentBreakdown {
  double first_stage = 0.0;
  double second_stage_base = 0.0;
  double penalty = 0.0;
  double total = 0.0;

  static PaymentBreakdown make(double first, double base, double penalty) {
    return {first, base, penalty, first + base + penalty};
  }
};

inline double total_payment(double first, double second) { return first + second; }

/// E_{δ∼θ̂}[v_i(δ_i, g1*(θ̂), g2*(θ̂, δ))].
template <TwoStageGame G>
Estimate expected_valuation_estimate(const G& game, std::span<const Supertype> bids,
                                     PlayerIndex i) {
  const PlayerSet all = PlayerSet::all(game.players());
  const OutcomeIndex o1 = optimal_first_stage(game, bids);
  return expect(game, bids, all, [&](std::span<const TypeIndex> types, std::size_t state) {
    return game.valuation(i, types[i], o1, game.best_second_stage(o1, types, state, all), state);
  });
}

template <TwoStageGame G>
double expected_valuation(const G& game, std::span<const Supertype> bids, PlayerIndex i) {
  return expected_valuation_estimate(game, bids, i).value;
}

/// VCG charge: W*(θ̂₋ᵢ) − E_{δ∼θ̂}[Σ_{j≠i} v_j − c] under the optimal rules.
template <TwoStageGame G>
Estimate first_stage_payment_estimate(const G& game, std::span<const Supertype> bids,
                                      PlayerIndex i) {
  const PlayerSet all = PlayerSet::all(game.players());
  const PlayerSet others = all.without(i);
  const OutcomeIndex o1 = optimal_first_stage(game, bids);
  const Estimate without = optimal_welfare(game, bids, others);
  const Estimate externality =
      expect(game, bids, all, [&](std::span<const TypeIndex> types, std::size_t state) {
        return realized_welfare(game, others, o1, game.best_second_stage(o1, types, state, all),
                                types, state);
      });
  return Estimate{without.value - externality.value,
                  std::hypot(without.std_error, externality.std_error),
                  without.exact && externality.exact};
}

template <TwoStageGame G>
double first_stage_payment(const G& game, std::span<const Supertype> bids, PlayerIndex i) {
  return first_stage_payment_estimate(game, bids, i).value;
}

/// Realized-minus-expected valuation at the reported types, plus J_p(l) when
/// the penalty event fired. Negative values are transfers to the player.
template <TwoStageGame G>
double second_stage_payment(const G& game, std::span<const Supertype> bids,
                            std::span<const TypeIndex> day_bids, PlayerIndex i, std::size_t l,
                            bool penalty_flag, const MechanismParams& params,
                            std::size_t state = 0) {
  if (day_bids.size() != game.players()) throw InvalidInput("day bid profile length mismatch");
  const OutcomeIndex o1 = optimal_first_stage(game, bids);
  const auto o2 = optimal_second_stage(game, o1, day_bids, state);
  const double base =
      game.valuation(i, day_bids[i], o1, o2, state) - expected_valuation(game, bids, i);
  return base + (penalty_flag ? penalty_Jp(l, params) : 0.0);
}

/// Everything the planner fixes once the supertype bids are in: the
/// first-stage outcome, expected valuations and VCG charges. The daily
/// quantities are then cheap lookups.
template <TwoStageGame G>
struct MechanismQuotes {
  OutcomeIndex first_stage = 0;
  Estimate welfare;                        // W*(θ̂)
  std::vector<Estimate> welfare_without;   // W*(θ̂₋ᵢ)
  std::vector<Estimate> expected_values;   // E[v_i]
  Estimate expected_cost;                  // E[c]
  std::vector<Estimate> first_stage_payments;

  static MechanismQuotes compute(const G& game, std::span<const Supertype> bids) {
    const std::size_t n = game.players();
    const PlayerSet all = PlayerSet::all(n);
    MechanismQuotes q;
    auto values = first_stage_values(game, bids, all);
    q.first_stage = detail::argmax_first(values);
    q.welfare = values[q.first_stage];
    const OutcomeIndex o1 = q.first_stage;
    auto moments = expect_many(game, bids, all, n + 1,
                               [&](std::span<const TypeIndex> types, std::size_t state,
                                   std::span<double> out) {
                                 auto o2 = game.best_second_stage(o1, types, state, all);
                                 for (PlayerIndex i = 0; i < n; ++i)
                                   out[i] = game.valuation(i, types[i], o1, o2, state);
                                 out[n] = game.cost(o1, o2, state);
                               });
    q.expected_values.assign(moments.begin(), moments.begin() + static_cast<std::ptrdiff_t>(n));
    q.expected_cost = moments[n];
    for (PlayerIndex i = 0; i < n; ++i) {
      q.welfare_without.push_back(optimal_welfare(game, bids, all.without(i)));
      double others = -q.expected_cost.value;
      for (PlayerIndex j = 0; j < n; ++j)
        if (j != i) others += q.expected_values[j].value;
      const Estimate& w = q.welfare_without.back();
      q.first_stage_payments.push_back(
          Estimate{w.value - others, std::hypot(w.std_error, q.welfare.std_error),
                   w.exact && q.welfare.exact});
    }
    return q;
  }
};

}  // namespace twostage
