#pragma once

// Finite two-stage stochastic games and welfare-optimal decision rules.
//
// A game is anything satisfying the TwoStageGame concept: a finite type space,
// finitely many first-stage outcomes, a second-stage recourse that the planner
// optimizes per reported type profile, player valuations and a planner cost.
// Games may carry an exogenous daily state (drawn by nature, observed by the
// planner, not by players); the finite GameSpec has a single trivial state.

#include <concepts>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "twostage/core.hpp"
#include "twostage/random.hpp"

namespace twostage {

/// What an expectation does when the enumerated grid is too large.
struct SamplingPolicy {
  bool allowed = false;
  std::size_t samples = 100'000;
  std::uint64_t seed = 0x5eed;
};

template <class G>
concept TwoStageGame = requires(const G& g, OutcomeIndex o1, std::span<const TypeIndex> profile,
                                std::size_t state, const typename G::outcome_type& o2,
                                PlayerSet set, PlayerIndex i, TypeIndex t) {
  typename G::outcome_type;
  { g.players() } -> std::convertible_to<std::size_t>;
  { g.types() } -> std::same_as<const TypeSpace&>;
  { g.first_stage_count() } -> std::convertible_to<std::size_t>;
  { g.nature() } -> std::same_as<const Supertype&>;
  { g.best_second_stage(o1, profile, state, set) } -> std::same_as<typename G::outcome_type>;
  { g.valuation(i, t, o1, o2, state) } -> std::convertible_to<double>;
  { g.cost(o1, o2, state) } -> std::convertible_to<double>;
  { g.first_stage_label(o1) } -> std::convertible_to<std::string>;
  { g.outcome_label(o2) } -> std::convertible_to<std::string>;
  { g.type_signal(o1, o2, i) } -> std::convertible_to<TypeIndex>;
  { g.sampling() } -> std::same_as<const SamplingPolicy&>;
};

template <TwoStageGame G>
using OutcomeOf = typename G::outcome_type;

// ---------------------------------------------------------------------------
// GameSpec

/// Finite game with tabulated valuations v_i(type, o1, o2) and cost c(o1, o2).
class GameSpec {
 public:
  using outcome_type = OutcomeIndex;

  GameSpec(std::size_t players, TypeSpace types, std::vector<std::string> first_stage,
           std::vector<std::string> second_stage)
      : n_(players),
        types_(std::move(types)),
        o1_(std::move(first_stage)),
        o2_(std::move(second_stage)),
        nature_(Supertype::point_mass(1, 0)) {
    if (n_ < 1) throw InvalidInput("game needs at least one player");
    if (n_ > kMaxPlayers) throw InvalidInput("at most 64 players are supported");
    if (o1_.empty()) throw InvalidInput("first-stage outcome list is empty");
    if (o2_.empty()) throw InvalidInput("second-stage outcome list is empty");
    valuation_.assign(n_ * types_.size() * o1_.size() * o2_.size(), 0.0);
    cost_.assign(o1_.size() * o2_.size(), 0.0);
  }

  std::size_t players() const noexcept { return n_; }
  const TypeSpace& types() const noexcept { return types_; }
  std::size_t first_stage_count() const noexcept { return o1_.size(); }
  std::size_t second_stage_count() const noexcept { return o2_.size(); }
  const std::vector<std::string>& first_stage_outcomes() const noexcept { return o1_; }
  const std::vector<std::string>& second_stage_outcomes() const noexcept { return o2_; }
  const Supertype& nature() const noexcept { return nature_; }
  const SamplingPolicy& sampling() const noexcept { return sampling_; }

  double valuation(PlayerIndex i, TypeIndex t, OutcomeIndex o1, OutcomeIndex o2,
                   std::size_t /*state*/ = 0) const {
    return valuation_[index(i, t, o1, o2)];
  }
  double cost(OutcomeIndex o1, OutcomeIndex o2, std::size_t /*state*/ = 0) const {
    return cost_[o1 * o2_.size() + o2];
  }

  void set_valuation(PlayerIndex i, TypeIndex t, OutcomeIndex o1, OutcomeIndex o2, double v) {
    if (i >= n_ || t >= types_.size() || o1 >= o1_.size() || o2 >= o2_.size())
      throw InvalidInput("valuation index out of range");
    valuation_[index(i, t, o1, o2)] = v;
  }
  void set_cost(OutcomeIndex o1, OutcomeIndex o2, double c) {
    if (o1 >= o1_.size() || o2 >= o2_.size()) throw InvalidInput("cost index out of range");
    cost_[o1 * o2_.size() + o2] = c;
  }

  /// Planner's recourse: argmax over o2 of the participating players' total
  /// valuation minus cost. Ties go to the lowest index.
  OutcomeIndex best_second_stage(OutcomeIndex o1, std::span<const TypeIndex> profile,
                                 std::size_t /*state*/, PlayerSet set) const {
    OutcomeIndex best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (OutcomeIndex o2 = 0; o2 < o2_.size(); ++o2) {
      double w = 0.0;
      for (PlayerIndex i = 0; i < n_; ++i)
        if (set.contains(i)) w += valuation_[index(i, profile[i], o1, o2)];
      w -= cost(o1, o2);
      if (w > best_value) {
        best_value = w;
        best = o2;
      }
    }
    return best;
  }

  std::string first_stage_label(OutcomeIndex o1) const { return o1_.at(o1); }
  std::string outcome_label(OutcomeIndex o2) const { return o2_.at(o2); }

  /// The target's type that values `o2` most (lowest index on ties); what a
  /// player can infer about the target from a public outcome.
  TypeIndex type_signal(OutcomeIndex o1, OutcomeIndex o2, PlayerIndex target) const {
    TypeIndex best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (TypeIndex t = 0; t < types_.size(); ++t) {
      double v = valuation(target, t, o1, o2);
      if (v > best_value) {
        best_value = v;
        best = t;
      }
    }
    return best;
  }

  friend bool operator==(const GameSpec&, const GameSpec&) = default;

 private:
  std::size_t index(PlayerIndex i, TypeIndex t, OutcomeIndex o1, OutcomeIndex o2) const {
    return ((i * types_.size() + t) * o1_.size() + o1) * o2_.size() + o2;
  }

  std::size_t n_;
  TypeSpace types_;
  std::vector<std::string> o1_;
  std::vector<std::string> o2_;
  std::vector<double> valuation_;
  std::vector<double> cost_;
  Supertype nature_;
  SamplingPolicy sampling_{};
};

/// Two players, types {0, 1}, one first-stage outcome A, recourse
/// {none, p1, p2}; the allocated player values the good at its type.
inline GameSpec make_reference_game() {
  GameSpec g(2, TypeSpace::numeric({0.0, 1.0}), {"A"}, {"none", "p1", "p2"});
  for (PlayerIndex i = 0; i < 2; ++i)
    for (TypeIndex t = 0; t < 2; ++t) g.set_valuation(i, t, 0, 1 + i, static_cast<double>(t));
  return g;
}

inline SupertypeProfile reference_supertypes() {
  return {Supertype::uniform(2), Supertype::uniform(2)};
}

// ---------------------------------------------------------------------------
// Enumeration and expectation

namespace detail {

template <TwoStageGame G>
std::size_t grid_size(const G& game, std::span<const Supertype> profile, PlayerSet set) {
  // Saturating product of support sizes.
  std::size_t count = game.nature().support().size();
  for (PlayerIndex i = 0; i < game.players(); ++i) {
    if (!set.contains(i)) continue;
    std::size_t s = profile[i].support().size();
    if (count > kMaxExactProfiles * 16 / std::max<std::size_t>(s, 1)) return kMaxExactProfiles * 16;
    count *= s;
  }
  return count;
}

}  // namespace detail

/// Expectation of `k` quantities at once over δ ~ Π θ_i (players in `set`
/// only) and the game's nature state. `f(types, state, out)` writes the k
/// values for one grid point; types of players outside `set` are 0.
///
/// Enumerates the product of supports exactly when it has at most
/// kMaxExactProfiles points; otherwise samples if the game allows it, else
/// throws GridSizeError.
template <TwoStageGame G, class F>
std::vector<Estimate> expect_many(const G& game, std::span<const Supertype> profile,
                                  PlayerSet set, std::size_t k, F&& f) {
  check_profile(profile, game.players(), game.types().size());
  const std::size_t n = game.players();
  std::vector<Estimate> result(k);
  std::vector<double> out(k, 0.0);
  std::vector<TypeIndex> types(n, 0);

  const std::size_t grid = detail::grid_size(game, profile, set);
  if (grid > kMaxExactProfiles) {
    const SamplingPolicy& policy = game.sampling();
    if (!policy.allowed) throw GridSizeError(grid);
    Stream stream(policy.seed, StreamTag::kSampling, 0);
    std::vector<double> sum(k, 0.0), sum_sq(k, 0.0);
    for (std::size_t s = 0; s < policy.samples; ++s) {
      for (PlayerIndex i = 0; i < n; ++i)
        types[i] = set.contains(i) ? profile[i].sample(stream.uniform()) : 0;
      std::size_t state = game.nature().sample(stream.uniform());
      f(std::span<const TypeIndex>(types), state, std::span<double>(out));
      for (std::size_t j = 0; j < k; ++j) {
        sum[j] += out[j];
        sum_sq[j] += out[j] * out[j];
      }
    }
    const double m = static_cast<double>(policy.samples);
    for (std::size_t j = 0; j < k; ++j) {
      double mean = sum[j] / m;
      double var = std::max(0.0, (sum_sq[j] - m * mean * mean) / (m - 1.0));
      result[j] = Estimate{mean, std::sqrt(var / m), false};
    }
    return result;
  }

  std::vector<std::vector<TypeIndex>> supports(n);
  for (PlayerIndex i = 0; i < n; ++i)
    supports[i] = set.contains(i) ? profile[i].support() : std::vector<TypeIndex>{0};
  const std::vector<TypeIndex> states = game.nature().support();
  std::vector<std::size_t> cursor(n, 0);

  for (std::size_t state : states) {
    const double state_mass = game.nature()(state);
    std::fill(cursor.begin(), cursor.end(), 0);
    while (true) {
      double weight = state_mass;
      for (PlayerIndex i = 0; i < n; ++i) {
        types[i] = supports[i][cursor[i]];
        if (set.contains(i)) weight *= profile[i](types[i]);
      }
      f(std::span<const TypeIndex>(types), state, std::span<double>(out));
      for (std::size_t j = 0; j < k; ++j) result[j].value += weight * out[j];
      // Odometer increment, last player fastest.
      bool done = true;
      for (std::size_t pos = n; pos-- > 0;) {
        if (++cursor[pos] < supports[pos].size()) {
          done = false;
          break;
        }
        cursor[pos] = 0;
      }
      if (done) break;
    }
  }
  return result;
}

template <TwoStageGame G, class F>
Estimate expect(const G& game, std::span<const Supertype> profile, PlayerSet set, F&& f) {
  return expect_many(game, profile, set, 1,
                     [&](std::span<const TypeIndex> types, std::size_t state,
                         std::span<double> out) { out[0] = f(types, state); })[0];
}

/// Σ_{i ∈ set} v_i(δ_i, o1, o2) − c(o1, o2).
template <TwoStageGame G>
double realized_welfare(const G& game, PlayerSet set, OutcomeIndex o1, const OutcomeOf<G>& o2,
                        std::span<const TypeIndex> types, std::size_t state) {
  double w = 0.0;
  for (PlayerIndex i = 0; i < game.players(); ++i)
    if (set.contains(i)) w += game.valuation(i, types[i], o1, o2, state);
  return w - game.cost(o1, o2, state);
}

// ---------------------------------------------------------------------------
// Decision rules

/// (g1, g2): first stage from the supertype profile; recourse from the
/// supertype profile, the first-stage outcome already chosen from it, the
/// reported types and the day's nature state.
template <TwoStageGame G>
struct DecisionRuleSet {
  std::function<OutcomeIndex(std::span<const Supertype>)> first_stage;
  std::function<OutcomeOf<G>(std::span<const Supertype>, OutcomeIndex, std::span<const TypeIndex>,
                             std::size_t)>
      second_stage;
};

template <TwoStageGame G>
OutcomeOf<G> optimal_second_stage(const G& game, OutcomeIndex o1,
                                  std::span<const TypeIndex> type_profile, std::size_t state = 0,
                                  std::optional<PlayerSet> set = std::nullopt) {
  if (o1 >= game.first_stage_count()) throw InvalidInput("first-stage outcome out of range");
  if (type_profile.size() != game.players()) throw InvalidInput("type profile length mismatch");
  for (TypeIndex t : type_profile)
    if (t >= game.types().size()) throw InvalidInput("type outside the type space");
  return game.best_second_stage(o1, type_profile, state,
                                set.value_or(PlayerSet::all(game.players())));
}

/// Expected value of the optimal recourse for each first-stage outcome.
template <TwoStageGame G>
std::vector<Estimate> first_stage_values(const G& game, std::span<const Supertype> profile,
                                         PlayerSet set) {
  const std::size_t m = game.first_stage_count();
  return expect_many(game, profile, set, m,
                     [&](std::span<const TypeIndex> types, std::size_t state,
                         std::span<double> out) {
                       for (OutcomeIndex o1 = 0; o1 < m; ++o1) {
                         auto o2 = game.best_second_stage(o1, types, state, set);
                         out[o1] = realized_welfare(game, set, o1, o2, types, state);
                       }
                     });
}

namespace detail {
inline OutcomeIndex argmax_first(const std::vector<Estimate>& values) {
  OutcomeIndex best = 0;
  for (OutcomeIndex o = 1; o < values.size(); ++o)
    if (values[o].value > values[best].value) best = o;
  return best;
}
}  // namespace detail

template <TwoStageGame G>
OutcomeIndex optimal_first_stage(const G& game, std::span<const Supertype> profile,
                                 std::optional<PlayerSet> set = std::nullopt) {
  return detail::argmax_first(
      first_stage_values(game, profile, set.value_or(PlayerSet::all(game.players()))));
}

/// W*(θ) restricted to `included`: excluded players' valuations are dropped
/// from both the objective and the recourse choice; planner cost stays.
template <TwoStageGame G>
Estimate optimal_welfare(const G& game, std::span<const Supertype> profile, PlayerSet included) {
  auto values = first_stage_values(game, profile, included);
  return values[detail::argmax_first(values)];
}

template <TwoStageGame G>
DecisionRuleSet<G> optimal_rules(const G& game) {
  DecisionRuleSet<G> rules;
  rules.first_stage = [&game](std::span<const Supertype> profile) {
    return optimal_first_stage(game, profile);
  };
  rules.second_stage = [&game](std::span<const Supertype>, OutcomeIndex o1,
                               std::span<const TypeIndex> types, std::size_t state) {
    return game.best_second_stage(o1, types, state, PlayerSet::all(game.players()));
  };
  return rules;
}

/// W(θ, g1, g2) by exact enumeration (or sampling where the game allows).
template <TwoStageGame G>
Estimate expected_welfare(const G& game, std::span<const Supertype> profile,
                          const DecisionRuleSet<G>& rules) {
  check_profile(profile, game.players(), game.types().size());
  const PlayerSet all = PlayerSet::all(game.players());
  const OutcomeIndex o1 = rules.first_stage(profile);
  if (o1 >= game.first_stage_count()) throw InvalidInput("rule produced an unknown outcome");
  return expect(game, profile, all, [&](std::span<const TypeIndex> types, std::size_t state) {
    return realized_welfare(game, all, o1, rules.second_stage(profile, o1, types, state), types,
                            state);
  });
}

}  // namespace twostage
