#pragma once

// Bidding strategies: a first-stage map from the true supertype to the
// supertype bid, and a second-stage policy choosing each day's type bid from
// the player's own history.

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "twostage/core.hpp"
#include "twostage/game_core.hpp"
#include "twostage/mechanism.hpp"
#include "twostage/random.hpp"

namespace twostage {

/// Everything a player may condition its day-l bid on: its own types up to
/// and including today, its own earlier bids, the public second-stage
/// outcomes of earlier days, and the public rules of the game.
template <TwoStageGame G>
struct HistoryView {
  const G& game;
  const MechanismParams& params;
  PlayerIndex self;
  std::size_t day;  // 1-based
  OutcomeIndex first_stage;
  const Supertype& reported;  // own supertype bid
  std::span<const TypeIndex> own_types;
  std::span<const TypeIndex> own_bids;
  std::span<const OutcomeOf<G>> outcomes;

  TypeIndex today() const { return own_types.back(); }
};

/// Per-run bidding state. Policies draw randomness only from `rng`, so a
/// policy's bids are a function of (history, seed).
template <TwoStageGame G>
class BiddingPolicy {
 public:
  virtual ~BiddingPolicy() = default;
  virtual TypeIndex bid(const HistoryView<G>& history, Stream& rng) = 0;
};

// ---------------------------------------------------------------------------
// Serializable configurations

struct TruthfulConfig {
  friend bool operator==(const TruthfulConfig&, const TruthfulConfig&) = default;
};
struct MisreportConfig {
  Supertype reported;
  friend bool operator==(const MisreportConfig&, const MisreportConfig&) = default;
};
struct StationaryConfig {
  std::vector<Supertype> kernel;  // row per true type
  Supertype reported;
  friend bool operator==(const StationaryConfig&, const StationaryConfig&) = default;
};
struct MimicConfig {
  PlayerIndex target = 0;
  double bias = 0.3;
  friend bool operator==(const MimicConfig&, const MimicConfig&) = default;
};

using StrategyConfig = std::variant<TruthfulConfig, MisreportConfig, StationaryConfig, MimicConfig>;

// ---------------------------------------------------------------------------
// Kernels

using Kernel = std::vector<Supertype>;

inline Kernel identity_kernel(std::size_t types) {
  Kernel k;
  for (TypeIndex t = 0; t < types; ++t) k.push_back(Supertype::point_mass(types, t));
  return k;
}

/// Reverses the type order: t -> K-1-t.
inline Kernel flip_kernel(std::size_t types) {
  Kernel k;
  for (TypeIndex t = 0; t < types; ++t) k.push_back(Supertype::point_mass(types, types - 1 - t));
  return k;
}

inline Kernel constant_kernel(std::size_t types, TypeIndex to) {
  return Kernel(types, Supertype::point_mass(types, to));
}

/// Distribution of the bid when the true type is drawn from `truth` and then
/// passed through `kernel`.
inline std::vector<double> induced_marginal(const Kernel& kernel, const Supertype& truth) {
  if (kernel.size() != truth.size()) throw InvalidInput("kernel has wrong number of rows");
  std::vector<double> m(truth.size(), 0.0);
  for (TypeIndex s = 0; s < truth.size(); ++s) {
    if (kernel[s].size() != truth.size()) throw InvalidInput("kernel row has wrong length");
    for (TypeIndex t = 0; t < truth.size(); ++t) m[t] += truth(s) * kernel[s](t);
  }
  return m;
}

/// Whether a stationary kernel's bid distribution matches the reported
/// supertype to within `tol` in every coordinate. A stationary deviation that
/// fails this is penalized on a positive fraction of days.
inline bool marginal_match_check(const Kernel& kernel, const Supertype& truth,
                                 const Supertype& reported, double tol) {
  if (tol < 0.0) throw InvalidInput("tolerance must be nonnegative");
  if (reported.size() != truth.size()) throw InvalidInput("supertype size mismatch");
  auto m = induced_marginal(kernel, truth);
  for (TypeIndex t = 0; t < m.size(); ++t)
    if (std::abs(m[t] - reported(t)) > tol) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Strategy

template <TwoStageGame G>
class Strategy {
 public:
  using FirstStage = std::function<Supertype(const Supertype&)>;
  using PolicyFactory =
      std::function<std::unique_ptr<BiddingPolicy<G>>(const G&, PlayerIndex self)>;

  Strategy(std::string name, FirstStage first_stage, PolicyFactory factory,
           std::optional<StrategyConfig> config = std::nullopt)
      : name_(std::move(name)),
        first_stage_(std::move(first_stage)),
        factory_(std::move(factory)),
        config_(std::move(config)) {}

  const std::string& name() const noexcept { return name_; }
  Supertype first_stage(const Supertype& truth) const { return first_stage_(truth); }
  std::unique_ptr<BiddingPolicy<G>> make_policy(const G& game, PlayerIndex self) const {
    return factory_(game, self);
  }
  /// Present for library strategies; custom strategies have none.
  const std::optional<StrategyConfig>& config() const noexcept { return config_; }

 private:
  std::string name_;
  FirstStage first_stage_;
  PolicyFactory factory_;
  std::optional<StrategyConfig> config_;
};

namespace detail {

template <TwoStageGame G>
class TruthfulPolicy final : public BiddingPolicy<G> {
 public:
  TypeIndex bid(const HistoryView<G>& h, Stream&) override { return h.today(); }
};

template <TwoStageGame G>
class KernelPolicy final : public BiddingPolicy<G> {
 public:
  explicit KernelPolicy(Kernel kernel) : kernel_(std::move(kernel)) {}
  TypeIndex bid(const HistoryView<G>& h, Stream& rng) override {
    return kernel_[h.today()].sample(rng.uniform());
  }

 private:
  Kernel kernel_;
};

/// Leans toward what yesterday's public outcome reveals about the target's
/// type, and bids the most under-represented type whenever its own running
/// frequencies drift more than half a window from its reported supertype.
template <TwoStageGame G>
class MimicPolicy final : public BiddingPolicy<G> {
 public:
  MimicPolicy(PlayerIndex target, double bias, std::size_t types)
      : target_(target), bias_(bias), counts_(types, 0) {}

  TypeIndex bid(const HistoryView<G>& h, Stream& rng) override {
    const double u = rng.uniform();
    TypeIndex choice = h.today();
    if (h.day > 1) {
      if (u < bias_) choice = h.game.type_signal(h.first_stage, h.outcomes.back(), target_);
      const double seen = static_cast<double>(h.day - 1);
      double worst = 0.0;
      TypeIndex scarcest = 0;
      double scarcest_gap = std::numeric_limits<double>::infinity();
      for (TypeIndex t = 0; t < counts_.size(); ++t) {
        const double gap = static_cast<double>(counts_[t]) / seen - h.reported(t);
        worst = std::max(worst, std::abs(gap));
        if (gap < scarcest_gap) {
          scarcest_gap = gap;
          scarcest = t;
        }
      }
      if (worst > 0.5 * window_r(h.day, h.params.gamma)) choice = scarcest;
    }
    ++counts_[choice];
    return choice;
  }

 private:
  PlayerIndex target_;
  double bias_;
  std::vector<std::uint64_t> counts_;
};

template <TwoStageGame G>
void check_kernel(const G& game, const Kernel& kernel) {
  const std::size_t k = game.types().size();
  if (kernel.size() != k) throw InvalidInput("kernel must have one row per type");
  for (const auto& row : kernel)
    if (row.size() != k) throw InvalidInput("kernel row size does not match the type space");
}

}  // namespace detail

/// Bids the true supertype and the true type every day.
template <TwoStageGame G>
Strategy<G> truthful_strategy() {
  return Strategy<G>(
      "truthful", [](const Supertype& truth) { return truth; },
      [](const G&, PlayerIndex) { return std::make_unique<detail::TruthfulPolicy<G>>(); },
      TruthfulConfig{});
}

/// Reports a fixed supertype regardless of the truth; bids true types.
template <TwoStageGame G>
Strategy<G> supertype_misreport(Supertype reported) {
  return Strategy<G>(
      "supertype_misreport", [reported](const Supertype&) { return reported; },
      [reported](const G& game, PlayerIndex) {
        if (reported.size() != game.types().size())
          throw InvalidInput("reported supertype size does not match the type space");
        return std::make_unique<detail::TruthfulPolicy<G>>();
      },
      MisreportConfig{reported});
}

/// Reports a fixed supertype; each day bids a draw from kernel[true type],
/// independently across days.
template <TwoStageGame G>
Strategy<G> stationary_type_misreport(Kernel kernel, Supertype reported,
                                      std::string name = "stationary") {
  return Strategy<G>(
      std::move(name), [reported](const Supertype&) { return reported; },
      [kernel, reported](const G& game, PlayerIndex) {
        detail::check_kernel(game, kernel);
        if (reported.size() != game.types().size())
          throw InvalidInput("reported supertype size does not match the type space");
        return std::make_unique<detail::KernelPolicy<G>>(kernel);
      },
      StationaryConfig{kernel, reported});
}

/// Reports its true supertype; correlates its type bids with the public
/// outcome history (a proxy for the target's bids) with probability `bias`,
/// while rebalancing to keep its bid marginals near the report.
template <TwoStageGame G>
Strategy<G> correlated_mimic_strategy(PlayerIndex target, double bias = 0.3) {
  if (!(bias >= 0.0 && bias <= 1.0)) throw InvalidInput("bias must lie in [0, 1]");
  return Strategy<G>(
      "correlated_mimic", [](const Supertype& truth) { return truth; },
      [target, bias](const G& game, PlayerIndex self) -> std::unique_ptr<BiddingPolicy<G>> {
        if (target == self) throw InvalidInput("mimic target must be another player");
        if (target >= game.players()) throw InvalidInput("mimic target out of range");
        return std::make_unique<detail::MimicPolicy<G>>(target, bias, game.types().size());
      },
      MimicConfig{target, bias});
}

template <TwoStageGame G>
Strategy<G> make_strategy(const StrategyConfig& config) {
  return std::visit(
      [](const auto& c) -> Strategy<G> {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, TruthfulConfig>) return truthful_strategy<G>();
        else if constexpr (std::is_same_v<C, MisreportConfig>)
          return supertype_misreport<G>(c.reported);
        else if constexpr (std::is_same_v<C, StationaryConfig>)
          return stationary_type_misreport<G>(c.kernel, c.reported);
        else return correlated_mimic_strategy<G>(c.target, c.bias);
      },
      config);
}

// ---------------------------------------------------------------------------
// Library

/// A library strategy with its designer's claim about marginal matching.
template <TwoStageGame G>
struct LibraryEntry {
  Strategy<G> strategy;
  bool designed_marginal_matching;
  std::optional<Kernel> kernel;  // stationary entries only
  Supertype reported;            // supertype bid it makes for the given truth
};

/// Puts `high` mass on the top type and spreads the rest evenly.
inline Supertype skewed_supertype(std::size_t types, double high) {
  if (types == 1) return Supertype::point_mass(1, 0);
  std::vector<double> m(types, (1.0 - high) / static_cast<double>(types - 1));
  m.back() = high;
  return Supertype::from_weights(std::move(m));
}

/// The built-in deviations for a player whose true supertype is `truth`:
/// truthful, supertype misreport (0.8 on the top type), flip kernel with its
/// induced report, always-lowest kernel with the truthful report, and the
/// correlated mimic aimed at `target`.
template <TwoStageGame G>
std::vector<LibraryEntry<G>> strategy_library(const Supertype& truth, PlayerIndex target,
                                              double mimic_bias = 0.3) {
  const std::size_t k = truth.size();
  std::vector<LibraryEntry<G>> lib;
  lib.push_back({truthful_strategy<G>(), true, identity_kernel(k), truth});

  Supertype skewed = skewed_supertype(k, 0.8);
  lib.push_back({supertype_misreport<G>(skewed), false, identity_kernel(k), skewed});

  Kernel flip = flip_kernel(k);
  Supertype flipped = Supertype::from_weights(induced_marginal(flip, truth));
  lib.push_back({stationary_type_misreport<G>(flip, flipped, "flip_kernel"), true, flip, flipped});

  Kernel lowest = constant_kernel(k, 0);
  lib.push_back({stationary_type_misreport<G>(lowest, truth, "always_lowest"), false, lowest, truth});

  lib.push_back({correlated_mimic_strategy<G>(target, mimic_bias), true, std::nullopt, truth});
  return lib;
}

}  // namespace twostage
