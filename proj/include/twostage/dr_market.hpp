#pragma once

// Demand-response market: providers with quadratic curtailment costs
// (δ_i/2)x², a reserve generator with cost (δ_s/2)g², and a daily shortage d
// to cover. Welfare-optimal dispatch has a closed form; the posted-price
// baseline pays a fixed price per unit curtailed.

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twostage/core.hpp"
#include "twostage/game_core.hpp"
#include "twostage/random.hpp"

namespace twostage {

struct DrAllocation {
  std::vector<double> curtailments;
  double reserve = 0.0;
  double multiplier = 0.0;  // common marginal cost λ

  friend bool operator==(const DrAllocation&, const DrAllocation&) = default;
};

/// Minimizes Σ (δ̂_i/2)x_i² + (δ_s/2)g_s² subject to Σ x_i + g_s = d.
/// The KKT point equalizes marginal costs: x_i = λ/δ̂_i, g_s = λ/δ_s with
/// λ = d / (Σ 1/δ̂_i + 1/δ_s).
inline DrAllocation dr_allocate(std::span<const double> bid_params, double delta_s, double d) {
  if (!(delta_s > 0.0)) throw InvalidInput("reserve cost parameter must be positive");
  if (!(d >= 0.0)) throw InvalidInput("demand must be nonnegative");
  double inverse_sum = 1.0 / delta_s;
  for (double p : bid_params) {
    if (!(p > 0.0)) throw InvalidInput("provider cost parameter must be positive");
    inverse_sum += 1.0 / p;
  }
  DrAllocation a;
  a.multiplier = d / inverse_sum;
  a.curtailments.reserve(bid_params.size());
  for (double p : bid_params) a.curtailments.push_back(a.multiplier / p);
  a.reserve = a.multiplier / delta_s;
  return a;
}

/// Σ (δ_i/2)x_i² + (δ_s/2)g_s² at the given true parameters.
inline double dr_social_cost(const DrAllocation& a, std::span<const double> params,
                             double delta_s) {
  double c = 0.5 * delta_s * a.reserve * a.reserve;
  for (std::size_t i = 0; i < a.curtailments.size(); ++i)
    c += 0.5 * params[i] * a.curtailments[i] * a.curtailments[i];
  return c;
}

// ---------------------------------------------------------------------------
// Instance description

struct DrSpec {
  std::size_t n = 0;
  std::vector<double> grid;          // cost-parameter type space, all > 0
  SupertypeProfile supertypes;       // one per provider, on the grid
  Supertype reserve_dist;            // δ_s, on the grid, redrawn daily
  double demand = 10.0;              // constant shortage d(l)
  std::vector<double> price_grid;    // posted-price sweep
  SamplingPolicy sampling{true, 100'000, 0x5eed};

  void validate() const {
    if (n < 1) throw InvalidInput("DR instance needs at least one provider");
    if (n > kMaxPlayers) throw InvalidInput("at most 64 providers are supported");
    if (grid.empty()) throw InvalidInput("empty cost grid");
    for (double g : grid)
      if (!(g > 0.0)) throw InvalidInput("cost grid values must be positive");
    check_profile(supertypes, n, grid.size());
    if (reserve_dist.size() != grid.size())
      throw InvalidInput("reserve distribution must be defined on the cost grid");
    if (!(demand >= 0.0)) throw InvalidInput("demand must be nonnegative");
  }
};

/// The DR market as a two-stage game. There is no physical day-ahead
/// decision, so the first stage is a single outcome; supertype bids still
/// drive the VCG charge and the expected-valuation transfer. A provider's
/// valuation is minus its curtailment cost; the planner's cost is the
/// reserve's. The reserve parameter δ_s is the game's daily nature state.
class DrGame {
 public:
  using outcome_type = DrAllocation;

  explicit DrGame(DrSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    types_ = TypeSpace::numeric(spec_.grid);
  }

  const DrSpec& spec() const noexcept { return spec_; }
  std::size_t players() const noexcept { return spec_.n; }
  const TypeSpace& types() const noexcept { return types_; }
  std::size_t first_stage_count() const noexcept { return 1; }
  const Supertype& nature() const noexcept { return spec_.reserve_dist; }
  const SamplingPolicy& sampling() const noexcept { return spec_.sampling; }

  DrAllocation best_second_stage(OutcomeIndex, std::span<const TypeIndex> profile,
                                 std::size_t state, PlayerSet set) const {
    const double delta_s = spec_.grid[state];
    double inverse_sum = 1.0 / delta_s;
    for (PlayerIndex i = 0; i < spec_.n; ++i)
      if (set.contains(i)) inverse_sum += 1.0 / spec_.grid[profile[i]];
    DrAllocation a;
    a.multiplier = spec_.demand / inverse_sum;
    a.curtailments.assign(spec_.n, 0.0);
    for (PlayerIndex i = 0; i < spec_.n; ++i)
      if (set.contains(i)) a.curtailments[i] = a.multiplier / spec_.grid[profile[i]];
    a.reserve = a.multiplier / delta_s;
    return a;
  }

  double valuation(PlayerIndex i, TypeIndex t, OutcomeIndex, const DrAllocation& a,
                   std::size_t = 0) const {
    const double x = a.curtailments[i];
    return -0.5 * spec_.grid[t] * x * x;
  }

  double cost(OutcomeIndex, const DrAllocation& a, std::size_t state) const {
    return 0.5 * spec_.grid[state] * a.reserve * a.reserve;
  }

  std::string first_stage_label(OutcomeIndex) const { return "dispatch"; }
  std::string outcome_label(const DrAllocation& a) const {
    return "lambda=" + TypeSpace::format_number(a.multiplier);
  }

  /// Grid point nearest the target's implied bid λ / x_target.
  TypeIndex type_signal(OutcomeIndex, const DrAllocation& a, PlayerIndex target) const {
    const double x = a.curtailments.at(target);
    if (!(x > 0.0)) return 0;
    const double implied = a.multiplier / x;
    TypeIndex best = 0;
    for (TypeIndex t = 1; t < spec_.grid.size(); ++t)
      if (std::abs(spec_.grid[t] - implied) < std::abs(spec_.grid[best] - implied)) best = t;
    return best;
  }

 private:
  DrSpec spec_;
  TypeSpace types_;
};

inline DrGame build_dr_game(DrSpec spec) { return DrGame(std::move(spec)); }

// ---------------------------------------------------------------------------
// Scaled beta supertypes

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

struct DiscreteDistribution {
  std::vector<double> points;
  Supertype pmf;

  double mean() const { return pmf.mean(points); }
};

/// (α, β) of the beta law on [0, scale] with the given mean and variance.
inline std::pair<double, double> moment_matched_beta(double mean, double variance,
                                                     double scale) {
  if (!(scale > 0.0) || !(variance > 0.0)) throw InvalidInput("scale and variance must be positive");
  const double mu = mean / scale;
  const double var = variance / (scale * scale);
  if (!(mu > 0.0 && mu < 1.0)) throw InvalidInput("mean must lie strictly inside [0, scale]");
  const double concentration = mu * (1.0 - mu) / var - 1.0;
  if (!(concentration > 0.0))
    throw InvalidInput("variance too large for a beta law with this mean and scale");
  return {mu * concentration, (1.0 - mu) * concentration};
}

/// K equally spaced points on `grid` (default: the whole support) carrying
/// the mass of Beta(α, β) mapped affinely onto `support`. Each point takes
/// the probability of its cell: cells split at midpoints, the first cell
/// starts at support.lo and the last ends at support.hi, so mass outside the
/// grid range collapses onto the end points.
inline DiscreteDistribution discretize_scaled_beta(double alpha, double beta, Interval support,
                                                   std::size_t k,
                                                   std::optional<Interval> grid = std::nullopt) {
  if (!(alpha > 0.0 && beta > 0.0)) throw InvalidInput("beta parameters must be positive");
  if (k < 2) throw InvalidInput("need at least two grid points");
  const Interval range = grid.value_or(support);
  if (!(range.lo > 0.0)) throw InvalidInput("grid must be strictly positive");
  if (!(range.lo < range.hi)) throw InvalidInput("empty grid range");
  if (!(support.lo <= range.lo && range.hi <= support.hi))
    throw InvalidInput("grid range must lie inside the beta support");

  const double width = support.hi - support.lo;
  auto cdf = [&](double x) {
    const double u = std::clamp((x - support.lo) / width, 0.0, 1.0);
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return boost::math::ibeta(alpha, beta, u);
  };

  DiscreteDistribution out;
  const double step = (range.hi - range.lo) / static_cast<double>(k - 1);
  for (std::size_t j = 0; j < k; ++j)
    out.points.push_back(j + 1 == k ? range.hi : range.lo + step * static_cast<double>(j));
  std::vector<double> mass(k);
  double left = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double right = j + 1 == k ? 1.0 : cdf(0.5 * (out.points[j] + out.points[j + 1]));
    mass[j] = right - left;
    left = right;
  }
  out.pmf = Supertype::from_weights(std::move(mass));
  return out;
}

/// Cost-parameter law for the numerical study: mean `mean`, variance 2 on
/// [0, 10], positivity-truncated at 0.1 and discretized to `k` points.
inline DiscreteDistribution default_cost_distribution(double mean = 1.0, std::size_t k = 16,
                                                      double variance = 2.0) {
  auto [a, b] = moment_matched_beta(mean, variance, 10.0);
  return discretize_scaled_beta(a, b, Interval{0.0, 10.0}, k, Interval{0.1, 10.0});
}

/// Re-expresses a distribution on `from` points over a larger sorted grid
/// that contains them all.
inline Supertype embed_distribution(const DiscreteDistribution& dist,
                                    std::span<const double> grid) {
  std::vector<double> mass(grid.size(), 0.0);
  for (std::size_t j = 0; j < dist.points.size(); ++j) {
    auto it = std::find(grid.begin(), grid.end(), dist.points[j]);
    if (it == grid.end()) throw InvalidInput("grid does not contain a distribution point");
    mass[static_cast<std::size_t>(it - grid.begin())] += dist.pmf(j);
  }
  return Supertype::from_weights(std::move(mass));
}

/// Uniform providers and reserve on the default cost law.
inline DrSpec default_dr_spec(std::size_t n, std::size_t k = 16, double demand = 10.0) {
  auto dist = default_cost_distribution(1.0, k);
  DrSpec spec;
  spec.n = n;
  spec.grid = dist.points;
  spec.supertypes.assign(n, dist.pmf);
  spec.reserve_dist = dist.pmf;
  spec.demand = demand;
  for (int j = 0; j < 50; ++j) spec.price_grid.push_back(j / 5.0);
  return spec;
}

// ---------------------------------------------------------------------------
// Day draws shared by the mechanism and the posted-price baseline

struct DrDay {
  std::vector<double> params;  // true δ_i
  double delta_s = 1.0;
};

/// True parameters for `days` days, using the same per-provider and nature
/// streams as the simulation engine, so results pair across experiments.
inline std::vector<DrDay> draw_dr_days(const DrSpec& spec, std::size_t days, std::uint64_t seed) {
  spec.validate();
  std::vector<Stream> streams;
  for (PlayerIndex i = 0; i < spec.n; ++i) streams.emplace_back(seed, StreamTag::kTypes, i);
  Stream nature(seed, StreamTag::kNature, 0);
  std::vector<DrDay> out(days);
  for (auto& day : out) {
    day.params.resize(spec.n);
    for (PlayerIndex i = 0; i < spec.n; ++i)
      day.params[i] = spec.grid[spec.supertypes[i].sample(streams[i].uniform())];
    day.delta_s = spec.grid[spec.reserve_dist.sample(nature.uniform())];
  }
  return out;
}

/// Social cost of truthful, welfare-optimal dispatch on one day.
inline double optimal_dr_cost(const DrDay& day, double demand) {
  return dr_social_cost(dr_allocate(day.params, day.delta_s, demand), day.params, day.delta_s);
}

// ---------------------------------------------------------------------------
// Posted price

/// Curtailment minimizing (δ/2)x² − p·x, clamped at zero for negative prices.
inline double posted_price_response(double delta_i, double price) {
  if (!(delta_i > 0.0)) throw InvalidInput("cost parameter must be positive");
  return std::max(price, 0.0) / delta_i;
}

/// Social cost under a posted price; over-curtailment (negative residual) is
/// charged the same quadratic reserve cost.
inline double posted_price_cost(const DrDay& day, double demand, double price) {
  double cost = 0.0;
  double residual = demand;
  for (double delta : day.params) {
    const double x = posted_price_response(delta, price);
    cost += 0.5 * delta * x * x;
    residual -= x;
  }
  return cost + 0.5 * day.delta_s * residual * residual;
}

struct MeanWithError {
  double mean = 0.0;
  double std_error = 0.0;
};

inline MeanWithError mean_with_error(std::span<const double> xs) {
  if (xs.empty()) return {};
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

struct PriceSweep {
  std::vector<double> prices;
  std::vector<MeanWithError> costs;
  std::size_t best = 0;  // argmin of mean cost, lowest price on ties
};

/// Mean posted-price social cost per price over `days` common draws.
inline PriceSweep posted_price_sweep(const DrSpec& spec, std::size_t days, std::uint64_t seed) {
  if (spec.price_grid.empty()) throw InvalidInput("price grid is empty");
  const auto draws = draw_dr_days(spec, days, seed);
  PriceSweep sweep;
  sweep.prices = spec.price_grid;
  std::vector<double> per_day(days);
  for (double p : spec.price_grid) {
    for (std::size_t d = 0; d < days; ++d) per_day[d] = posted_price_cost(draws[d], spec.demand, p);
    sweep.costs.push_back(mean_with_error(per_day));
  }
  for (std::size_t j = 1; j < sweep.costs.size(); ++j)
    if (sweep.costs[j].mean < sweep.costs[sweep.best].mean) sweep.best = j;
  return sweep;
}

/// Mean optimal-dispatch social cost over the same draws as posted_price_sweep.
inline MeanWithError mechanism_cost(const DrSpec& spec, std::size_t days, std::uint64_t seed) {
  const auto draws = draw_dr_days(spec, days, seed);
  std::vector<double> per_day(days);
  for (std::size_t d = 0; d < days; ++d) per_day[d] = optimal_dr_cost(draws[d], spec.demand);
  return mean_with_error(per_day);
}

}  // namespace twostage
