#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace twostage {

using TypeIndex = std::size_t;
using PlayerIndex = std::size_t;
using OutcomeIndex = std::size_t;

/// Largest number of grid points any exact expectation will enumerate.
inline constexpr std::size_t kMaxExactProfiles = 1'000'000;

/// Tolerance on the total mass of a probability vector.
inline constexpr double kMassTolerance = 1e-12;

// ---------------------------------------------------------------------------
// Errors

class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an exact expectation would enumerate more than
/// kMaxExactProfiles points and the game has no sampling fallback.
class GridSizeError : public std::length_error {
 public:
  explicit GridSizeError(std::size_t profiles)
      : std::length_error("exact enumeration over " + std::to_string(profiles) +
                          " profiles exceeds the limit of " +
                          std::to_string(kMaxExactProfiles)),
        profiles_(profiles) {}
  std::size_t profiles() const noexcept { return profiles_; }

 private:
  std::size_t profiles_;
};

class InvalidBid : public std::runtime_error {
 public:
  InvalidBid(PlayerIndex player, std::size_t day, std::size_t bid)
      : std::runtime_error("player " + std::to_string(player) + " bid type index " +
                           std::to_string(bid) + " outside the type space on day " +
                           std::to_string(day)),
        player_(player),
        day_(day) {}
  PlayerIndex player() const noexcept { return player_; }
  std::size_t day() const noexcept { return day_; }

 private:
  PlayerIndex player_;
  std::size_t day_;
};

// ---------------------------------------------------------------------------
// Type space

/// Ordered, finite list of type labels. Labels are either all numeric (cost
/// parameters, valuations) or all abstract tokens.
class TypeSpace {
 public:
  TypeSpace() = default;

  static TypeSpace tokens(std::vector<std::string> labels) {
    TypeSpace space;
    space.labels_ = std::move(labels);
    space.validate();
    return space;
  }

  static TypeSpace numeric(std::vector<double> values) {
    TypeSpace space;
    space.values_ = std::move(values);
    space.labels_.reserve(space.values_.size());
    for (double v : space.values_) space.labels_.push_back(format_number(v));
    space.validate();
    return space;
  }

  std::size_t size() const noexcept { return labels_.size(); }
  bool is_numeric() const noexcept { return !values_.empty(); }
  const std::string& label(TypeIndex t) const { return labels_.at(t); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  double value(TypeIndex t) const {
    if (!is_numeric()) throw InvalidInput("type space has no numeric values");
    return values_.at(t);
  }
  const std::vector<double>& values() const noexcept { return values_; }

  std::optional<TypeIndex> find(const std::string& label) const {
    for (TypeIndex t = 0; t < labels_.size(); ++t)
      if (labels_[t] == label) return t;
    return std::nullopt;
  }

  friend bool operator==(const TypeSpace&, const TypeSpace&) = default;

  /// Shortest round-trip decimal representation.
  static std::string format_number(double v);

 private:
  void validate() const {
    if (labels_.empty()) throw InvalidInput("type space must be nonempty");
    for (std::size_t a = 0; a < labels_.size(); ++a)
      for (std::size_t b = a + 1; b < labels_.size(); ++b)
        if (labels_[a] == labels_[b])
          throw InvalidInput("duplicate type label '" + labels_[a] + "'");
  }

  std::vector<std::string> labels_;
  std::vector<double> values_;
};

inline std::string TypeSpace::format_number(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Supertype

/// Probability mass function over a type space, stored densely by type index.
class Supertype {
 public:
  Supertype() = default;

  explicit Supertype(std::vector<double> mass) : mass_(std::move(mass)) {
    if (mass_.empty()) throw InvalidInput("supertype has no mass entries");
    double total = 0.0;
    for (double m : mass_) {
      if (!(m >= 0.0) || !std::isfinite(m))
        throw InvalidInput("supertype mass must be finite and nonnegative");
      total += m;
    }
    if (std::abs(total - 1.0) > kMassTolerance)
      throw InvalidInput("supertype masses sum to " + std::to_string(total) + ", not 1");
  }

  static Supertype point_mass(std::size_t size, TypeIndex at) {
    std::vector<double> m(size, 0.0);
    m.at(at) = 1.0;
    return Supertype(std::move(m));
  }

  static Supertype uniform(std::size_t size) {
    return Supertype(std::vector<double>(size, 1.0 / static_cast<double>(size)));
  }

  /// Normalizes nonnegative weights; throws if they are all zero.
  static Supertype from_weights(std::vector<double> w) {
    double total = 0.0;
    for (double x : w) {
      if (!(x >= 0.0)) throw InvalidInput("negative weight");
      total += x;
    }
    if (!(total > 0.0)) throw InvalidInput("weights sum to zero");
    for (double& x : w) x /= total;
    // Push the rounding residue onto the largest entry so the sum is 1.
    double resid = 1.0 - std::accumulate(w.begin(), w.end(), 0.0);
    auto big = std::max_element(w.begin(), w.end());
    *big += resid;
    return Supertype(std::move(w));
  }

  std::size_t size() const noexcept { return mass_.size(); }
  double operator()(TypeIndex t) const { return mass_.at(t); }
  std::span<const double> masses() const noexcept { return mass_; }

  std::vector<TypeIndex> support() const {
    std::vector<TypeIndex> s;
    for (TypeIndex t = 0; t < mass_.size(); ++t)
      if (mass_[t] > 0.0) s.push_back(t);
    return s;
  }

  /// Inverse-CDF sample; `u` in [0, 1). Falls back to the last supported type
  /// when rounding leaves `u` above the cumulative mass.
  TypeIndex sample(double u) const {
    double acc = 0.0;
    TypeIndex last = 0;
    for (TypeIndex t = 0; t < mass_.size(); ++t) {
      if (mass_[t] <= 0.0) continue;
      acc += mass_[t];
      last = t;
      if (u < acc) return t;
    }
    return last;
  }

  double mean(std::span<const double> values) const {
    double m = 0.0;
    for (TypeIndex t = 0; t < mass_.size(); ++t) m += mass_[t] * values[t];
    return m;
  }

  friend bool operator==(const Supertype&, const Supertype&) = default;

 private:
  std::vector<double> mass_;
};

using SupertypeProfile = std::vector<Supertype>;

inline void check_profile(std::span<const Supertype> profile, std::size_t players,
                          std::size_t types) {
  if (profile.size() != players)
    throw InvalidInput("supertype profile has " + std::to_string(profile.size()) +
                       " entries, game has " + std::to_string(players) + " players");
  for (const auto& s : profile)
    if (s.size() != types)
      throw InvalidInput("supertype defined over " + std::to_string(s.size()) +
                         " types, type space has " + std::to_string(types));
}

// ---------------------------------------------------------------------------
// Player subsets

/// Set of participating players, at most 64.
class PlayerSet {
 public:
  constexpr PlayerSet() = default;
  static constexpr PlayerSet all(std::size_t n) {
    return PlayerSet(n >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1));
  }
  static constexpr PlayerSet none() { return PlayerSet(0); }

  constexpr bool contains(PlayerIndex i) const { return (bits_ >> i) & 1u; }
  constexpr PlayerSet without(PlayerIndex i) const {
    return PlayerSet(bits_ & ~(std::uint64_t{1} << i));
  }
  constexpr PlayerSet with(PlayerIndex i) const {
    return PlayerSet(bits_ | (std::uint64_t{1} << i));
  }
  constexpr std::size_t count() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  constexpr bool empty() const { return bits_ == 0; }

  friend constexpr bool operator==(PlayerSet, PlayerSet) = default;

 private:
  constexpr explicit PlayerSet(std::uint64_t bits) : bits_(bits) {}
  std::uint64_t bits_ = 0;
};

inline constexpr std::size_t kMaxPlayers = 64;

/// Point estimate with its standard error; exact values carry stderr 0.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  bool exact = true;
};

}  // namespace twostage
