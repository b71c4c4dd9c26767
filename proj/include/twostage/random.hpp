#pragma once

#include <cstdint>
#include <random>

namespace twostage {

/// Purposes for which a run derives independent random streams.
enum class StreamTag : std::uint32_t {
  kTypes = 1,     // nature's draw of a player's daily type
  kPolicy = 2,    // a player's own randomized bidding
  kNature = 3,    // exogenous planner-side state (e.g. reserve cost)
  kSampling = 4,  // Monte Carlo expectations
};

/// Seeded 64-bit stream. Each (seed, tag, index) triple gives an independent
/// generator, so changing one player's behaviour never perturbs another
/// player's draws.
class Stream {
 public:
  Stream(std::uint64_t seed, StreamTag tag, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace twostage
