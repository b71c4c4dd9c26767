#include <gtest/gtest.h>

#include <memory>
#include <mutex>

#include "twostage/engine.hpp"

namespace twostage {
namespace {

using G = GameSpec;

SimulationConfig<G> reference_config(std::size_t days, std::uint64_t seed) {
  SimulationConfig<G> c;
  c.game = std::make_shared<const G>(make_reference_game());
  c.strategies = {truthful_strategy<G>(), truthful_strategy<G>()};
  c.true_supertypes = reference_supertypes();
  c.params.horizon = days;
  c.seed = seed;
  return c;
}

// One truthful day checked field by field against hand arithmetic on G1:
// player 0 values p1 at its type, player 1 values p2 at its type.
TEST(Engine, SingleDayHandOracle) {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto ledger = run_simulation(reference_config(1, seed));
    ASSERT_EQ(ledger.days.size(), 1u);
    const auto& rec = ledger.days[0];
    const TypeIndex t0 = rec.true_types[0], t1 = rec.true_types[1];
    EXPECT_EQ(rec.bids, rec.true_types);
    const char* expected = t0 == 1 ? "p1" : (t1 == 1 ? "p2" : "none");
    EXPECT_EQ(make_reference_game().outcome_label(rec.o2), expected);
    const double v0 = (t0 == 1) ? 1.0 : 0.0;
    const double v1 = (t0 == 0 && t1 == 1) ? 1.0 : 0.0;
    EXPECT_EQ(rec.valuations, (std::vector<double>{v0, v1}));
    EXPECT_EQ(rec.penalty_flags, (std::vector<std::uint8_t>{0, 0}));
    EXPECT_DOUBLE_EQ(rec.payments[0].first_stage, 0.25);
    EXPECT_DOUBLE_EQ(rec.payments[1].first_stage, 0.0);
    EXPECT_DOUBLE_EQ(rec.payments[0].second_stage_base, v0 - 0.5);
    EXPECT_DOUBLE_EQ(rec.payments[1].second_stage_base, v1 - 0.25);
    EXPECT_DOUBLE_EQ(estimate_utility(ledger, 0), v0 - (0.25 + v0 - 0.5));
    EXPECT_DOUBLE_EQ(estimate_welfare(ledger), v0 + v1);
  }
}

TEST(Engine, DeterministicPerSeed) {
  const auto a = run_simulation(reference_config(500, 42));
  const auto b = run_simulation(reference_config(500, 42));
  const auto c = run_simulation(reference_config(500, 43));
  EXPECT_EQ(a.config_hash, b.config_hash);
  EXPECT_NE(a.config_hash, c.config_hash);
  bool differs = false;
  for (std::size_t d = 0; d < 500; ++d) {
    ASSERT_EQ(a.days[d].bids, b.days[d].bids);
    ASSERT_EQ(a.days[d].payments[0].total, b.days[d].payments[0].total);
    differs = differs || a.days[d].bids != c.days[d].bids;
  }
  EXPECT_TRUE(differs);
}

class ConstantPolicy final : public BiddingPolicy<G> {
 public:
  explicit ConstantPolicy(TypeIndex t) : t_(t) {}
  TypeIndex bid(const HistoryView<G>&, Stream&) override { return t_; }

 private:
  TypeIndex t_;
};

TEST(Engine, OutOfRangeBidThrows) {
  auto c = reference_config(10, 1);
  c.strategies[1] = Strategy<G>(
      "broken", [](const Supertype& s) { return s; },
      [](const G&, PlayerIndex) { return std::make_unique<ConstantPolicy>(2); });
  try {
    run_simulation(c);
    FAIL() << "expected InvalidBid";
  } catch (const InvalidBid& e) {
    EXPECT_EQ(e.player(), 1u);
    EXPECT_EQ(e.day(), 1u);
  }
}

TEST(Engine, RejectsMalformedConfig) {
  auto c = reference_config(10, 1);
  c.strategies.pop_back();
  EXPECT_THROW(run_simulation(c), InvalidInput);
  c = reference_config(10, 1);
  c.params.penalty_exponent = 0.5;
  EXPECT_THROW(run_simulation(c), InvalidInput);
  c = reference_config(10, 1);
  c.game.reset();
  EXPECT_THROW(run_simulation(c), InvalidInput);
}

// Ledger fields recomputed from scratch: each day's outcome is the optimal
// recourse for the bids, payments add up, and the aggregate estimators are
// plain averages of the per-day records.
TEST(Engine, LedgerAccountingIdentities) {
  auto c = reference_config(3000, 8);
  c.strategies[0] = supertype_misreport<G>(Supertype({0.4, 0.6}));
  const auto ledger = run_simulation(c);
  const G& g = *c.game;
  double utility0 = 0.0, welfare = 0.0, paid1 = 0.0;
  for (const auto& rec : ledger.days) {
    ASSERT_EQ(rec.o2, optimal_second_stage(g, rec.o1, rec.bids));
    for (PlayerIndex i = 0; i < 2; ++i) {
      const auto& p = rec.payments[i];
      ASSERT_EQ(p.total, p.first_stage + p.second_stage_base + p.penalty);
      ASSERT_EQ(p.penalty, rec.penalty_flags[i] ? penalty_Jp(rec.day, c.params) : 0.0);
      ASSERT_EQ(rec.valuations[i], g.valuation(i, rec.true_types[i], rec.o1, rec.o2));
    }
    utility0 += rec.valuations[0] - rec.payments[0].total;
    welfare += rec.valuations[0] + rec.valuations[1] - rec.planner_cost;
    paid1 += rec.payments[1].total;
  }
  const double days = static_cast<double>(ledger.days.size());
  EXPECT_NEAR(estimate_utility(ledger, 0), utility0 / days, 1e-9);
  EXPECT_NEAR(estimate_welfare(ledger), welfare / days, 1e-12);
  EXPECT_NEAR(average_payment(ledger, 1), paid1 / days, 1e-12);
  EXPECT_NEAR(running_utility(ledger, 0, 10) * 10.0,
              [&] {
                double s = 0.0;
                for (std::size_t d = 0; d < 10; ++d)
                  s += ledger.days[d].valuations[0] - ledger.days[d].payments[0].total;
                return s;
              }(),
              1e-9);
}

TEST(Engine, ProductFormGapOfSingleDay) {
  const auto ledger = run_simulation(reference_config(1, 4));
  EXPECT_DOUBLE_EQ(verify_product_form(ledger, ledger.reported), 0.75);
}

TEST(Engine, TruthfulDeviationHasExactlyZeroGain) {
  const auto c = reference_config(300, 1);
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  EXPECT_EQ(deviation_gain(c, 0, truthful_strategy<G>(), seeds), 0.0);
  EXPECT_EQ(deviation_gain(c, 1, truthful_strategy<G>(), seeds), 0.0);
}

TEST(Engine, InspectorSeesBothLedgersPerSeed) {
  const auto c = reference_config(50, 1);
  const std::vector<std::uint64_t> seeds = {1, 2};
  std::mutex m;
  std::size_t seen = 0;
  const auto flip = stationary_type_misreport<G>(flip_kernel(2), Supertype::uniform(2));
  deviation_gain<G>(c, 0, flip, seeds, [&](const Ledger<G>&) {
    std::lock_guard lock(m);
    ++seen;
  });
  EXPECT_EQ(seen, 4u);
}

TEST(Audit, AgreesWithExhaustiveReplay) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto c = reference_config(3000, seed);
    c.strategies[0] = supertype_misreport<G>(Supertype({0.3, 0.7}));
    c.strategies[1] = stationary_type_misreport<G>(constant_kernel(2, 0), Supertype::uniform(2));
    const auto ledger = run_simulation(c);
    EXPECT_GT(penalty_days(ledger, 1), 0u);
    EXPECT_GT(penalty_days(ledger, 0), 0u);
    EXPECT_EQ(audit_penalty_flags(ledger, c.params), 0u);
    EXPECT_EQ(audit_penalty_flags_exhaustive(ledger, c.params), 0u);
  }
}

TEST(Audit, AgreesOnLongCorrelatedRun) {
  auto c = reference_config(30000, 1);
  c.strategies = {correlated_mimic_strategy<G>(1, 0.3), correlated_mimic_strategy<G>(0, 0.3)};
  const auto ledger = run_simulation(c);
  EXPECT_GT(penalty_days(ledger, 0, 501), 0u);
  EXPECT_EQ(audit_penalty_flags(ledger, c.params), 0u);
  EXPECT_EQ(audit_penalty_flags_exhaustive(ledger, c.params), 0u);
}

TEST(Audit, DetectsTamperedFlags) {
  auto ledger = run_simulation(reference_config(2000, 6));
  ledger.days[1500].penalty_flags[1] ^= 1;
  ledger.days[3].penalty_flags[0] ^= 1;
  const MechanismParams params = reference_config(2000, 6).params;
  EXPECT_EQ(audit_penalty_flags(ledger, params), 2u);
  EXPECT_EQ(audit_penalty_flags_exhaustive(ledger, params), 2u);
}

TEST(ConfigHash, SensitiveToEveryInput) {
  const auto base = reference_config(100, 1);
  const auto h = config_hash(base);
  EXPECT_EQ(h, config_hash(reference_config(100, 1)));
  auto c = base;
  c.params.horizon = 101;
  EXPECT_NE(config_hash(c), h);
  c = base;
  c.params.gamma = 0.5;
  EXPECT_NE(config_hash(c), h);
  c = base;
  c.strategies[0] = supertype_misreport<G>(Supertype({0.2, 0.8}));
  EXPECT_NE(config_hash(c), h);
  c = base;
  c.true_supertypes[1] = Supertype({0.3, 0.7});
  EXPECT_NE(config_hash(c), h);
}

}  // namespace
}  // namespace twostage
