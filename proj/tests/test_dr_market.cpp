#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "twostage/dr_market.hpp"
#include "twostage/experiments.hpp"
#include "twostage/mechanism.hpp"
#include "twostage/verification/oracles.hpp"

namespace twostage {
namespace {

std::vector<double> random_params(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.1, 10.0);
  std::vector<double> p(n);
  for (auto& x : p) x = u(rng);
  return p;
}

TEST(Dispatch, WorkedExample) {
  const std::vector<double> params = {1.0, 0.5};
  const auto a = dr_allocate(params, 1.0, 4.0);
  // λ = 4 / (1 + 2 + 1) = 1.
  EXPECT_DOUBLE_EQ(a.multiplier, 1.0);
  EXPECT_EQ(a.curtailments, (std::vector<double>{1.0, 2.0}));
  EXPECT_DOUBLE_EQ(a.reserve, 1.0);
  EXPECT_DOUBLE_EQ(dr_social_cost(a, params, 1.0), 0.5 + 1.0 + 0.5);
}

TEST(Dispatch, RejectsNonPositiveParameters) {
  const std::vector<double> ok = {1.0}, bad = {0.0};
  EXPECT_THROW(dr_allocate(bad, 1.0, 1.0), InvalidInput);
  EXPECT_THROW(dr_allocate(ok, 0.0, 1.0), InvalidInput);
  EXPECT_THROW(dr_allocate(ok, 1.0, -1.0), InvalidInput);
  const auto zero = dr_allocate(ok, 2.0, 0.0);
  EXPECT_EQ(zero.curtailments[0], 0.0);
  EXPECT_EQ(zero.reserve, 0.0);
}

TEST(DispatchProperty, FeasibleKktAndLocallyOptimal) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    const auto params = random_params(rng, n);
    const double delta_s = random_params(rng, 1)[0];
    const double d = 20.0 * (u(rng) + 1.0);
    const auto a = dr_allocate(params, delta_s, d);
    const double total = std::accumulate(a.curtailments.begin(), a.curtailments.end(), a.reserve);
    EXPECT_NEAR(total, d, 1e-12 * std::max(1.0, d));
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GE(a.curtailments[i], 0.0);
      EXPECT_NEAR(params[i] * a.curtailments[i], a.multiplier, 1e-12 * std::max(1.0, d));
    }
    EXPECT_NEAR(delta_s * a.reserve, a.multiplier, 1e-12 * std::max(1.0, d));

    // Moving mass between any two variables along the constraint costs more.
    const double best = dr_social_cost(a, params, delta_s);
    for (int k = 0; k < 5; ++k) {
      DrAllocation b = a;
      const std::size_t from = rng() % (n + 1), to = rng() % (n + 1);
      if (from == to) continue;
      const double eps = 1e-3 * u(rng);
      (from == n ? b.reserve : b.curtailments[from]) -= eps;
      (to == n ? b.reserve : b.curtailments[to]) += eps;
      EXPECT_GE(dr_social_cost(b, params, delta_s), best);
    }
  }
}

TEST(DispatchProperty, AgreesWithProjectedGradient) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 6;
    const auto params = random_params(rng, n);
    const double delta_s = random_params(rng, 1)[0];
    const auto a = dr_allocate(params, delta_s, 10.0);
    const auto qp = verification::projected_gradient_dispatch(params, delta_s, 10.0);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(a.curtailments[i], qp.curtailments[i], 1e-8);
    EXPECT_NEAR(a.reserve, qp.reserve, 1e-8);
    EXPECT_NEAR(dr_social_cost(a, params, delta_s), qp.cost, 1e-8);
  }
}

TEST(DispatchProperty, AddingAProviderNeverRaisesCost) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 300; ++trial) {
    auto params = random_params(rng, 1 + rng() % 6);
    const double delta_s = random_params(rng, 1)[0];
    const DrDay before{params, delta_s};
    params.push_back(random_params(rng, 1)[0]);
    const DrDay after{params, delta_s};
    EXPECT_LE(optimal_dr_cost(after, 10.0), optimal_dr_cost(before, 10.0));
  }
}

TEST(DrGame, DegenerateInstanceExpectations) {
  const DrGame g = build_dr_game(degenerate_dr_spec());
  const auto& bids = g.spec().supertypes;
  // Providers at δ = 4 and 2, reserve 1, d = 7: λ = 4, x = (1, 2), g_s = 4.
  EXPECT_DOUBLE_EQ(expected_valuation(g, bids, 0), -2.0);
  EXPECT_DOUBLE_EQ(expected_valuation(g, bids, 1), -4.0);
  const auto q = MechanismQuotes<DrGame>::compute(g, bids);
  EXPECT_TRUE(q.welfare.exact);
  EXPECT_DOUBLE_EQ(q.welfare.value, -14.0);
  EXPECT_DOUBLE_EQ(q.expected_cost.value, 8.0);
}

TEST(DrGame, VcgWelfareWithoutEachProviderIsLower) {
  const DrGame g = build_dr_game(default_dr_spec(3, 6));
  const auto q = MechanismQuotes<DrGame>::compute(g, g.spec().supertypes);
  for (PlayerIndex i = 0; i < 3; ++i) {
    EXPECT_LE(q.welfare_without[i].value, q.welfare.value);
    // The charge W*₋ᵢ − (W* − E v_i) is then at most E v_i < 0: the provider
    // is paid at least its expected curtailment cost.
    EXPECT_LT(q.expected_values[i].value, 0.0);
    EXPECT_LE(q.first_stage_payments[i].value, q.expected_values[i].value + 1e-12);
  }
}

TEST(DrGame, SecondStageMatchesClosedForm) {
  const DrGame g = build_dr_game(default_dr_spec(4, 8));
  const std::vector<TypeIndex> profile = {0, 3, 7, 5};
  for (std::size_t state : {0u, 4u, 7u}) {
    const auto a = g.best_second_stage(0, profile, state, PlayerSet::all(4));
    std::vector<double> params;
    for (TypeIndex t : profile) params.push_back(g.spec().grid[t]);
    const auto b = dr_allocate(params, g.spec().grid[state], g.spec().demand);
    EXPECT_EQ(a.multiplier, b.multiplier);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a.curtailments[i], b.curtailments[i], 1e-14);
  }
  // Excluding a provider is the same as dispatching without it.
  const auto without = g.best_second_stage(0, profile, 2, PlayerSet::all(4).without(1));
  EXPECT_EQ(without.curtailments[1], 0.0);
}

TEST(DrGame, MonteCarloBeyondGridLimit) {
  // 16^5 · 16 profiles exceed the exact limit, so expectations are sampled.
  DrSpec spec = default_dr_spec(5);
  spec.sampling.samples = 2000;
  const DrGame g = build_dr_game(spec);
  const auto w = optimal_welfare(g, g.spec().supertypes, PlayerSet::all(5));
  EXPECT_FALSE(w.exact);
  EXPECT_GT(w.std_error, 0.0);
  spec.sampling.allowed = false;
  const DrGame strict = build_dr_game(spec);
  EXPECT_THROW(optimal_welfare(strict, strict.spec().supertypes, PlayerSet::all(5)), GridSizeError);
}

TEST(PostedPrice, Responses) {
  EXPECT_DOUBLE_EQ(posted_price_response(2.0, 4.0), 2.0);
  EXPECT_DOUBLE_EQ(posted_price_response(2.0, -1.0), 0.0);
  EXPECT_THROW(posted_price_response(0.0, 1.0), InvalidInput);
}

TEST(PostedPrice, ZeroPriceLeavesEverythingToReserve) {
  const DrDay day{{1.0, 2.0, 3.0}, 2.0};
  EXPECT_DOUBLE_EQ(posted_price_cost(day, 5.0, 0.0), 0.5 * 2.0 * 25.0);
}

TEST(PostedPrice, OvercurtailmentIsCharged) {
  const DrDay day{{1.0}, 1.0};
  // x = 6 against d = 4: 18 for the provider plus 0.5 · 4 for the surplus.
  EXPECT_DOUBLE_EQ(posted_price_cost(day, 4.0, 6.0), 18.0 + 2.0);
}

TEST(PostedPrice, ScaleCovariance) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    const auto params = random_params(rng, 1 + rng() % 5);
    const DrDay day{params, 2.5};
    const double c = 0.5 + static_cast<double>(rng() % 8);
    DrDay scaled = day;
    for (auto& p : scaled.params) p *= c;
    scaled.delta_s *= c;
    EXPECT_NEAR(posted_price_cost(scaled, 10.0, 3.0 * c), c * posted_price_cost(day, 10.0, 3.0),
                1e-9 * c * posted_price_cost(day, 10.0, 3.0));
  }
}

TEST(PostedPrice, NeverBeatsOptimalDispatch) {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 200; ++trial) {
    const DrDay day{random_params(rng, 1 + rng() % 6), random_params(rng, 1)[0]};
    const double best = optimal_dr_cost(day, 10.0);
    for (double p = 0.0; p < 10.0; p += 0.25)
      EXPECT_GE(posted_price_cost(day, 10.0, p), best * (1.0 - 1e-12));
  }
}

TEST(PostedPrice, DegenerateInstanceHasZeroGap) {
  const DrSpec spec = degenerate_dr_spec();
  const auto sweep = posted_price_sweep(spec, 200, 1);
  const auto mech = mechanism_cost(spec, 200, 1);
  EXPECT_DOUBLE_EQ(sweep.prices[sweep.best], 4.0);
  EXPECT_DOUBLE_EQ(sweep.costs[sweep.best].mean, 14.0);
  EXPECT_DOUBLE_EQ(mech.mean, 14.0);
}

TEST(Days, DrawsMatchEngineStreams) {
  const DrSpec spec = default_dr_spec(3, 8);
  const auto draws = draw_dr_days(spec, 50, 77);
  SimulationConfig<DrGame> c;
  c.game = std::make_shared<const DrGame>(spec);
  c.strategies.assign(3, truthful_strategy<DrGame>());
  c.true_supertypes = spec.supertypes;
  c.params.horizon = 50;
  c.seed = 77;
  const auto ledger = run_simulation(c);
  for (std::size_t d = 0; d < 50; ++d) {
    EXPECT_EQ(spec.grid[ledger.days[d].state], draws[d].delta_s);
    for (PlayerIndex i = 0; i < 3; ++i)
      EXPECT_EQ(spec.grid[ledger.days[d].true_types[i]], draws[d].params[i]);
  }
}

TEST(MeanWithError, SmallSample) {
  const std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
  const auto m = mean_with_error(xs);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.std_error, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
}

TEST(BetaLaw, MomentMatching) {
  const auto [a, b] = moment_matched_beta(1.0, 2.0, 10.0);
  EXPECT_NEAR(a, 0.35, 1e-12);
  EXPECT_NEAR(b, 3.15, 1e-12);
  EXPECT_THROW(moment_matched_beta(1.0, 100.0, 10.0), InvalidInput);
  EXPECT_THROW(moment_matched_beta(11.0, 1.0, 10.0), InvalidInput);
}

TEST(BetaLaw, CellMassesMatchQuadrature) {
  const double alpha = 0.35, beta = 3.15;
  const auto dist = discretize_scaled_beta(alpha, beta, Interval{0.0, 10.0}, 16, Interval{0.1, 10.0});
  ASSERT_EQ(dist.points.size(), 16u);
  EXPECT_DOUBLE_EQ(dist.points.front(), 0.1);
  EXPECT_DOUBLE_EQ(dist.points.back(), 10.0);
  double left = 0.0;
  for (std::size_t j = 0; j < 16; ++j) {
    const double right = j + 1 == 16 ? 1.0 : 0.5 * (dist.points[j] + dist.points[j + 1]) / 10.0;
    EXPECT_NEAR(dist.pmf(j), verification::beta_cell_mass(alpha, beta, left, right), 1e-7)
        << "cell " << j;
    left = right;
  }
}

TEST(BetaLaw, DefaultCostDistribution) {
  const auto dist = default_cost_distribution();
  EXPECT_NEAR(dist.mean(), 1.0, 0.1);
  double total = 0.0;
  for (double m : dist.pmf.masses()) total += m;
  EXPECT_NEAR(total, 1.0, 1e-12);
  for (double p : dist.points) EXPECT_GT(p, 0.0);
}

TEST(BetaLaw, SymmetricLawGivesMirroredMasses) {
  const auto dist = discretize_scaled_beta(2.0, 2.0, Interval{0.0, 1.0}, 5, Interval{0.1, 0.9});
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(dist.pmf(j), dist.pmf(4 - j), 1e-12);
}

TEST(BetaLaw, TwoPointUniform) {
  const auto dist = discretize_scaled_beta(1.0, 1.0, Interval{0.0, 10.0}, 2, Interval{1.0, 9.0});
  EXPECT_NEAR(dist.pmf(0), 0.5, 1e-12);
  EXPECT_NEAR(dist.pmf(1), 0.5, 1e-12);
}

TEST(BetaLaw, RejectsBadInput) {
  EXPECT_THROW(discretize_scaled_beta(0.0, 1.0, Interval{0.0, 1.0}, 4, Interval{0.1, 1.0}), InvalidInput);
  EXPECT_THROW(discretize_scaled_beta(1.0, 1.0, Interval{0.0, 1.0}, 1, Interval{0.1, 1.0}), InvalidInput);
  EXPECT_THROW(discretize_scaled_beta(1.0, 1.0, Interval{0.0, 1.0}, 4), InvalidInput);
  EXPECT_THROW(discretize_scaled_beta(1.0, 1.0, Interval{0.0, 1.0}, 4, Interval{0.5, 2.0}), InvalidInput);
}

TEST(Embedding, MovesMassOntoLargerGrid) {
  const auto dist = discretize_scaled_beta(1.0, 1.0, Interval{0.0, 10.0}, 2, Interval{1.0, 9.0});
  const std::vector<double> grid = {0.5, 1.0, 4.0, 9.0};
  const auto s = embed_distribution(dist, grid);
  EXPECT_EQ(s(0), 0.0);
  EXPECT_NEAR(s(1), 0.5, 1e-12);
  EXPECT_EQ(s(2), 0.0);
  const std::vector<double> missing = {1.0, 4.0};
  EXPECT_THROW(embed_distribution(dist, missing), InvalidInput);
}

}  // namespace
}  // namespace twostage
