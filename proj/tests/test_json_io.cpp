#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"
#include "twostage/experiments.hpp"
#include "twostage/json_io.hpp"

namespace twostage {
namespace {

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

TEST(GameJson, ReferenceDocumentParses) {
  const Json j = Json::parse(R"({
    "n": 2, "types": [0, 1], "o1": ["A"], "o2": ["none", "p1", "p2"],
    "valuation": [[0, 1, "A", "p1", 1], [1, 1, "A", "p2", 1]],
    "supertypes": [[0.5, 0.5], [0.5, 0.5]]})");
  const auto doc = game_from_json(j);
  const GameSpec ref = make_reference_game();
  ASSERT_EQ(doc.game.players(), 2u);
  for (PlayerIndex i = 0; i < 2; ++i)
    for (TypeIndex t = 0; t < 2; ++t)
      for (OutcomeIndex b = 0; b < 3; ++b)
        EXPECT_EQ(doc.game.valuation(i, t, 0, b), ref.valuation(i, t, 0, b));
  EXPECT_EQ(doc.supertypes, reference_supertypes());
}

TEST(GameJson, RoundTripRandomGames) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const GameSpec g = testing::random_game(rng);
    const auto st = testing::random_profile(rng, g);
    const Json j = game_to_json(g, st);
    const auto back = game_from_json(Json::parse(j.dump()));
    ASSERT_EQ(back.game.players(), g.players());
    ASSERT_EQ(back.game.types().labels(), g.types().labels());
    for (PlayerIndex i = 0; i < g.players(); ++i)
      for (TypeIndex t = 0; t < g.types().size(); ++t)
        for (OutcomeIndex a = 0; a < g.first_stage_count(); ++a)
          for (OutcomeIndex b = 0; b < g.second_stage_count(); ++b)
            ASSERT_EQ(back.game.valuation(i, t, a, b), g.valuation(i, t, a, b));
    for (OutcomeIndex a = 0; a < g.first_stage_count(); ++a)
      for (OutcomeIndex b = 0; b < g.second_stage_count(); ++b)
        ASSERT_EQ(back.game.cost(a, b), g.cost(a, b));
    ASSERT_EQ(back.supertypes, st);
    EXPECT_EQ(game_to_json(back.game, back.supertypes), j);
  }
}

TEST(GameJson, ErrorsNameTheField) {
  const Json base = Json::parse(R"({
    "n": 2, "types": ["lo", "hi"], "o1": ["A"], "o2": ["x", "y"],
    "valuation": [[0, "hi", "A", "x", 1]]})");
  EXPECT_EQ(field_of([&] { game_from_json(base); }), "<no error>");

  Json j = base;
  j.erase("o2");
  EXPECT_EQ(field_of([&] { game_from_json(j); }), "/o2");
  j = base;
  j["valuation"][0][1] = "mid";
  EXPECT_EQ(field_of([&] { game_from_json(j); }), "/valuation/0/1");
  j = base;
  j["valuation"][0][0] = 5;
  EXPECT_EQ(field_of([&] { game_from_json(j); }), "/valuation/0/0");
  j = base;
  j["supertypes"] = Json::parse("[[0.5, 0.5], [0.7, 0.7]]");
  EXPECT_EQ(field_of([&] { game_from_json(j); }), "/supertypes/1");
  j = base;
  j["n"] = -1;
  EXPECT_EQ(field_of([&] { game_from_json(j); }), "/n");
  j = base;
  j["types"] = Json::parse(R"(["a", "a"])");
  EXPECT_EQ(field_of([&] { game_from_json(j); }), "/types");
}

TEST(ParamsJson, RoundTripAndValidation) {
  MechanismParams p;
  p.gamma = 0.5;
  p.penalty_exponent = 3.0;
  p.horizon = 123;
  EXPECT_EQ(params_from_json(params_to_json(p)), p);
  EXPECT_EQ(params_from_json(Json::object()), MechanismParams{});
  EXPECT_EQ(field_of([] { params_from_json(Json{{"gamma", "x"}}); }), "/gamma");
  EXPECT_EQ(field_of([] { params_from_json(Json{{"penalty_exponent", 1.0}}, "/mechanism"); }),
            "/mechanism");
}

TEST(StrategyJson, RoundTripEveryKind) {
  const std::vector<StrategyConfig> configs = {
      TruthfulConfig{},
      MisreportConfig{Supertype({0.2, 0.8})},
      StationaryConfig{flip_kernel(2), Supertype({0.25, 0.75})},
      MimicConfig{1, 0.45},
  };
  for (const auto& c : configs) EXPECT_EQ(strategy_from_json(strategy_to_json(c)), c);
  EXPECT_EQ(std::get<MimicConfig>(strategy_from_json(Json{{"kind", "correlated_mimic"}, {"target", 0}})).bias,
            0.3);
}

TEST(StrategyJson, ErrorsNameTheField) {
  EXPECT_EQ(field_of([] { strategy_from_json(Json{{"kind", "sneaky"}}, "/strategies/1"); }),
            "/strategies/1/kind");
  EXPECT_EQ(field_of([] { strategy_from_json(Json{{"kind", "supertype_misreport"}}); }),
            "/reported");
  EXPECT_EQ(field_of([] {
              strategy_from_json(Json::parse(R"({"kind": "stationary", "reported": [1, 0],
                                                  "kernel": [[1, 0], [0.5, 0.6]]})"));
            }),
            "/kernel/1");
  EXPECT_EQ(field_of([] {
              strategy_from_json(Json{{"kind", "correlated_mimic"}, {"target", 0}, {"bias", 2}});
            }),
            "/bias");
}

TEST(DrJson, RoundTrip) {
  const DrSpec spec = default_dr_spec(3, 6);
  const DrSpec back = dr_spec_from_json(Json::parse(dr_spec_to_json(spec).dump()));
  EXPECT_EQ(back.n, spec.n);
  EXPECT_EQ(back.grid, spec.grid);
  EXPECT_EQ(back.supertypes, spec.supertypes);
  EXPECT_EQ(back.reserve_dist, spec.reserve_dist);
  EXPECT_EQ(back.demand, spec.demand);
  EXPECT_EQ(back.price_grid, spec.price_grid);
  EXPECT_EQ(back.sampling.samples, spec.sampling.samples);
  EXPECT_EQ(back.sampling.seed, spec.sampling.seed);
}

TEST(DrJson, ErrorsNameTheField) {
  Json j = dr_spec_to_json(degenerate_dr_spec());
  j["demand"]["kind"] = "sinusoidal";
  EXPECT_EQ(field_of([&] { dr_spec_from_json(j); }), "/demand/kind");
  j = dr_spec_to_json(degenerate_dr_spec());
  j["grid"][1] = "two";
  EXPECT_EQ(field_of([&] { dr_spec_from_json(j); }), "/grid/1");
  j = dr_spec_to_json(degenerate_dr_spec());
  j["grid"][0] = -1.0;
  EXPECT_EQ(field_of([&] { dr_spec_from_json(j, "/dr"); }), "/dr");
}

TEST(SimulationJson, GameAndDrDocuments) {
  const Json g = Json::parse(R"({
    "game": {"n": 2, "types": [0, 1], "o1": ["A"], "o2": ["none", "p1", "p2"],
             "valuation": [[0, 1, "A", "p1", 1], [1, 1, "A", "p2", 1]],
             "supertypes": [[0.5, 0.5], [0.5, 0.5]]},
    "strategies": [{"kind": "truthful"}, {"kind": "correlated_mimic", "target": 0}],
    "mechanism": {"horizon": 10},
    "seed": 3})");
  const auto doc = simulation_from_json(g);
  const auto& c = std::get<SimulationConfig<GameSpec>>(doc.config);
  EXPECT_EQ(c.params.horizon, 10u);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.strategies[1].name(), "correlated_mimic");

  Json d = {{"dr", dr_spec_to_json(degenerate_dr_spec())}};
  const auto dr = simulation_from_json(d);
  const auto& dc = std::get<SimulationConfig<DrGame>>(dr.config);
  EXPECT_EQ(dc.strategies.size(), 2u);
  EXPECT_EQ(dc.strategies[0].name(), "truthful");

  Json bad = g;
  bad["strategies"].push_back(Json{{"kind", "truthful"}});
  EXPECT_THROW(simulation_from_json(bad), ConfigError);
}

}  // namespace
}  // namespace twostage
