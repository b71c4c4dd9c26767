#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "twostage/json_io.hpp"
#include "twostage/run_experiment.hpp"

namespace twostage {
namespace {

namespace fs = std::filesystem;

const std::string kCli = TWOSTAGE_CLI_PATH;
const fs::path kConfigs = TWOSTAGE_CONFIG_DIR;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("twostage_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " > " + (dir_ / "stdout.txt").string() + " 2> " +
                            (dir_ / "stderr.txt").string();
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  }

  static std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static std::vector<std::string> lines(const fs::path& file) {
    std::vector<std::string> out;
    std::ifstream in(file);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
  }

  fs::path write_json(const std::string& name, const Json& j) {
    const fs::path file = dir_ / name;
    std::ofstream(file) << j.dump(2);
    return file;
  }

  fs::path dir_;
};

TEST_F(CliTest, SimulateReferenceGameWritesLedger) {
  const std::string cfg = (kConfigs / "g1_truthful.json").string();
  ASSERT_EQ(run("simulate --config " + cfg + " --days 10 --seed 7 --out " + (dir_ / "a").string()), 0);
  const auto rows = lines(dir_ / "a" / "ledger.csv");
  ASSERT_EQ(rows.size(), 21u);
  EXPECT_EQ(rows[0],
            "day,player,true_type,bid,o1,o2,valuation,p_first,p_second_base,penalty,p_total,penalty_flag");
  EXPECT_EQ(rows[1].substr(0, 4), "1,0,");
  EXPECT_EQ(rows[20].substr(0, 5), "10,1,");

  ASSERT_EQ(run("simulate --config " + cfg + " --days 10 --seed 7 --out " + (dir_ / "b").string()), 0);
  EXPECT_EQ(slurp(dir_ / "a" / "ledger.csv"), slurp(dir_ / "b" / "ledger.csv"));

  const Json summary = Json::parse(slurp(dir_ / "a" / "summary.json"));
  EXPECT_EQ(summary["days"], 10);
  EXPECT_EQ(summary["penalty_audit_mismatches"], 0);
  const Json manifest = Json::parse(slurp(dir_ / "a" / "manifest.json"));
  EXPECT_EQ(manifest["command"], "simulate");
  EXPECT_EQ(manifest["seeds"], Json::array({7}));
}

TEST_F(CliTest, RerunReproducesLedgerByteForByte) {
  const std::string cfg = (kConfigs / "g1_truthful.json").string();
  ASSERT_EQ(run("simulate --config " + cfg + " --days 25 --seed 3 --out " + (dir_ / "a").string()), 0);
  ASSERT_EQ(run("rerun --manifest " + (dir_ / "a" / "manifest.json").string() + " --out " +
                (dir_ / "b").string()),
            0);
  EXPECT_EQ(slurp(dir_ / "a" / "ledger.csv"), slurp(dir_ / "b" / "ledger.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "summary.json"), slurp(dir_ / "b" / "summary.json"));
}

TEST_F(CliTest, RerunRefusesChangedConfig) {
  const Json original = read_json_file((kConfigs / "g1_truthful.json").string());
  const auto cfg = write_json("sim.json", original);
  ASSERT_EQ(run("simulate --config " + cfg.string() + " --days 5 --out " + (dir_ / "a").string()), 0);
  Json changed = original;
  changed["seed"] = 99;
  write_json("sim.json", changed);
  EXPECT_EQ(run("rerun --manifest " + (dir_ / "a" / "manifest.json").string()), 2);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("config_hash"), std::string::npos);
}

TEST_F(CliTest, SocialCostSeriesIsDecreasing) {
  const auto cfg = write_json("exp.json", Json{{"kind", "social_cost_vs_n"},
                                               {"parameters", {{"n_min", 1}, {"n_max", 8}, {"days", 200}}},
                                               {"seeds", {1, 2, 3}}});
  ASSERT_EQ(run("experiment social_cost_vs_n --config " + cfg.string() + " --out " +
                (dir_ / "out").string()),
            0);
  const auto rows = lines(dir_ / "out" / "social_cost_vs_n.csv");
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], "n,mean_social_cost,stderr");
  double previous = 1e300;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    std::stringstream row(rows[r]);
    std::string n, mean;
    std::getline(row, n, ',');
    std::getline(row, mean, ',');
    EXPECT_EQ(std::stoul(n), r);
    EXPECT_LT(std::stod(mean), previous);
    previous = std::stod(mean);
  }
  EXPECT_TRUE(fs::exists(dir_ / "out" / "manifest.json"));
}

TEST_F(CliTest, PostedPriceComparisonWritesBothTables) {
  const Json instance = Json::parse(slurp(kConfigs / "dr_n3.json"));
  const auto cfg = write_json(
      "exp.json", Json{{"kind", "posted_price_comparison"},
                       {"parameters", {{"instance", instance}, {"days", 100}}},
                       {"seeds", {1, 2}}});
  ASSERT_EQ(run("experiment posted_price_comparison --config " + cfg.string() + " --out " +
                (dir_ / "out").string()),
            0);
  const auto sweep = lines(dir_ / "out" / "posted_price_sweep.csv");
  EXPECT_EQ(sweep[0], "price,mean_social_cost,stderr");
  EXPECT_EQ(sweep.size(), instance["price_grid"].size() + 1);
  const auto mech = lines(dir_ / "out" / "mechanism_cost.csv");
  ASSERT_EQ(mech.size(), 2u);
  EXPECT_EQ(mech[0], "mean_social_cost,stderr,best_price,best_posted_cost,gap");
}

TEST_F(CliTest, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run("experiment no_such_kind"), 2);
  EXPECT_EQ(run("simulate"), 2);
  EXPECT_EQ(run("experiment social_cost_vs_n --seeds 1,x --out " + (dir_ / "o").string()), 2);
  const auto cfg = write_json("bad.json", Json{{"game", {{"n", 2}}}});
  EXPECT_EQ(run("simulate --config " + cfg.string() + " --out " + (dir_ / "o").string()), 2);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("/game/types"), std::string::npos);
  const auto mismatched = write_json("kind.json", Json{{"kind", "payment_sensitivity"}});
  EXPECT_EQ(run("experiment social_cost_vs_n --config " + mismatched.string()), 2);
}

TEST(ExperimentRunner, UnknownKindThrows) {
  ExperimentConfig c;
  c.kind = "mystery";
  c.seeds = {1};
  EXPECT_THROW(run_experiment(c), ConfigError);
  c.kind = "social_cost_vs_n";
  c.seeds.clear();
  EXPECT_THROW(run_experiment(c), ConfigError);
}

TEST(ExperimentRunner, AcceptanceRejectsOverrides) {
  ExperimentConfig c;
  c.kind = "acceptance_suite";
  c.seeds = {1};
  c.output_dir = fs::temp_directory_path() / "twostage_acceptance_override";
  c.overrides.gamma = 0.5;
  EXPECT_THROW(run_experiment(c), ConfigError);
  fs::remove_all(c.output_dir);
}

}  // namespace
}  // namespace twostage
