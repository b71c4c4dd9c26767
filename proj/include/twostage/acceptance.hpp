#pragma once

// The acceptance suite: each criterion runs its own scenario, compares with
// an independent oracle or a stated bound, and reports pass/fail with the
// measured numbers.

#include <chrono>
#include <cmath>
#include <functional>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "twostage/dr_market.hpp"
#include "twostage/engine.hpp"
#include "twostage/experiments.hpp"
#include "twostage/game_core.hpp"
#include "twostage/mechanism.hpp"
#include "twostage/strategies.hpp"
#include "twostage/verification/oracles.hpp"

namespace twostage {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;
};

struct AcceptanceOptions {
  GameSpec game = make_reference_game();
  SupertypeProfile supertypes = reference_supertypes();
  std::vector<std::uint64_t> seeds20;   // 20-seed criteria
  std::vector<std::uint64_t> seeds50;   // 50-seed criterion
  std::vector<std::uint64_t> seeds100;  // DR studies
  std::size_t dr_days = 1000;

  static std::vector<std::uint64_t> range(std::uint64_t first, std::size_t count) {
    std::vector<std::uint64_t> s(count);
    std::iota(s.begin(), s.end(), first);
    return s;
  }

  AcceptanceOptions() : seeds20(range(1, 20)), seeds50(range(1, 50)), seeds100(range(1, 100)) {}
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

/// Thread-safe audit accumulator for the replay criterion.
class SharedAudit {
 public:
  template <TwoStageGame G>
  void add(const Ledger<G>& ledger, const MechanismParams& params) {
    AuditTally t;
    t.add(ledger, params);
    std::lock_guard lock(mutex_);
    tally_.merge(t);
  }
  void merge(const AuditTally& t) {
    std::lock_guard lock(mutex_);
    tally_.merge(t);
  }
  AuditTally tally() const {
    std::lock_guard lock(mutex_);
    return tally_;
  }

 private:
  mutable std::mutex mutex_;
  AuditTally tally_;
};

inline SimulationConfig<GameSpec> g1_config(const AcceptanceOptions& opt, std::size_t days,
                                            std::uint64_t seed) {
  SimulationConfig<GameSpec> c;
  c.game = std::make_shared<const GameSpec>(opt.game);
  c.strategies.assign(opt.game.players(), truthful_strategy<GameSpec>());
  c.true_supertypes = opt.supertypes;
  c.params.horizon = days;
  c.seed = seed;
  return c;
}

inline bool close(double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol; }

}  // namespace detail

/// Runs criteria 1 through 11 in order. `on_result` is called as each
/// criterion finishes.
inline std::vector<CriterionResult> run_acceptance_suite(
    const AcceptanceOptions& opt = {},
    const std::function<void(const CriterionResult&)>& on_result = {}) {
  using Clock = std::chrono::steady_clock;
  using detail::fmt;
  std::vector<CriterionResult> results;
  detail::SharedAudit audit;
  const MechanismParams defaults{};

  auto run = [&](int id, std::string name, double budget, auto&& body) {
    CriterionResult r{id, std::move(name), false, "", 0.0, budget};
    const auto start = Clock::now();
    try {
      body(r);
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (r.seconds > budget) {
      r.passed = false;
      r.detail += " [over runtime budget " + fmt(budget) + " s]";
    }
    results.push_back(r);
    if (on_result) on_result(results.back());
  };

  const GameSpec& g1 = opt.game;
  const auto& truth = opt.supertypes;

  // 1. Quotes on the reference game against brute-force enumeration and the
  // known values.
  run(1, "exact oracle equivalence on the reference game", 1.0, [&](CriterionResult& r) {
    const auto q = MechanismQuotes<GameSpec>::compute(g1, truth);
    const auto bf = verification::brute_force(g1, truth);
    bool ok = q.welfare.exact && detail::close(q.welfare.value, bf.welfare) &&
              detail::close(q.welfare.value, 0.75);
    ok = ok && detail::close(q.welfare_without[0].value, bf.welfare_without[0]) &&
         detail::close(q.welfare_without[0].value, 0.5);
    ok = ok && detail::close(q.first_stage_payments[0].value, bf.first_stage_payments[0]) &&
         detail::close(q.first_stage_payments[0].value, 0.25);
    ok = ok && detail::close(q.expected_values[0].value, bf.expected_values[0]) &&
         detail::close(q.expected_values[0].value, 0.5);
    ok = ok && detail::close(q.expected_values[1].value, bf.expected_values[1]) &&
         detail::close(q.expected_values[1].value, 0.25);
    ok = ok && detail::close(optimal_welfare(g1, truth, PlayerSet::all(2)).value, 0.75);
    r.passed = ok;
    r.detail = "W*=" + fmt(q.welfare.value) + " W*(-1)=" + fmt(q.welfare_without[0].value) +
               " p1F=" + fmt(q.first_stage_payments[0].value) + " E[v1]=" +
               fmt(q.expected_values[0].value) + " E[v2]=" + fmt(q.expected_values[1].value) +
               " brute force W*=" + fmt(bf.welfare);
  });

  // 2. Truthful play is penalized only finitely often.
  run(2, "truthful penalties vanish after day 500", 60.0, [&](CriterionResult& r) {
    struct RunStat {
      bool clean = false;
      bool last_half_zero = false;
    };
    auto stats = parallel_map(opt.seeds50.size(), [&](std::size_t s) {
      auto c = detail::g1_config(opt, 20'000, opt.seeds50[s]);
      auto ledger = run_simulation(c);
      audit.add(ledger, c.params);
      RunStat st;
      st.clean = true;
      for (PlayerIndex i = 0; i < ledger.players(); ++i)
        st.clean = st.clean && penalty_days(ledger, i, 500) == 0;
      double penalty = 0.0;
      for (std::size_t d = ledger.days.size() / 2; d < ledger.days.size(); ++d)
        for (const auto& p : ledger.days[d].payments) penalty += p.penalty;
      st.last_half_zero = penalty == 0.0;
      return st;
    });
    std::size_t clean = 0, consistent = 0;
    for (const auto& st : stats) {
      clean += st.clean;
      consistent += !st.clean || st.last_half_zero;
    }
    r.passed = clean * 10 >= stats.size() * 9 && consistent == stats.size();
    r.detail = std::to_string(clean) + "/" + std::to_string(stats.size()) +
               " runs with no penalty from day 500";
  });

  // 3. Long-run welfare under truthful play.
  run(3, "efficiency of truthful play", 30.0, [&](CriterionResult& r) {
    auto c = detail::g1_config(opt, 50'000, opt.seeds20.front());
    auto ledger = run_simulation(c);
    audit.add(ledger, c.params);
    const double w = estimate_welfare(ledger);
    r.passed = std::abs(w - 0.75) <= 0.02;
    r.detail = "welfare=" + fmt(w) + " target 0.75 +/- 0.02";
  });

  // 4. A truthful player is not hurt by any library opponent.
  run(4, "individual rationality against library opponents", 120.0, [&](CriterionResult& r) {
    const auto library = strategy_library<GameSpec>(truth[1], 0);
    bool ok = true;
    std::string summary;
    for (const auto& entry : library) {
      auto utilities = parallel_map(opt.seeds20.size(), [&](std::size_t s) {
        auto c = detail::g1_config(opt, 50'000, opt.seeds20[s]);
        c.strategies[1] = entry.strategy;
        auto ledger = run_simulation(c);
        audit.add(ledger, c.params);
        return estimate_utility(ledger, 0);
      });
      const double mean = std::accumulate(utilities.begin(), utilities.end(), 0.0) /
                          static_cast<double>(utilities.size());
      ok = ok && mean >= -0.02;
      summary += entry.strategy.name() + ":" + fmt(mean) + " ";
    }
    r.passed = ok;
    r.detail = "mean utility of the truthful player: " + summary;
  });

  // 5. No profitable deviation; the non-matching kernel explodes.
  run(5, "incentive compatibility and penalty explosion", 300.0, [&](CriterionResult& r) {
    const auto library = strategy_library<GameSpec>(truth[0], 1);
    const auto base = detail::g1_config(opt, 50'000, 0);
    const LedgerInspector<GameSpec> inspect = [&](const Ledger<GameSpec>& l) {
      audit.add(l, base.params);
    };
    bool ok = true;
    std::string summary;
    for (const auto& entry : library) {
      const auto& name = entry.strategy.name();
      if (name != "supertype_misreport" && name != "flip_kernel" && name != "correlated_mimic")
        continue;
      const double gain = deviation_gain(base, 0, entry.strategy, opt.seeds20, inspect);
      ok = ok && gain >= -0.02;
      summary += name + ":" + fmt(gain) + " ";
    }
    for (const auto& entry : library) {
      if (entry.strategy.name() != "always_lowest") continue;
      auto c = detail::g1_config(opt, 5'000, opt.seeds20.front());
      c.strategies[0] = entry.strategy;
      auto ledger = run_simulation(c);
      audit.add(ledger, c.params);
      const double u = running_utility(ledger, 0, 5'000);
      ok = ok && u < -10.0;
      summary += "always_lowest utility by day 5000:" + fmt(u);
    }
    r.passed = ok;
    r.detail = "deviation gains " + summary;
  });

  // 6. Marginal-matching kernels leave the bid profile in product form.
  run(6, "product form under marginal-matching kernels", 60.0, [&](CriterionResult& r) {
    auto c = detail::g1_config(opt, 50'000, opt.seeds20.front());
    SupertypeProfile induced;
    for (PlayerIndex i = 0; i < g1.players(); ++i) {
      const Kernel flip = flip_kernel(g1.types().size());
      induced.push_back(Supertype::from_weights(induced_marginal(flip, truth[i])));
      c.strategies[i] = stationary_type_misreport<GameSpec>(flip, induced.back(), "flip_kernel");
    }
    auto ledger = run_simulation(c);
    audit.add(ledger, c.params);
    const double gap = verify_product_form(ledger, induced);
    const double bound = 2.0 * window_r(50'000, defaults.gamma);
    r.passed = gap <= bound;
    r.detail = "gap=" + fmt(gap) + " bound 2r(50000)=" + fmt(bound);
  });

  // 7. Closed-form dispatch against the worked example and a QP solver.
  run(7, "closed-form dispatch and KKT identity", 10.0, [&](CriterionResult& r) {
    const double params[] = {4.0, 2.0};
    const auto a = dr_allocate(params, 1.0, 7.0);
    bool ok = a.curtailments == std::vector<double>{1.0, 2.0} && a.reserve == 4.0 &&
              dr_social_cost(a, params, 1.0) == 14.0;
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> cost(0.1, 10.0), demand(0.0, 20.0);
    std::uniform_int_distribution<std::size_t> size(1, 10);
    double worst_kkt = 0.0, worst_qp = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> p(size(rng));
      for (auto& x : p) x = cost(rng);
      const double ds = cost(rng), d = demand(rng);
      const auto alloc = dr_allocate(p, ds, d);
      for (std::size_t i = 0; i < p.size(); ++i)
        worst_kkt = std::max(worst_kkt, std::abs(p[i] * alloc.curtailments[i] - alloc.multiplier));
      worst_kkt = std::max(worst_kkt, std::abs(ds * alloc.reserve - alloc.multiplier));
      const auto qp = verification::projected_gradient_dispatch(p, ds, d);
      for (std::size_t i = 0; i < p.size(); ++i)
        worst_qp = std::max(worst_qp, std::abs(qp.curtailments[i] - alloc.curtailments[i]));
      worst_qp = std::max(worst_qp, std::abs(qp.reserve - alloc.reserve));
    }
    ok = ok && worst_kkt <= 1e-9 && worst_qp <= 1e-6;
    r.passed = ok;
    r.detail = "example x=[" + fmt(a.curtailments[0]) + "," + fmt(a.curtailments[1]) +
               "] g=" + fmt(a.reserve) + "; max KKT residual " + fmt(worst_kkt) +
               "; max deviation from QP oracle " + fmt(worst_qp);
  });

  // 8. More providers, lower social cost.
  run(8, "social cost decreases with the number of providers", 120.0, [&](CriterionResult& r) {
    DrStudyOptions o;
    o.days = opt.dr_days;
    AuditTally t;
    const auto series = social_cost_vs_n(1, 8, opt.seeds100, o, &t);
    audit.merge(t);
    bool ok = true;
    std::string summary;
    for (std::size_t j = 0; j < series.size(); ++j) {
      if (j > 0) ok = ok && series[j].mean < series[j - 1].mean;
      summary += fmt(series[j].mean) + " ";
    }
    r.passed = ok;
    r.detail = "mean social cost for n=1..8: " + summary;
  });

  // 9. The fixed provider is paid more when the others are costlier.
  run(9, "payment to a fixed provider rises with others' costs", 120.0, [&](CriterionResult& r) {
    DrStudyOptions o;
    o.days = opt.dr_days;
    AuditTally t;
    const double means[] = {0.5, 1.0, 2.0, 4.0};
    const auto series = payment_sensitivity(3, means, 4.0, opt.seeds100, o, &t);
    audit.merge(t);
    bool ok = true;
    std::string summary;
    for (std::size_t j = 0; j < series.size(); ++j) {
      if (j > 0) ok = ok && series[j].mean >= series[j - 1].mean;
      summary += fmt(series[j].mean) + " ";
    }
    r.passed = ok;
    r.detail = "average payment received for others' mean 0.5,1,2,4: " + summary;
  });

  // 10. Posted prices never beat the mechanism.
  run(10, "posted price costs at least the mechanism", 120.0, [&](CriterionResult& r) {
    AuditTally t;
    const auto cmp = posted_price_comparison(default_dr_spec(3), opt.dr_days, opt.seeds100,
                                             defaults, &t);
    const std::uint64_t one_seed[] = {opt.seeds100.front()};
    const auto degenerate =
        posted_price_comparison(degenerate_dr_spec(), 10, one_seed, defaults, &t);
    audit.merge(t);
    const bool general = cmp.sweep[cmp.best].mean >= cmp.mechanism.mean - cmp.mechanism.std_error;
    const bool anchor = std::abs(degenerate.gap()) <= 1e-9;
    r.passed = general && anchor;
    r.detail = "best posted price " + fmt(cmp.sweep[cmp.best].x) + " cost " +
               fmt(cmp.sweep[cmp.best].mean) + " vs mechanism " + fmt(cmp.mechanism.mean) +
               " (stderr " + fmt(cmp.mechanism.std_error) + "), gap " + fmt(cmp.gap()) +
               "; degenerate gap " + fmt(degenerate.gap()) + " at price " +
               fmt(degenerate.sweep[degenerate.best].x);
  });

  // 11. Every ledger above replays to the same penalty flags.
  run(11, "offline replay reproduces penalty flags", 60.0, [&](CriterionResult& r) {
    const auto t = audit.tally();
    r.passed = t.ledgers > 0 && t.mismatches == 0;
    r.detail = std::to_string(t.ledgers) + " ledgers, " + std::to_string(t.flags) +
               " flags, " + std::to_string(t.mismatches) + " mismatches";
  });

  return results;
}

inline void print_criterion(std::ostream& out, const CriterionResult& r) {
  out << (r.passed ? "PASS" : "FAIL") << " criterion " << r.id << ": " << r.name << " ("
      << detail::fmt(r.seconds) << " s) " << r.detail << '\n';
}

}  // namespace twostage
