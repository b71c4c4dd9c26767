#pragma once

// CSV and JSON emitters. Numbers are written in shortest round-trip form so
// identical runs give byte-identical files.

#include <json.hpp>

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "twostage/core.hpp"
#include "twostage/engine.hpp"
#include "twostage/mechanism.hpp"

namespace twostage {

inline constexpr std::string_view kToolkitVersion = "1.0.0";

inline constexpr std::string_view kLedgerCsvHeader =
    "day,player,true_type,bid,o1,o2,valuation,p_first,p_second_base,penalty,p_total,"
    "penalty_flag";

/// Quotes a field only when it contains a delimiter, quote or newline.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_number(double v) { return TypeSpace::format_number(v); }

/// One row per (day, player). Payments are what the player pays; negative
/// values are transfers to it.
template <TwoStageGame G>
void write_ledger_csv(std::ostream& out, const G& game, const Ledger<G>& ledger) {
  out << kLedgerCsvHeader << '\n';
  const auto& types = game.types();
  for (const auto& rec : ledger.days) {
    const std::string o1 = csv_field(game.first_stage_label(rec.o1));
    const std::string o2 = csv_field(game.outcome_label(rec.o2));
    for (PlayerIndex i = 0; i < rec.bids.size(); ++i) {
      const auto& p = rec.payments[i];
      out << rec.day << ',' << i << ',' << csv_field(types.label(rec.true_types[i])) << ','
          << csv_field(types.label(rec.bids[i])) << ',' << o1 << ',' << o2 << ','
          << csv_number(rec.valuations[i]) << ',' << csv_number(p.first_stage) << ','
          << csv_number(p.second_stage_base) << ',' << csv_number(p.penalty) << ','
          << csv_number(p.total) << ',' << static_cast<int>(rec.penalty_flags[i]) << '\n';
    }
  }
}

/// Per-player utilities, welfare, penalty-day counts and the product-form gap.
template <TwoStageGame G>
nlohmann::json ledger_summary(const Ledger<G>& ledger) {
  nlohmann::json players = nlohmann::json::array();
  for (PlayerIndex i = 0; i < ledger.players(); ++i) {
    players.push_back({{"player", i},
                       {"strategy", ledger.strategy_names[i]},
                       {"utility", estimate_utility(ledger, i)},
                       {"average_payment", average_payment(ledger, i)},
                       {"first_stage_payment", ledger.quotes.first_stage_payments[i].value},
                       {"penalty_days", penalty_days(ledger, i)}});
  }
  return {{"days", ledger.days.size()},
          {"welfare", estimate_welfare(ledger)},
          {"optimal_welfare", ledger.quotes.welfare.value},
          {"optimal_welfare_exact", ledger.quotes.welfare.exact},
          {"product_form_gap", verify_product_form(ledger, ledger.reported)},
          {"players", players}};
}

/// Reproducibility record written next to every output file.
struct RunManifest {
  std::string command;                 // "simulate" or "experiment"
  std::string kind;                    // experiment kind, or "simulate"
  std::string config_file;
  std::uint64_t config_hash = 0;       // hash of the config file's parsed JSON
  std::vector<std::uint64_t> seeds;
  nlohmann::json flags = nlohmann::json::object();
  std::vector<std::string> outputs;

  nlohmann::json to_json() const {
    return {{"toolkit_version", std::string(kToolkitVersion)},
            {"command", command},
            {"kind", kind},
            {"config_file", config_file},
            {"config_hash", hex_hash(config_hash)},
            {"seeds", seeds},
            {"flags", flags},
            {"outputs", outputs}};
  }

  static std::string hex_hash(std::uint64_t h) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int k = 15; k >= 0; --k, h >>= 4) s[static_cast<std::size_t>(k)] = digits[h & 0xf];
    return s;
  }
};

/// FNV-1a of the canonical (sorted-key, compact) dump of a JSON document.
inline std::uint64_t json_hash(const nlohmann::json& j) {
  const std::string text = j.dump();
  return detail::fnv1a(0xcbf29ce484222325ull, text.data(), text.size());
}

}  // namespace twostage
