#pragma once

// JSON documents for games, DR instances, mechanism parameters and strategy
// configurations.

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "twostage/core.hpp"
#include "twostage/dr_market.hpp"
#include "twostage/game_core.hpp"
#include "twostage/mechanism.hpp"
#include "twostage/strategies.hpp"

namespace twostage {

using Json = nlohmann::json;

/// Malformed or inconsistent configuration; `field` is a JSON-pointer-like path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

namespace detail {

inline const Json& require(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(path + "/" + key, "missing field");
  return *it;
}

inline std::string label_of(const Json& j, const std::string& path) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number()) return TypeSpace::format_number(j.get<double>());
  throw ConfigError(path, "expected a string or number label");
}

inline double number_of(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

inline std::size_t count_of(const Json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    throw ConfigError(path, "expected a nonnegative integer");
  const auto v = j.get<long long>();
  if (v < 0) throw ConfigError(path, "expected a nonnegative integer");
  return static_cast<std::size_t>(v);
}

inline std::vector<double> numbers_of(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k)
    out.push_back(number_of(j[k], path + "/" + std::to_string(k)));
  return out;
}

inline Supertype supertype_of(const Json& j, const std::string& path) {
  try {
    return Supertype(numbers_of(j, path));
  } catch (const InvalidInput& e) {
    throw ConfigError(path, e.what());
  }
}

inline std::size_t index_of(const std::vector<std::string>& labels, const std::string& label,
                            const std::string& path) {
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (labels[k] == label) return k;
  throw ConfigError(path, "unknown label '" + label + "'");
}

inline Json label_json(const TypeSpace& types, TypeIndex t) {
  if (types.is_numeric()) return types.value(t);
  return types.label(t);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// GameSpec

struct GameDocument {
  GameSpec game;
  SupertypeProfile supertypes;  // true supertypes, if given
};

/// {"n", "types", "o1", "o2", "valuation": [[player, type, o1, o2, value]…],
///  "cost": [[o1, o2, value]…], "supertypes": [[p…]…]}. Players are 0-based;
/// types and outcomes are referenced by label. Omitted entries are 0.
inline GameDocument game_from_json(const Json& j, const std::string& path = "") {
  using namespace detail;
  const std::size_t n = count_of(require(j, "n", path), path + "/n");
  const Json& types_json = require(j, "types", path);
  if (!types_json.is_array() || types_json.empty())
    throw ConfigError(path + "/types", "expected a nonempty array");
  bool numeric = true;
  for (const auto& t : types_json) numeric = numeric && t.is_number();
  TypeSpace types;
  try {
    if (numeric) {
      types = TypeSpace::numeric(numbers_of(types_json, path + "/types"));
    } else {
      std::vector<std::string> labels;
      for (std::size_t k = 0; k < types_json.size(); ++k)
        labels.push_back(label_of(types_json[k], path + "/types/" + std::to_string(k)));
      types = TypeSpace::tokens(std::move(labels));
    }
  } catch (const InvalidInput& e) {
    throw ConfigError(path + "/types", e.what());
  }

  auto labels = [&](const char* key) {
    const Json& arr = require(j, key, path);
    if (!arr.is_array()) throw ConfigError(path + "/" + key, "expected an array");
    std::vector<std::string> out;
    for (std::size_t k = 0; k < arr.size(); ++k)
      out.push_back(label_of(arr[k], path + "/" + key + "/" + std::to_string(k)));
    return out;
  };
  auto o1 = labels("o1");
  auto o2 = labels("o2");

  std::optional<GameSpec> game;
  try {
    game.emplace(n, types, o1, o2);
  } catch (const InvalidInput& e) {
    throw ConfigError(path, e.what());
  }

  if (auto it = j.find("valuation"); it != j.end()) {
    if (!it->is_array()) throw ConfigError(path + "/valuation", "expected an array");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const std::string p = path + "/valuation/" + std::to_string(k);
      const Json& row = (*it)[k];
      if (!row.is_array() || row.size() != 5)
        throw ConfigError(p, "expected [player, type, o1, o2, value]");
      const std::size_t player = count_of(row[0], p + "/0");
      if (player >= n) throw ConfigError(p + "/0", "player out of range");
      const auto t = types.find(label_of(row[1], p + "/1"));
      if (!t) throw ConfigError(p + "/1", "unknown type label");
      game->set_valuation(player, *t, index_of(o1, label_of(row[2], p + "/2"), p + "/2"),
                          index_of(o2, label_of(row[3], p + "/3"), p + "/3"),
                          number_of(row[4], p + "/4"));
    }
  }
  if (auto it = j.find("cost"); it != j.end()) {
    if (!it->is_array()) throw ConfigError(path + "/cost", "expected an array");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const std::string p = path + "/cost/" + std::to_string(k);
      const Json& row = (*it)[k];
      if (!row.is_array() || row.size() != 3) throw ConfigError(p, "expected [o1, o2, value]");
      game->set_cost(index_of(o1, label_of(row[0], p + "/0"), p + "/0"),
                     index_of(o2, label_of(row[1], p + "/1"), p + "/1"),
                     number_of(row[2], p + "/2"));
    }
  }

  GameDocument doc{std::move(*game), {}};
  if (auto it = j.find("supertypes"); it != j.end()) {
    if (!it->is_array()) throw ConfigError(path + "/supertypes", "expected an array");
    for (std::size_t k = 0; k < it->size(); ++k)
      doc.supertypes.push_back(
          supertype_of((*it)[k], path + "/supertypes/" + std::to_string(k)));
    try {
      check_profile(doc.supertypes, n, types.size());
    } catch (const InvalidInput& e) {
      throw ConfigError(path + "/supertypes", e.what());
    }
  }
  return doc;
}

inline Json game_to_json(const GameSpec& game, std::span<const Supertype> supertypes = {}) {
  Json j;
  j["n"] = game.players();
  Json types = Json::array();
  for (TypeIndex t = 0; t < game.types().size(); ++t)
    types.push_back(detail::label_json(game.types(), t));
  j["types"] = types;
  j["o1"] = game.first_stage_outcomes();
  j["o2"] = game.second_stage_outcomes();
  Json valuation = Json::array();
  for (PlayerIndex i = 0; i < game.players(); ++i)
    for (TypeIndex t = 0; t < game.types().size(); ++t)
      for (OutcomeIndex a = 0; a < game.first_stage_count(); ++a)
        for (OutcomeIndex b = 0; b < game.second_stage_count(); ++b)
          if (double v = game.valuation(i, t, a, b); v != 0.0)
            valuation.push_back(Json::array({i, detail::label_json(game.types(), t),
                                             game.first_stage_outcomes()[a],
                                             game.second_stage_outcomes()[b], v}));
  j["valuation"] = valuation;
  Json cost = Json::array();
  for (OutcomeIndex a = 0; a < game.first_stage_count(); ++a)
    for (OutcomeIndex b = 0; b < game.second_stage_count(); ++b)
      if (double c = game.cost(a, b); c != 0.0)
        cost.push_back(Json::array(
            {game.first_stage_outcomes()[a], game.second_stage_outcomes()[b], c}));
  j["cost"] = cost;
  if (!supertypes.empty()) {
    Json s = Json::array();
    for (const auto& st : supertypes)
      s.push_back(std::vector<double>(st.masses().begin(), st.masses().end()));
    j["supertypes"] = s;
  }
  return j;
}

// ---------------------------------------------------------------------------
// MechanismParams

inline MechanismParams params_from_json(const Json& j, const std::string& path = "") {
  MechanismParams p;
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  if (auto it = j.find("gamma"); it != j.end()) p.gamma = detail::number_of(*it, path + "/gamma");
  if (auto it = j.find("penalty_exponent"); it != j.end())
    p.penalty_exponent = detail::number_of(*it, path + "/penalty_exponent");
  if (auto it = j.find("horizon"); it != j.end())
    p.horizon = detail::count_of(*it, path + "/horizon");
  try {
    p.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(path, e.what());
  }
  return p;
}

inline Json params_to_json(const MechanismParams& p) {
  return Json{{"gamma", p.gamma}, {"penalty_exponent", p.penalty_exponent},
              {"horizon", p.horizon}};
}

// ---------------------------------------------------------------------------
// Strategy configurations

inline StrategyConfig strategy_from_json(const Json& j, const std::string& path = "") {
  using namespace detail;
  const Json& kind_json = require(j, "kind", path);
  if (!kind_json.is_string()) throw ConfigError(path + "/kind", "expected a string");
  const std::string kind = kind_json.get<std::string>();
  if (kind == "truthful") return TruthfulConfig{};
  if (kind == "supertype_misreport")
    return MisreportConfig{supertype_of(require(j, "reported", path), path + "/reported")};
  if (kind == "stationary") {
    const Json& rows = require(j, "kernel", path);
    if (!rows.is_array()) throw ConfigError(path + "/kernel", "expected an array of rows");
    StationaryConfig c;
    for (std::size_t k = 0; k < rows.size(); ++k)
      c.kernel.push_back(supertype_of(rows[k], path + "/kernel/" + std::to_string(k)));
    c.reported = supertype_of(require(j, "reported", path), path + "/reported");
    return c;
  }
  if (kind == "correlated_mimic") {
    MimicConfig c;
    c.target = count_of(require(j, "target", path), path + "/target");
    if (auto it = j.find("bias"); it != j.end()) c.bias = number_of(*it, path + "/bias");
    if (!(c.bias >= 0.0 && c.bias <= 1.0)) throw ConfigError(path + "/bias", "must lie in [0, 1]");
    return c;
  }
  throw ConfigError(path + "/kind", "unknown strategy kind '" + kind + "'");
}

inline Json strategy_to_json(const StrategyConfig& config) {
  auto masses = [](const Supertype& s) {
    return std::vector<double>(s.masses().begin(), s.masses().end());
  };
  return std::visit(
      [&](const auto& c) -> Json {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, TruthfulConfig>) {
          return Json{{"kind", "truthful"}};
        } else if constexpr (std::is_same_v<C, MisreportConfig>) {
          return Json{{"kind", "supertype_misreport"}, {"reported", masses(c.reported)}};
        } else if constexpr (std::is_same_v<C, StationaryConfig>) {
          Json rows = Json::array();
          for (const auto& r : c.kernel) rows.push_back(masses(r));
          return Json{{"kind", "stationary"}, {"kernel", rows}, {"reported", masses(c.reported)}};
        } else {
          return Json{{"kind", "correlated_mimic"}, {"target", c.target}, {"bias", c.bias}};
        }
      },
      config);
}

// ---------------------------------------------------------------------------
// DrSpec

/// {"n", "grid", "supertypes", "reserve_dist", "demand": {"kind": "constant",
///  "value"}, "price_grid"}, plus optional "monte_carlo": {"samples", "seed"}.
inline DrSpec dr_spec_from_json(const Json& j, const std::string& path = "") {
  using namespace detail;
  DrSpec spec;
  spec.n = count_of(require(j, "n", path), path + "/n");
  spec.grid = numbers_of(require(j, "grid", path), path + "/grid");
  const Json& st = require(j, "supertypes", path);
  if (!st.is_array()) throw ConfigError(path + "/supertypes", "expected an array");
  for (std::size_t k = 0; k < st.size(); ++k)
    spec.supertypes.push_back(supertype_of(st[k], path + "/supertypes/" + std::to_string(k)));
  spec.reserve_dist = supertype_of(require(j, "reserve_dist", path), path + "/reserve_dist");
  if (auto it = j.find("demand"); it != j.end()) {
    const std::string p = path + "/demand";
    const Json& kind = require(*it, "kind", p);
    if (kind != "constant") throw ConfigError(p + "/kind", "only constant demand is supported");
    spec.demand = number_of(require(*it, "value", p), p + "/value");
  }
  if (auto it = j.find("price_grid"); it != j.end())
    spec.price_grid = numbers_of(*it, path + "/price_grid");
  if (auto it = j.find("monte_carlo"); it != j.end()) {
    const std::string p = path + "/monte_carlo";
    if (auto s = it->find("samples"); s != it->end()) spec.sampling.samples = count_of(*s, p + "/samples");
    if (auto s = it->find("seed"); s != it->end()) spec.sampling.seed = count_of(*s, p + "/seed");
  }
  try {
    spec.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(path, e.what());
  }
  return spec;
}

inline Json dr_spec_to_json(const DrSpec& spec) {
  auto masses = [](const Supertype& s) {
    return std::vector<double>(s.masses().begin(), s.masses().end());
  };
  Json st = Json::array();
  for (const auto& s : spec.supertypes) st.push_back(masses(s));
  return Json{{"n", spec.n},
              {"grid", spec.grid},
              {"supertypes", st},
              {"reserve_dist", masses(spec.reserve_dist)},
              {"demand", {{"kind", "constant"}, {"value", spec.demand}}},
              {"price_grid", spec.price_grid},
              {"monte_carlo", {{"samples", spec.sampling.samples}, {"seed", spec.sampling.seed}}}};
}

// ---------------------------------------------------------------------------
// Files

inline Json read_json_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("", "cannot open '" + file + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return Json::parse(buf.str());
  } catch (const Json::parse_error& e) {
    // nlohmann reports the byte offset; translate it to a line number.
    const std::string text = buf.str();
    const std::size_t at = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(at), '\n');
    throw ConfigError("", file + ":" + std::to_string(line) + ": " + e.what());
  }
}

}  // namespace twostage
