#pragma once

// Reference computations that share no code with the library's solvers. They
// read only raw tables (valuations, costs, pmfs, bid logs) and recompute
// results the slow, obvious way.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "twostage/core.hpp"
#include "twostage/game_core.hpp"

namespace twostage::verification {

// ---------------------------------------------------------------------------
// Brute-force welfare for finite games

struct BruteForceResult {
  std::size_t first_stage = 0;
  double welfare = 0.0;                    // with everyone
  std::vector<double> welfare_without;     // with player i removed
  std::vector<double> expected_values;     // E[v_i] under the full optimum
  std::vector<double> first_stage_payments;
};

namespace detail {

/// Calls f(profile, probability) for every type profile, first player fastest.
template <class F>
void for_each_profile(std::span<const Supertype> profile, std::size_t k, F&& f) {
  const std::size_t n = profile.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= k;
  std::vector<TypeIndex> types(n);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t rest = code;
    double p = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      types[i] = rest % k;
      rest /= k;
      p *= profile[i](types[i]);
    }
    f(std::span<const TypeIndex>(types), p);
  }
}

/// Best recourse and its value among the players flagged in `in`.
inline std::pair<std::size_t, double> best_recourse(const GameSpec& g, std::size_t o1,
                                                    std::span<const TypeIndex> types,
                                                    const std::vector<bool>& in) {
  std::size_t best = 0;
  double best_w = 0.0;
  for (std::size_t o2 = 0; o2 < g.second_stage_count(); ++o2) {
    double w = -g.cost(o1, o2);
    for (std::size_t j = 0; j < types.size(); ++j)
      if (in[j]) w += g.valuation(j, types[j], o1, o2);
    if (o2 == 0 || w > best_w) {
      best = o2;
      best_w = w;
    }
  }
  return {best, best_w};
}

inline std::pair<std::size_t, double> best_plan(const GameSpec& g,
                                                std::span<const Supertype> profile,
                                                const std::vector<bool>& in) {
  std::size_t best_o1 = 0;
  double best_w = 0.0;
  for (std::size_t o1 = 0; o1 < g.first_stage_count(); ++o1) {
    double w = 0.0;
    for_each_profile(profile, g.types().size(), [&](std::span<const TypeIndex> t, double p) {
      w += p * best_recourse(g, o1, t, in).second;
    });
    if (o1 == 0 || w > best_w) {
      best_o1 = o1;
      best_w = w;
    }
  }
  return {best_o1, best_w};
}

}  // namespace detail

/// Enumerates every first-stage outcome, type profile and recourse.
inline BruteForceResult brute_force(const GameSpec& g, std::span<const Supertype> profile) {
  const std::size_t n = g.players();
  BruteForceResult r;
  std::vector<bool> everyone(n, true);
  std::tie(r.first_stage, r.welfare) = detail::best_plan(g, profile, everyone);
  r.expected_values.assign(n, 0.0);
  double cost = 0.0;
  detail::for_each_profile(profile, g.types().size(), [&](std::span<const TypeIndex> t, double p) {
    const std::size_t o2 = detail::best_recourse(g, r.first_stage, t, everyone).first;
    for (std::size_t i = 0; i < n; ++i) r.expected_values[i] += p * g.valuation(i, t[i], r.first_stage, o2);
    cost += p * g.cost(r.first_stage, o2);
  });
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<bool> others = everyone;
    others[i] = false;
    r.welfare_without.push_back(detail::best_plan(g, profile, others).second);
    double others_value = -cost;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) others_value += r.expected_values[j];
    r.first_stage_payments.push_back(r.welfare_without.back() - others_value);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Window schedule in extended precision

inline long double window_r_long(std::uint64_t l, long double gamma) {
  const long double day = static_cast<long double>(l);
  return std::sqrt(std::log(2.0L * std::pow(day, 1.0L + gamma)) / (2.0L * day));
}

// ---------------------------------------------------------------------------
// Quadratic dispatch by projected gradient

struct QpSolution {
  std::vector<double> curtailments;
  double reserve = 0.0;
  double cost = 0.0;
  std::size_t iterations = 0;
};

/// min Σ (c_i/2) z_i² over the hyperplane Σ z_i = d, where the last variable
/// is the reserve. Gradient steps of size 1/max c, each followed by the
/// Euclidean projection onto the hyperplane.
inline QpSolution projected_gradient_dispatch(std::span<const double> params, double delta_s,
                                              double d, double tolerance = 1e-13,
                                              std::size_t max_iterations = 2'000'000) {
  std::vector<double> c(params.begin(), params.end());
  c.push_back(delta_s);
  const std::size_t m = c.size();
  const double step = 1.0 / *std::max_element(c.begin(), c.end());
  std::vector<double> z(m, d / static_cast<double>(m));
  QpSolution s;
  for (; s.iterations < max_iterations; ++s.iterations) {
    double shift = 0.0;
    std::vector<double> next(m);
    for (std::size_t j = 0; j < m; ++j) {
      next[j] = z[j] - step * c[j] * z[j];
      shift += next[j];
    }
    shift = (shift - d) / static_cast<double>(m);
    double change = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      next[j] -= shift;
      change = std::max(change, std::abs(next[j] - z[j]));
    }
    z.swap(next);
    if (change < tolerance) break;
  }
  s.reserve = z.back();
  s.curtailments.assign(z.begin(), z.end() - 1);
  for (std::size_t j = 0; j < m; ++j) s.cost += 0.5 * c[j] * z[j] * z[j];
  return s;
}

// ---------------------------------------------------------------------------
// Beta cell masses by quadrature

/// ∫ over [a, b] ⊂ [0, 1] of the Beta(α, β) density, for β ≥ 1. Substituting
/// x = y^(1/α) removes the x^(α−1) singularity at 0; the remaining integrand
/// (1 − y^(1/α))^(β−1) / α is smooth enough for composite Simpson.
inline double beta_cell_mass(double alpha, double beta, double a, double b,
                             std::size_t panels = 20'000) {
  const double ya = std::pow(a, alpha);
  const double yb = std::pow(b, alpha);
  auto f = [&](double y) { return std::pow(std::max(0.0, 1.0 - std::pow(y, 1.0 / alpha)), beta - 1.0); };
  const double h = (yb - ya) / static_cast<double>(panels);
  double sum = f(ya) + f(yb);
  for (std::size_t k = 1; k < panels; ++k)
    sum += (k % 2 == 1 ? 4.0 : 2.0) * f(ya + h * static_cast<double>(k));
  const double log_b = std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta);
  return sum * h / 3.0 / alpha / std::exp(log_b);
}

// ---------------------------------------------------------------------------
// Discrepancy statistics from a raw bid log

/// max over t of |freq_i(t) − θ̂_i(t)| and max over every (d_i, d₋ᵢ) in the
/// full grid, observed or not, of |joint freq − θ̂_i(d_i)·freq(d₋ᵢ)|.
struct DenseDiscrepancy {
  double max_f = 0.0;
  double max_h = 0.0;
};

inline DenseDiscrepancy dense_discrepancy(const std::vector<std::vector<TypeIndex>>& log,
                                          std::size_t i, const Supertype& reported) {
  const std::size_t k = reported.size();
  const std::size_t n = log.empty() ? 0 : log.front().size();
  const double days = static_cast<double>(log.size());
  std::vector<double> own(k, 0.0);
  std::map<std::vector<TypeIndex>, double> others;
  std::map<std::vector<TypeIndex>, std::vector<double>> joint;
  for (const auto& bids : log) {
    own[bids[i]] += 1.0;
    std::vector<TypeIndex> rest;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) rest.push_back(bids[j]);
    others[rest] += 1.0;
    auto& row = joint[rest];
    row.resize(k, 0.0);
    row[bids[i]] += 1.0;
  }
  DenseDiscrepancy d;
  for (std::size_t t = 0; t < k; ++t)
    d.max_f = std::max(d.max_f, std::abs(own[t] / days - reported(t)));
  // Walk the full others grid; unobserved profiles contribute |0 − θ̂·0| = 0.
  std::size_t grid = 1;
  for (std::size_t j = 0; j + 1 < n; ++j) grid *= k;
  std::vector<TypeIndex> rest(n == 0 ? 0 : n - 1);
  for (std::size_t code = 0; code < grid; ++code) {
    std::size_t c = code;
    for (auto& r : rest) {
      r = c % k;
      c /= k;
    }
    auto it = others.find(rest);
    const double freq = it == others.end() ? 0.0 : it->second / days;
    for (std::size_t t = 0; t < k; ++t) {
      double jf = 0.0;
      if (auto jt = joint.find(rest); jt != joint.end()) jf = jt->second[t] / days;
      d.max_h = std::max(d.max_h, std::abs(jf - reported(t) * freq));
    }
  }
  return d;
}

}  // namespace twostage::verification
