#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "crlmaze/a2c.hpp"
#include "crlmaze/env.hpp"
#include "crlmaze/nn.hpp"
#include "crlmaze/scenario.hpp"
#include "crlmaze/seeding.hpp"

namespace crlmaze {

struct CellStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation across test episodes
  int n = 0;

  bool operator==(const CellStats&) const = default;
};

using RewardRow = std::array<CellStats, kMapsPerScenario>;

/// R[i][j]: mean test reward on map j+1 of the checkpoint taken after
/// training on map i+1. Multienv runs hold a single row.
struct RewardMatrix {
  std::vector<RewardRow> rows;

  double mean(std::size_t i, std::size_t j) const { return rows.at(i)[j].mean; }
  bool square() const { return rows.size() == kMapsPerScenario; }
};

namespace detail {

inline CellStats stats_of(const std::vector<double>& xs) {
  CellStats s;
  s.n = static_cast<int>(xs.size());
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

}  // namespace detail

/// Cumulative rewards of `n_test` full episodes on `variant`, no learning.
/// Episode k always uses the same seeds for a given (seed, map), so every
/// checkpoint is tested on the same episodes.
inline std::vector<double> test_episode_rewards(const ParamVector& params, const GridSpec& spec,
                                                const MapVariant& variant, int n_test, std::uint64_t seed,
                                                ActionMode mode = ActionMode::sample) {
  if (n_test < 1) throw ContractViolation("evaluation needs at least one test episode");
  const auto map_key = static_cast<std::uint64_t>(variant.map_index);
  EnvPool pool(spec, static_cast<std::size_t>(n_test), [&](std::size_t env, std::int64_t) {
    return EnvAssignment{variant, derive_seed(seed, {stream::evaluation, map_key, stream::env, env}),
                         derive_seed(seed, {stream::evaluation, map_key, stream::policy, env})};
  });
  pool.reset_all(0);
  std::vector<Observation> observations(pool.size());
  for (int t = 0; t < spec.decisions_per_episode(); ++t) {
    for (std::size_t e = 0; e < pool.size(); ++e) observations[e] = pool.slot(e).observation;
    Matrix logits = forward(params, stack_observations(observations), false).logits;
    for (std::size_t e = 0; e < pool.size(); ++e) {
      EnvSlot& slot = pool.slot(e);
      const auto row = logits.row(static_cast<Eigen::Index>(e));
      const int action = mode == ActionMode::sample ? sample_action(row, slot.policy_rng).action : greedy_action(row);
      advance(spec, slot.state, static_cast<Action>(action), nullptr);
      slot.observation = render_observation(spec, slot.state, slot.variant);
    }
  }
  std::vector<double> rewards;
  rewards.reserve(pool.size());
  for (std::size_t e = 0; e < pool.size(); ++e) rewards.push_back(pool.slot(e).state.cumulative_reward);
  return rewards;
}

/// One row of R: per-map mean and standard deviation over n_test episodes.
inline RewardRow evaluate_checkpoint(const ParamVector& params, const GridSpec& spec, const ScenarioMaps& variants,
                                     int n_test, std::uint64_t seed, ActionMode mode = ActionMode::sample) {
  RewardRow row;
  for (std::size_t j = 0; j < variants.size(); ++j)
    row[j] = detail::stats_of(test_episode_rewards(params, spec, variants[j], n_test, seed, mode));
  return row;
}

/// Average of the lower triangle (diagonal included) of a 3x3 R.
inline double a_metric(const RewardMatrix& r) {
  if (!r.square()) throw ContractViolation("A metric needs a 3x3 reward matrix");
  constexpr std::size_t n = kMapsPerScenario;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) sum += r.mean(i, j);
  return sum / static_cast<double>(n * (n + 1) / 2);
}

/// Outcome of one (scenario, strategy, seed) cell.
struct RunResult {
  std::string scenario;
  std::string strategy;
  std::uint64_t seed = 0;
  RewardMatrix rewards;
};

struct SummaryRow {
  std::string scenario;
  std::string strategy;
  int seed_count = 0;
  double a_mean = std::numeric_limits<double>::quiet_NaN();
  double a_std = std::numeric_limits<double>::quiet_NaN();
  // Mean over seeds of the per-run cell means, and mean over seeds of the
  // per-run test-episode standard deviations.
  std::array<std::array<double, kMapsPerScenario>, kMapsPerScenario> r_mean{};
  std::array<std::array<double, kMapsPerScenario>, kMapsPerScenario> r_std{};
  double multienv_mean = std::numeric_limits<double>::quiet_NaN();
  double multienv_std = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  return stats_of(xs).std;
}

}  // namespace detail

/// Aggregates runs per (scenario, strategy). Multienv runs are folded into
/// the multienv columns of their scenario's rows instead of getting an A.
inline std::vector<SummaryRow> summarize(const std::vector<RunResult>& runs) {
  constexpr std::size_t n = kMapsPerScenario;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::map<std::pair<std::string, std::string>, std::vector<const RunResult*>> groups;
  std::map<std::string, std::vector<const RunResult*>> multienv;
  for (const auto& run : runs) {
    if (run.strategy == "multienv") multienv[run.scenario].push_back(&run);
    else groups[{run.scenario, run.strategy}].push_back(&run);
  }
  // Multienv-only scenarios still get a row carrying the upper bound.
  for (const auto& [scenario, list] : multienv) {
    bool has_other = false;
    for (const auto& [key, _] : groups) has_other = has_other || key.first == scenario;
    if (!has_other) groups[{scenario, "multienv"}] = {};
  }

  std::vector<SummaryRow> out;
  for (const auto& [key, list] : groups) {
    SummaryRow row;
    row.scenario = key.first;
    row.strategy = key.second;
    row.seed_count = static_cast<int>(list.size());
    for (auto& r : row.r_mean) r.fill(nan);
    for (auto& r : row.r_std) r.fill(nan);
    if (!list.empty()) {
      std::vector<double> as;
      for (const auto* run : list) as.push_back(a_metric(run->rewards));
      row.a_mean = detail::stats_of(as).mean;
      row.a_std = detail::sample_std(as);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double m = 0.0, s = 0.0;
          for (const auto* run : list) {
            m += run->rewards.rows[i][j].mean;
            s += run->rewards.rows[i][j].std;
          }
          row.r_mean[i][j] = m / static_cast<double>(list.size());
          row.r_std[i][j] = s / static_cast<double>(list.size());
        }
    }
    if (auto it = multienv.find(key.first); it != multienv.end()) {
      double m = 0.0, s = 0.0;
      for (const auto* run : it->second) {
        const auto& cells = run->rewards.rows.front();
        double run_mean = 0.0, run_std = 0.0;
        for (const auto& c : cells) {
          run_mean += c.mean;
          run_std += c.std;
        }
        m += run_mean / static_cast<double>(cells.size());
        s += run_std / static_cast<double>(cells.size());
      }
      row.multienv_mean = m / static_cast<double>(it->second.size());
      row.multienv_std = s / static_cast<double>(it->second.size());
      if (key.second == "multienv") row.seed_count = static_cast<int>(it->second.size());
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace crlmaze
