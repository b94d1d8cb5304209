#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "crlmaze/checkpoint.hpp"
#include "crlmaze/config.hpp"
#include "crlmaze/csv.hpp"
#include "crlmaze/eval.hpp"
#include "crlmaze/strategies.hpp"

namespace crlmaze {

namespace fs = std::filesystem;

inline const char* const kLogHeader =
    "episode,map,mean_reward,mavg_short,mavg_long,lambda,policy_loss,value_loss,entropy_loss,penalty,"
    "mean_entropy,value_error,fisher_refreshed,params_fingerprint";

inline std::string log_csv_row(const LogRow& r) {
  std::string s = std::to_string(r.episode) + "," + std::to_string(r.map);
  for (double v : {r.mean_reward, r.mavg_short, r.mavg_long, r.lambda, r.policy_loss, r.value_loss, r.entropy_loss,
                   r.penalty, r.mean_entropy, r.value_error})
    s += "," + csv_double(v);
  s += "," + std::to_string(r.fisher_refreshed) + "," + std::to_string(r.params_fingerprint);
  return s;
}

struct CellKey {
  ScenarioKind scenario = ScenarioKind::object;
  StrategyKind strategy = StrategyKind::naive;
  std::uint64_t seed = 0;
};

inline fs::path run_dir(const fs::path& root, const CellKey& k) {
  return root / std::string(to_string(k.scenario)) / std::string(to_string(k.strategy)) / std::to_string(k.seed);
}

/// Fixed file names inside a run directory.
namespace run_files {
inline constexpr const char* log = "log.csv";
inline constexpr const char* rewards = "reward_matrix.csv";
inline constexpr const char* final_checkpoint = "checkpoint_final";
inline constexpr const char* resume_checkpoint = "checkpoint_resume";
inline constexpr const char* config = "config.cfg";
inline constexpr const char* error = "error.txt";
inline std::string map_checkpoint(int map) { return "checkpoint_map" + std::to_string(map); }
}  // namespace run_files

inline void write_reward_matrix(const fs::path& path, const RewardMatrix& r) {
  std::ofstream out(path, std::ios::trunc);
  out << "row,map,mean,std,n\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i)
    for (std::size_t j = 0; j < r.rows[i].size(); ++j)
      out << i + 1 << "," << j + 1 << "," << csv_double(r.rows[i][j].mean) << "," << csv_double(r.rows[i][j].std)
          << "," << r.rows[i][j].n << "\n";
}

inline RewardMatrix read_reward_matrix(const fs::path& path) {
  const CsvTable t = read_csv(path);
  RewardMatrix r;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto i = static_cast<std::size_t>(t.number(k, "row")) - 1;
    const auto j = static_cast<std::size_t>(t.number(k, "map")) - 1;
    if (j >= kMapsPerScenario || i >= kMapsPerScenario) throw ConfigError(path.string() + ": cell out of range");
    if (r.rows.size() <= i) r.rows.resize(i + 1);
    r.rows[i][j] = CellStats{t.number(k, "mean"), t.number(k, "std"), static_cast<int>(t.number(k, "n"))};
  }
  return r;
}

/// Configuration reduced to a single cell; stored in each run directory.
inline ExperimentConfig cell_config(const ExperimentConfig& cfg, const CellKey& k) {
  ExperimentConfig c = cfg;
  c.scenarios = {k.scenario};
  c.strategies = {k.strategy};
  c.seeds = {k.seed};
  c.cells = {{{k.scenario, k.strategy}, cfg.hyper(k.scenario, k.strategy)}};
  return c;
}

/// Evaluates the map checkpoints of a finished run directory (a single
/// final checkpoint for multienv).
inline RewardMatrix evaluate_run_dir(const fs::path& dir, const ExperimentConfig& cfg, const CellKey& k) {
  const Hyperparams& h = cfg.hyper(k.scenario, k.strategy);
  const ScenarioMaps maps = build_scenario(k.scenario);
  const ActionMode mode = h.greedy_eval ? ActionMode::greedy : ActionMode::sample;
  RewardMatrix r;
  if (is_sequential(k.strategy)) {
    for (int m = 1; m <= static_cast<int>(kMapsPerScenario); ++m) {
      const TrainingState s = load_checkpoint(dir / run_files::map_checkpoint(m));
      r.rows.push_back(evaluate_checkpoint(s.params, cfg.grid, maps, h.test_episodes, k.seed, mode));
    }
  } else {
    const TrainingState s = load_checkpoint(dir / run_files::final_checkpoint);
    r.rows.push_back(evaluate_checkpoint(s.params, cfg.grid, maps, h.test_episodes, k.seed, mode));
  }
  return r;
}

namespace detail {

/// Drops log rows at or beyond `next_episode` (written after the last
/// checkpoint of an interrupted run).
inline void truncate_log(const fs::path& path, std::int64_t next_episode) {
  std::vector<std::string> kept;
  {
    std::ifstream in(path);
    std::string line;
    if (!std::getline(in, line) || line != kLogHeader) throw ConfigError(path.string() + " has an unexpected header");
    kept.push_back(line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (parse_integer<std::int64_t>("episode", line.substr(0, comma)) < next_episode) kept.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : kept) out << l << "\n";
}

}  // namespace detail

struct CellOutcome {
  CellKey key;
  bool ok = false;
  std::string error;
  RunResult result;
};

/// Trains and evaluates one cell, resuming from its last checkpoint when one
/// exists. `stop_after` >= 0 stops training after that many episodes in this
/// call without evaluating (used to simulate interruption).
inline CellOutcome run_cell(const ExperimentConfig& cfg, const CellKey& k, std::int64_t stop_after = -1) {
  CellOutcome outcome;
  outcome.key = k;
  outcome.result.scenario = std::string(to_string(k.scenario));
  outcome.result.strategy = std::string(to_string(k.strategy));
  outcome.result.seed = k.seed;
  const fs::path dir = run_dir(cfg.output_dir, k);
  try {
    fs::create_directories(dir);
    fs::remove(dir / run_files::error);
    const ExperimentConfig single = cell_config(cfg, k);
    {
      std::ofstream out(dir / run_files::config, std::ios::trunc);
      out << serialize_config(single);
    }
    const Hyperparams& h = cfg.hyper(k.scenario, k.strategy);
    const ScenarioMaps maps = build_scenario(k.scenario);

    if (!fs::exists(dir / run_files::final_checkpoint)) {
      std::optional<Trainer> trainer;
      if (fs::exists(dir / run_files::resume_checkpoint)) {
        TrainingState state = load_checkpoint(dir / run_files::resume_checkpoint);
        if (state.kind != k.strategy || state.scenario != k.scenario || state.seed != k.seed)
          throw ConfigError("resume checkpoint belongs to a different cell");
        detail::truncate_log(dir / run_files::log, state.next_episode);
        trainer.emplace(std::move(state), h, cfg.grid, maps, cfg.options());
      } else {
        std::ofstream(dir / run_files::log, std::ios::trunc) << kLogHeader << "\n";
        trainer.emplace(k.strategy, k.scenario, h, cfg.grid, maps, k.seed, cfg.options());
      }
      std::ofstream log(dir / run_files::log, std::ios::app);
      TrainerHooks hooks;
      hooks.on_episode = [&](const LogRow& r) { log << log_csv_row(r) << "\n" << std::flush; };
      hooks.on_map_end = [&](int map, const TrainingState& s) {
        if (map > 0) save_checkpoint(dir / run_files::map_checkpoint(map), s);
      };
      hooks.on_checkpoint = [&](const TrainingState& s) { save_checkpoint(dir / run_files::resume_checkpoint, s); };
      hooks.checkpoint_every = cfg.checkpoint_every;
      trainer->run(hooks, stop_after);
      if (!trainer->finished()) return outcome;
      save_checkpoint(dir / run_files::final_checkpoint, trainer->state());
    }
    outcome.result.rewards = evaluate_run_dir(dir, cfg, k);
    write_reward_matrix(dir / run_files::rewards, outcome.result.rewards);
    outcome.ok = true;
  } catch (const std::exception& err) {
    outcome.error = err.what();
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream(dir / run_files::error, std::ios::trunc) << outcome.error << "\n";
  }
  return outcome;
}

inline std::vector<CellKey> experiment_cells(const ExperimentConfig& cfg) {
  std::vector<CellKey> cells;
  for (auto s : cfg.scenarios)
    for (auto k : cfg.strategies)
      for (auto seed : cfg.seeds) cells.push_back({s, k, seed});
  return cells;
}

inline void write_summary(const fs::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  out << "scenario,strategy,seed_count,A_mean,A_std";
  for (const char* stat : {"mean", "std"})
    for (int i = 1; i <= 3; ++i)
      for (int j = 1; j <= 3; ++j) out << ",R" << i << j << "_" << stat;
  out << ",multienv_mean,multienv_std\n";
  for (const auto& r : rows) {
    out << r.scenario << "," << r.strategy << "," << r.seed_count << "," << csv_double(r.a_mean) << ","
        << csv_double(r.a_std);
    for (const auto* m : {&r.r_mean, &r.r_std})
      for (const auto& row : *m)
        for (double v : row) out << "," << csv_double(v);
    out << "," << csv_double(r.multienv_mean) << "," << csv_double(r.multienv_std) << "\n";
  }
}

inline void write_runs(const fs::path& path, const std::vector<CellOutcome>& outcomes) {
  std::ofstream out(path, std::ios::trunc);
  out << "scenario,strategy,seed,status,A\n";
  for (const auto& o : outcomes) {
    const bool has_a = o.ok && o.result.rewards.square();
    out << to_string(o.key.scenario) << "," << to_string(o.key.strategy) << "," << o.key.seed << ","
        << (o.ok ? "ok" : "failed") << "," << (has_a ? csv_double(a_metric(o.result.rewards)) : "nan") << "\n";
  }
}

/// Timestamps live here only, so every other artifact is a pure function
/// of config and seed.
inline void write_metadata(const fs::path& path, std::size_t n_cells, std::size_t n_failed) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  std::ofstream out(path, std::ios::trunc);
  out << "finished_at = " << stamp << "\n"
      << "csv_schema_version = " << kCsvSchemaVersion << "\n"
      << "cells = " << n_cells << "\n"
      << "failed_cells = " << n_failed << "\n"
      << "r_aggregation = mean over seeds of per-run cell means\n"
      << "r_std_aggregation = mean over seeds of per-run test-episode standard deviations\n";
}

struct ExperimentReport {
  std::vector<CellOutcome> outcomes;
  int exit_code = 0;  // 0 all cells succeeded, 2 at least one failed
};

/// Runs every (scenario, strategy, seed) cell with up to `parallelism`
/// cells in flight, then writes summary.csv, runs.csv and metadata.txt.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, std::ostream* progress = nullptr) {
  const std::vector<CellKey> cells = experiment_cells(cfg);
  fs::create_directories(cfg.output_dir);
  {
    std::ofstream out(fs::path(cfg.output_dir) / "config.cfg", std::ios::trunc);
    out << serialize_config(cfg);
  }
  ExperimentReport report;
  report.outcomes.resize(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      report.outcomes[i] = run_cell(cfg, cells[i]);
      if (progress) {
        std::lock_guard lock(progress_mutex);
        const auto& o = report.outcomes[i];
        *progress << to_string(o.key.scenario) << "/" << to_string(o.key.strategy) << "/" << o.key.seed << ": "
                  << (o.ok ? "ok" : "FAILED: " + o.error) << std::endl;
      }
    }
  };
  const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.parallelism), cells.size());
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_workers; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  std::vector<RunResult> results;
  std::size_t failed = 0;
  for (const auto& o : report.outcomes) {
    if (o.ok) results.push_back(o.result);
    else ++failed;
  }
  write_summary(fs::path(cfg.output_dir) / "summary.csv", summarize(results));
  write_runs(fs::path(cfg.output_dir) / "runs.csv", report.outcomes);
  write_metadata(fs::path(cfg.output_dir) / "metadata.txt", cells.size(), failed);
  report.exit_code = failed == 0 ? 0 : 2;
  return report;
}

/// CRLMAZE_OUTPUT_DIR and CRLMAZE_PARALLELISM take precedence over the file.
inline void apply_env_overrides(ExperimentConfig& cfg) {
  if (const char* dir = std::getenv("CRLMAZE_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
  if (const char* p = std::getenv("CRLMAZE_PARALLELISM"); p && *p) {
    cfg.parallelism = detail::parse_integer<int>("CRLMAZE_PARALLELISM", p);
    if (cfg.parallelism < 1) throw ConfigError("CRLMAZE_PARALLELISM must be at least 1", "CRLMAZE_PARALLELISM");
  }
}

}  // namespace crlmaze
