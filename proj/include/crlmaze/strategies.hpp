#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crlmaze/a2c.hpp"
#include "crlmaze/consolidation.hpp"
#include "crlmaze/drift.hpp"
#include "crlmaze/env.hpp"
#include "crlmaze/errors.hpp"
#include "crlmaze/nn.hpp"
#include "crlmaze/scenario.hpp"
#include "crlmaze/seeding.hpp"

namespace crlmaze {

enum class StrategyKind : std::uint8_t { multienv, naive, sup, static_, unsup };

inline constexpr std::array<StrategyKind, 5> kAllStrategies{StrategyKind::multienv, StrategyKind::naive,
                                                            StrategyKind::sup, StrategyKind::static_,
                                                            StrategyKind::unsup};

inline std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::multienv: return "multienv";
    case StrategyKind::naive: return "naive";
    case StrategyKind::sup: return "sup";
    case StrategyKind::static_: return "static";
    case StrategyKind::unsup: return "unsup";
  }
  return "?";
}

inline std::optional<StrategyKind> parse_strategy(std::string_view name) {
  for (auto k : kAllStrategies)
    if (to_string(k) == name) return k;
  return std::nullopt;
}

inline bool is_sequential(StrategyKind kind) { return kind != StrategyKind::multienv; }

/// How CRL-Unsup decides when to consolidate. `drift` is the reward
/// moving-average gate; `map_boundary` forces lambda = alpha from the first
/// map change on and exists to compare against CRL-Sup.
enum class TriggerMode : std::uint8_t { drift, map_boundary };

struct StrategyOptions {
  TriggerMode trigger = TriggerMode::drift;
  bool sup_keep_latest = false;  // CRL-Sup with a single (latest) anchor
  std::size_t rollout_threads = 1;
};

/// Everything needed to continue a run from an episode boundary. Random
/// streams are keyed by (seed, episode, env), so the seed plus the episode
/// counter pins every stream.
struct TrainingState {
  StrategyKind kind = StrategyKind::naive;
  ScenarioKind scenario = ScenarioKind::object;
  std::uint64_t seed = 0;
  std::int64_t next_episode = 0;
  ParamVector params;
  OptimizerState optimizer;
  std::vector<ConsolidationTerm> terms;
  DriftDetector detector;

  bool operator==(const TrainingState& o) const {
    return kind == o.kind && scenario == o.scenario && seed == o.seed && next_episode == o.next_episode &&
           params == o.params && optimizer == o.optimizer && terms == o.terms && detector == o.detector;
  }
};

/// One row of the per-episode training log.
struct LogRow {
  std::int64_t episode = 0;
  int map = 0;
  double mean_reward = 0.0;
  double mavg_short = 0.0;
  double mavg_long = 0.0;
  double lambda = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy_loss = 0.0;
  double penalty = 0.0;
  double mean_entropy = 0.0;
  double value_error = 0.0;
  int fisher_refreshed = 0;
  std::uint64_t params_fingerprint = 0;

  bool operator==(const LogRow&) const = default;
};

struct TrainerHooks {
  std::function<void(const LogRow&)> on_episode;
  /// Called after the last training episode of each map (once, at the end,
  /// for multienv), before any Fisher estimation at that boundary.
  std::function<void(int map, const TrainingState&)> on_map_end;
  /// Called with resumable state every `checkpoint_every` episodes and at the end.
  std::function<void(const TrainingState&)> on_checkpoint;
  std::int64_t checkpoint_every = 0;
  /// Instrumentation: every environment (re)start during training.
  std::function<void(std::size_t env, std::int64_t episode, const MapVariant&)> on_env_start;
};

class Trainer {
 public:
  Trainer(StrategyKind kind, ScenarioKind scenario, Hyperparams hyper, GridSpec spec, ScenarioMaps maps,
          std::uint64_t seed, StrategyOptions options = {})
      : hyper_(std::move(hyper)), spec_(std::move(spec)), maps_(maps), options_(options) {
    hyper_.validate();
    spec_.validate();
    validate_for(kind);
    state_.kind = kind;
    state_.scenario = scenario;
    state_.seed = seed;
    NetworkConfig net;
    net.input_size = spec_.observation_size();
    net.hidden_sizes = hyper_.hidden_sizes;
    state_.params = init_params(net, derive_seed(seed, {stream::init}));
    state_.optimizer = OptimizerState::for_params(state_.params, hyper_);
    state_.detector = DriftDetector(hyper_.window_short, hyper_.window_long, hyper_.eta, hyper_.alpha);
  }

  /// Continues from a checkpointed state.
  Trainer(TrainingState state, Hyperparams hyper, GridSpec spec, ScenarioMaps maps, StrategyOptions options = {})
      : hyper_(std::move(hyper)), spec_(std::move(spec)), maps_(maps), options_(options), state_(std::move(state)) {
    hyper_.validate();
    spec_.validate();
    validate_for(state_.kind);
    if (state_.params.layout().config.input_size != spec_.observation_size() ||
        state_.params.layout().config.hidden_sizes != hyper_.hidden_sizes)
      throw ConfigError("checkpoint network does not match the configuration", "hidden_sizes");
  }

  std::int64_t total_episodes() const {
    return is_sequential(state_.kind) ? static_cast<std::int64_t>(hyper_.train_episodes) * 3
                                      : static_cast<std::int64_t>(hyper_.train_episodes);
  }

  Schedule schedule() const { return {hyper_.train_episodes, 3}; }
  const TrainingState& state() const { return state_; }
  const Hyperparams& hyper() const { return hyper_; }
  bool finished() const { return state_.next_episode >= total_episodes(); }

  /// Trains until the budget is spent, or until `stop_after` episodes have
  /// completed in this call (for interruption tests).
  void run(const TrainerHooks& hooks = {}, std::int64_t stop_after = -1) {
    std::int64_t done_here = 0;
    while (!finished() && (stop_after < 0 || done_here < stop_after)) {
      try {
        run_episode(hooks);
      } catch (const NumericalError& err) {
        throw NumericalError(std::string(to_string(state_.scenario)) + "/" + std::string(to_string(state_.kind)) +
                             "/seed " + std::to_string(state_.seed) + " episode " +
                             std::to_string(state_.next_episode) + ": " + err.what());
      }
      ++done_here;
    }
  }

  /// Map the given training episode runs on, for env `env_index`.
  const MapVariant& variant_for(std::size_t env_index, std::int64_t episode) const {
    if (is_sequential(state_.kind)) return maps_[static_cast<std::size_t>(active_map(schedule(), episode) - 1)];
    const auto key = static_cast<std::uint64_t>(episode);
    std::mt19937_64 rng(derive_seed(state_.seed, {stream::map_choice, key, env_index}));
    return maps_[std::uniform_int_distribution<std::size_t>(0, maps_.size() - 1)(rng)];
  }

  /// Strength applied to the penalty terms during `episode`.
  double lambda_for(std::int64_t episode) const {
    if (state_.terms.empty()) return 0.0;
    switch (state_.kind) {
      case StrategyKind::sup:
      case StrategyKind::static_: return hyper_.lambda;
      case StrategyKind::unsup:
        if (options_.trigger == TriggerMode::map_boundary)
          return active_map(schedule(), episode) > 1 ? hyper_.alpha : 0.0;
        return state_.detector.current_lambda();
      default: return 0.0;
    }
  }

 private:
  void validate_for(StrategyKind kind) const {
    if ((kind == StrategyKind::static_ || kind == StrategyKind::unsup) && hyper_.fisher_freq <= 0)
      throw ConfigError("fisher_freq must be positive for this strategy", "fisher_freq");
  }

  ResetPlan plan(const TrainerHooks& hooks) const {
    return [this, &hooks](std::size_t env, std::int64_t episode) {
      const MapVariant& v = variant_for(env, episode);
      if (hooks.on_env_start) hooks.on_env_start(env, episode, v);
      const auto key = static_cast<std::uint64_t>(episode);
      return EnvAssignment{v, derive_seed(state_.seed, {stream::env, key, env}),
                           derive_seed(state_.seed, {stream::policy, key, env})};
    };
  }

  void run_episode(const TrainerHooks& hooks) {
    const std::int64_t e = state_.next_episode;
    const double lambda = lambda_for(e);
    EnvPool pool(spec_, static_cast<std::size_t>(hyper_.n_envs), plan(hooks));
    pool.reset_all(e);

    const auto coef = LossCoefficients::from(hyper_);
    LogRow row;
    row.episode = e;
    row.map = is_sequential(state_.kind) ? active_map(schedule(), e) : 0;
    row.lambda = lambda;
    int updates = 0;
    double reward_sum = 0.0;
    int finished_envs = 0;
    int remaining = spec_.decisions_per_episode();
    while (remaining > 0) {
      const int n = std::min(remaining, hyper_.n_steps);
      RolloutBatch batch = collect_rollout(pool, state_.params, static_cast<std::size_t>(n), options_.rollout_threads);
      remaining -= n;
      LossResult loss = a2c_loss_and_grads(batch, state_.params, coef);
      double penalty = 0.0;
      if (lambda != 0.0) {
        for (const auto& term : state_.terms) {
          Penalty p = ewc_penalty_and_grads(state_.params, term.fisher, term.anchor, lambda);
          penalty += p.value;
          loss.gradient.as_eigen() += p.gradient.as_eigen();
        }
      }
      update(state_.params, loss.gradient, state_.optimizer);
      row.policy_loss += loss.diagnostics.policy_loss;
      row.value_loss += loss.diagnostics.value_loss;
      row.entropy_loss += loss.diagnostics.entropy_loss;
      row.mean_entropy += loss.diagnostics.mean_entropy;
      row.value_error += loss.diagnostics.value_error;
      row.penalty += penalty;
      ++updates;
      for (const auto& c : batch.completed) {
        reward_sum += c.cumulative_reward;
        ++finished_envs;
      }
    }
    if (finished_envs != hyper_.n_envs) throw ContractViolation("environments fell out of episode lockstep");
    const double inv = 1.0 / updates;
    row.policy_loss *= inv;
    row.value_loss *= inv;
    row.entropy_loss *= inv;
    row.mean_entropy *= inv;
    row.value_error *= inv;
    row.penalty *= inv;
    row.mean_reward = reward_sum / finished_envs;

    state_.detector.record_episode(row.mean_reward);
    row.mavg_short = state_.detector.short_average();
    row.mavg_long = state_.detector.long_average();
    state_.next_episode = e + 1;

    const std::int64_t completed = e + 1;
    const bool last = completed == total_episodes();
    if (is_sequential(state_.kind)) {
      if (completed % hyper_.train_episodes == 0 && hooks.on_map_end) hooks.on_map_end(row.map, state_);
      if (state_.kind == StrategyKind::sup && completed % hyper_.train_episodes == 0 && !last) {
        ConsolidationTerm term = estimate_at(e, row.map);
        if (options_.sup_keep_latest) state_.terms.clear();
        state_.terms.push_back(std::move(term));
        row.fisher_refreshed = 1;
      }
      if ((state_.kind == StrategyKind::static_ || state_.kind == StrategyKind::unsup) &&
          completed % hyper_.fisher_freq == 0 && !last) {
        state_.terms.assign(1, estimate_at(e, row.map));
        row.fisher_refreshed = 1;
      }
    } else if (last && hooks.on_map_end) {
      hooks.on_map_end(0, state_);
    }
    row.params_fingerprint = state_.params.fingerprint();
    if (hooks.on_episode) hooks.on_episode(row);
    if (hooks.on_checkpoint &&
        (last || (hooks.checkpoint_every > 0 && completed % hooks.checkpoint_every == 0)))
      hooks.on_checkpoint(state_);
  }

  ConsolidationTerm estimate_at(std::int64_t episode, int map) const {
    return estimate_fisher(state_.params, spec_, maps_[static_cast<std::size_t>(map - 1)], hyper_.fisher_sample_size,
                           derive_seed(state_.seed, {stream::fisher, static_cast<std::uint64_t>(episode)}),
                           FisherOptions::from(hyper_), episode);
  }

  Hyperparams hyper_;
  GridSpec spec_;
  ScenarioMaps maps_;
  StrategyOptions options_;
  TrainingState state_;
};

/// In-memory result of a full strategy run.
struct TrainedRun {
  StrategyKind kind = StrategyKind::naive;
  std::uint64_t seed = 0;
  ParamVector final_params;
  std::vector<ParamVector> map_checkpoints;  // 3 for sequential strategies, 1 for multienv
  std::vector<LogRow> log;
  std::vector<ConsolidationTerm> terms;
  Hyperparams hyper;
};

inline TrainedRun run_strategy(StrategyKind kind, ScenarioKind scenario, const Hyperparams& hyper,
                               const GridSpec& spec, std::uint64_t seed, StrategyOptions options = {},
                               const ScenarioMaps* maps = nullptr) {
  Trainer trainer(kind, scenario, hyper, spec, maps ? *maps : build_scenario(scenario), seed, options);
  TrainedRun run;
  run.kind = kind;
  run.seed = seed;
  run.hyper = hyper;
  TrainerHooks hooks;
  hooks.on_episode = [&](const LogRow& r) { run.log.push_back(r); };
  hooks.on_map_end = [&](int, const TrainingState& s) { run.map_checkpoints.push_back(s.params); };
  trainer.run(hooks);
  run.final_params = trainer.state().params;
  run.terms = trainer.state().terms;
  return run;
}

}  // namespace crlmaze
