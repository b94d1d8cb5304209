#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "crlmaze/env.hpp"
#include "crlmaze/errors.hpp"
#include "crlmaze/nn.hpp"
#include "crlmaze/scenario.hpp"

namespace crlmaze {

enum class FisherClipMode : std::uint8_t { upper, floor };

/// Every tunable of one (scenario, strategy) cell. Strategy-specific fields
/// are only read by the strategies that use them.
struct Hyperparams {
  // A2C
  double gamma = 0.99;
  int n_envs = 20;
  int n_steps = 20;
  double learning_rate = 1e-3;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double rms_decay = 0.99;
  double rms_epsilon = 1e-5;
  double reward_scale = 1.0;
  std::vector<int> hidden_sizes{128, 128};

  // Consolidation and drift detection
  double lambda = 0.0;
  double alpha = 0.0;
  double eta = 0.0;
  int fisher_freq = 0;
  double fisher_clip = 1e-6;
  FisherClipMode fisher_clip_mode = FisherClipMode::upper;
  bool fisher_normalize = true;
  int fisher_sample_size = 1;
  int window_short = 6;
  int window_long = 50;

  // Episode budget. Per map for sequential strategies, total for multienv.
  int train_episodes = 0;
  int test_episodes = 100;
  bool greedy_eval = false;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)", "gamma");
    if (n_envs <= 0) throw ConfigError("n_envs must be positive", "n_envs");
    if (n_steps <= 0) throw ConfigError("n_steps must be positive", "n_steps");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive", "learning_rate");
    if (!(rms_decay >= 0.0 && rms_decay < 1.0)) throw ConfigError("rms_decay must lie in [0, 1)", "rms_decay");
    if (!(rms_epsilon > 0.0)) throw ConfigError("rms_epsilon must be positive", "rms_epsilon");
    if (!(reward_scale > 0.0)) throw ConfigError("reward_scale must be positive", "reward_scale");
    if (value_coef < 0.0) throw ConfigError("value_coef must be non-negative", "value_coef");
    if (entropy_coef < 0.0) throw ConfigError("entropy_coef must be non-negative", "entropy_coef");
    if (window_short <= 0 || window_short >= window_long)
      throw ConfigError("window_short must be positive and smaller than window_long", "window_short");
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative", "lambda");
    if (alpha < 0.0) throw ConfigError("alpha must be non-negative", "alpha");
    if (fisher_freq < 0) throw ConfigError("fisher_freq must be non-negative", "fisher_freq");
    if (!(fisher_clip > 0.0)) throw ConfigError("fisher_clip must be positive", "fisher_clip");
    if (fisher_sample_size <= 0) throw ConfigError("fisher_sample_size must be positive", "fisher_sample_size");
    if (train_episodes <= 0) throw ConfigError("train_episodes must be positive", "train_episodes");
    if (test_episodes <= 0) throw ConfigError("test_episodes must be positive", "test_episodes");
    for (int h : hidden_sizes)
      if (h <= 0) throw ConfigError("hidden layer sizes must be positive", "hidden_sizes");
  }

  bool operator==(const Hyperparams&) const = default;
};

// ---------------------------------------------------------------------------
// Environment pool

/// What an environment slot runs for a given episode.
struct EnvAssignment {
  MapVariant variant;
  std::uint64_t env_seed = 0;
  std::uint64_t policy_seed = 0;
};

/// Maps (env index, episode index) to an assignment.
using ResetPlan = std::function<EnvAssignment(std::size_t env_index, std::int64_t episode)>;

struct EnvSlot {
  EnvState state;
  MapVariant variant;
  Observation observation;
  std::mt19937_64 policy_rng;
  std::int64_t episode = 0;
};

struct CompletedEpisode {
  std::size_t env_index = 0;
  std::int64_t episode = 0;
  int map_index = 0;
  double cumulative_reward = 0.0;
};

/// A fixed set of environments stepped together. Slots whose episode ends
/// inside a rollout are restarted on the next episode of the reset plan.
class EnvPool {
 public:
  EnvPool(GridSpec spec, std::size_t n_envs, ResetPlan plan)
      : spec_(std::move(spec)), slots_(n_envs), plan_(std::move(plan)) {
    spec_.validate();
  }

  void reset_all(std::int64_t episode) {
    for (std::size_t i = 0; i < slots_.size(); ++i) start(i, episode);
  }

  void start(std::size_t env_index, std::int64_t episode) {
    EnvAssignment a = plan_(env_index, episode);
    EnvSlot& slot = slots_[env_index];
    slot.episode = episode;
    slot.variant = a.variant;
    slot.state = reset(spec_, a.env_seed);
    slot.observation = render_observation(spec_, slot.state, slot.variant);
    slot.policy_rng.seed(a.policy_seed);
  }

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return slots_.size(); }
  EnvSlot& slot(std::size_t i) { return slots_[i]; }
  const EnvSlot& slot(std::size_t i) const { return slots_[i]; }

 private:
  GridSpec spec_;
  std::vector<EnvSlot> slots_;
  ResetPlan plan_;
};

// ---------------------------------------------------------------------------
// Rollouts

struct Transition {
  Eigen::Map<const Eigen::RowVectorXd> observation;
  int action;
  double log_probability;
  double reward;
  double value_estimate;
  bool done;
};

/// n_envs x n_steps transitions stored env-major: row = env * n_steps + t.
struct RolloutBatch {
  std::size_t n_envs = 0;
  std::size_t n_steps = 0;
  Matrix observations;
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<double> bootstrap;  // per env; 0 when the last step ended an episode
  std::vector<CompletedEpisode> completed;

  std::size_t row(std::size_t env, std::size_t t) const { return env * n_steps + t; }
  std::size_t size() const { return n_envs * n_steps; }

  Transition transition(std::size_t env, std::size_t t) const {
    const std::size_t r = row(env, t);
    return {Eigen::Map<const Eigen::RowVectorXd>(observations.row(static_cast<Eigen::Index>(r)).data(),
                                                  observations.cols()),
            actions[r], log_probs[r], rewards[r], values[r], dones[r] != 0};
  }
};

enum class ActionMode : std::uint8_t { sample, greedy };

namespace detail {

inline void run_slot(EnvPool& pool, std::size_t env, const ParamVector& params, std::size_t n_steps,
                     ActionMode mode, RolloutBatch& batch, std::vector<CompletedEpisode>& completed) {
  const GridSpec& spec = pool.spec();
  EnvSlot& slot = pool.slot(env);
  for (std::size_t t = 0; t < n_steps; ++t) {
    if (slot.state.done(spec)) throw ContractViolation("rollout reached a finished episode with no reset plan");
    const std::size_t r = batch.row(env, t);
    const auto width = static_cast<Eigen::Index>(slot.observation.data.size());
    auto obs_row = batch.observations.row(static_cast<Eigen::Index>(r));
    obs_row = Eigen::Map<const Eigen::RowVectorXd>(slot.observation.data.data(), width);
    Matrix single = obs_row;
    ForwardResult out = forward(params, single, false);
    SampledAction choice;
    if (mode == ActionMode::sample) {
      choice = sample_action(out.logits.row(0), slot.policy_rng);
    } else {
      choice.action = greedy_action(out.logits.row(0));
      choice.log_probability = log_softmax(out.logits.row(0))(choice.action);
    }
    batch.actions[r] = choice.action;
    batch.log_probs[r] = choice.log_probability;
    batch.values[r] = out.values(0);
    const double reward = advance(spec, slot.state, static_cast<Action>(choice.action), nullptr);
    batch.rewards[r] = reward;
    const bool done = slot.state.done(spec);
    batch.dones[r] = done ? 1 : 0;
    if (done) {
      completed.push_back({env, slot.episode, slot.variant.map_index, slot.state.cumulative_reward});
      if (t + 1 < n_steps) pool.start(env, slot.episode + 1);
    } else {
      slot.observation = render_observation(spec, slot.state, slot.variant);
    }
  }
  if (batch.dones[batch.row(env, n_steps - 1)]) {
    batch.bootstrap[env] = 0.0;
  } else {
    const auto width = static_cast<Eigen::Index>(slot.observation.data.size());
    Matrix single = Eigen::Map<const Eigen::RowVectorXd>(slot.observation.data.data(), width);
    batch.bootstrap[env] = forward(params, single, false).values(0);
  }
}

}  // namespace detail

/// Advances every slot of `pool` by n_steps decisions under the policy given
/// by `params`. Slots are independent, so they may be spread over `threads`
/// workers; results do not depend on the thread count. A slot that finishes
/// its episode on the final step is left finished; the caller restarts it
/// with EnvPool::start (so episode-level bookkeeping happens in between).
inline RolloutBatch collect_rollout(EnvPool& pool, const ParamVector& params, std::size_t n_steps,
                                    std::size_t threads = 1, ActionMode mode = ActionMode::sample) {
  if (n_steps == 0) throw ContractViolation("rollout needs at least one step");
  RolloutBatch batch;
  batch.n_envs = pool.size();
  batch.n_steps = n_steps;
  const auto rows = static_cast<Eigen::Index>(batch.size());
  batch.observations.resize(rows, pool.spec().observation_size());
  batch.actions.assign(batch.size(), 0);
  batch.log_probs.assign(batch.size(), 0.0);
  batch.rewards.assign(batch.size(), 0.0);
  batch.values.assign(batch.size(), 0.0);
  batch.dones.assign(batch.size(), 0);
  batch.bootstrap.assign(batch.n_envs, 0.0);

  std::vector<std::vector<CompletedEpisode>> per_env(batch.n_envs);
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, batch.n_envs));
  if (threads == 1) {
    for (std::size_t e = 0; e < batch.n_envs; ++e)
      detail::run_slot(pool, e, params, n_steps, mode, batch, per_env[e]);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t e = w; e < batch.n_envs; e += threads)
            detail::run_slot(pool, e, params, n_steps, mode, batch, per_env[e]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  for (auto& list : per_env) batch.completed.insert(batch.completed.end(), list.begin(), list.end());
  return batch;
}

// ---------------------------------------------------------------------------
// Returns and loss

struct ReturnsAndAdvantages {
  std::vector<double> returns;
  std::vector<double> advantages;
};

/// n-step returns per env, cut at episode boundaries:
/// R_t = r_t + gamma * R_{t+1} * (1 - done_t), with R_n = bootstrap.
/// Rewards are multiplied by `reward_scale` first.
inline ReturnsAndAdvantages compute_returns(const RolloutBatch& batch, double gamma, double reward_scale = 1.0) {
  ReturnsAndAdvantages out;
  out.returns.assign(batch.size(), 0.0);
  out.advantages.assign(batch.size(), 0.0);
  for (std::size_t e = 0; e < batch.n_envs; ++e) {
    double next = batch.bootstrap[e];
    for (std::size_t t = batch.n_steps; t-- > 0;) {
      const std::size_t r = batch.row(e, t);
      const double carry = batch.dones[r] ? 0.0 : gamma * next;
      out.returns[r] = reward_scale * batch.rewards[r] + carry;
      out.advantages[r] = out.returns[r] - batch.values[r];
      next = out.returns[r];
    }
  }
  return out;
}

struct LossCoefficients {
  double gamma = 0.99;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double reward_scale = 1.0;

  static LossCoefficients from(const Hyperparams& h) {
    return {h.gamma, h.value_coef, h.entropy_coef, h.reward_scale};
  }
};

struct LossDiagnostics {
  double policy_loss = 0.0;   // mean of -log pi(a|s) * advantage
  double value_loss = 0.0;    // value_coef * mean squared value error
  double entropy_loss = 0.0;  // -entropy_coef * mean entropy
  double mean_entropy = 0.0;
  double value_error = 0.0;   // mean squared value error
};

struct LossResult {
  double loss = 0.0;
  ParamVector gradient;
  LossDiagnostics diagnostics;
};

/// A2C objective with returns and advantages held fixed. With
/// `with_gradient` false only the scalar is computed (finite differences use
/// this path).
inline LossResult a2c_objective(const RolloutBatch& batch, const ParamVector& params,
                                const ReturnsAndAdvantages& targets, const LossCoefficients& coef,
                                bool with_gradient = true) {
  ForwardResult fwd = forward(params, batch.observations, with_gradient);
  const auto n = static_cast<Eigen::Index>(batch.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix dlogits(n, fwd.logits.cols());
  Vector dvalues(n);
  LossDiagnostics d;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const Eigen::RowVectorXd logp = log_softmax(fwd.logits.row(i));
    const Eigen::RowVectorXd p = logp.array().exp();
    const double entropy = -(p.array() * logp.array()).sum();
    const int a = batch.actions[idx];
    const double adv = targets.advantages[idx];
    const double err = targets.returns[idx] - fwd.values(i);
    d.policy_loss += -logp(a) * adv;
    d.value_error += err * err;
    d.mean_entropy += entropy;
    if (with_gradient) {
      // d(-logp_a * adv)/dz = (p - onehot_a) * adv
      Eigen::RowVectorXd g = p * adv;
      g(a) -= adv;
      // d(-c_e * H)/dz_j = c_e * p_j * (logp_j + H)
      g.array() += coef.entropy_coef * p.array() * (logp.array() + entropy);
      dlogits.row(i) = g * inv_n;
      dvalues(i) = -2.0 * coef.value_coef * err * inv_n;
    }
  }
  d.policy_loss *= inv_n;
  d.value_error *= inv_n;
  d.mean_entropy *= inv_n;
  d.value_loss = coef.value_coef * d.value_error;
  d.entropy_loss = -coef.entropy_coef * d.mean_entropy;

  LossResult result;
  result.loss = d.policy_loss + d.value_loss + d.entropy_loss;
  result.diagnostics = d;
  if (!std::isfinite(result.loss))
    throw NumericalError("non-finite A2C loss (policy " + std::to_string(d.policy_loss) + ", value " +
                         std::to_string(d.value_loss) + ", entropy " + std::to_string(d.mean_entropy) + ")");
  if (with_gradient) result.gradient = backward(fwd.cache, dlogits, dvalues);
  return result;
}

/// Loss = mean[-log pi(a|s) * A + value_coef * (R - V)^2 - entropy_coef * H].
inline LossResult a2c_loss_and_grads(const RolloutBatch& batch, const ParamVector& params,
                                     const LossCoefficients& coef) {
  return a2c_objective(batch, params, compute_returns(batch, coef.gamma, coef.reward_scale), coef, true);
}

// ---------------------------------------------------------------------------
// Optimizer

/// RMSProp-style adaptive scaling.
struct OptimizerState {
  std::vector<double> square_avg;
  double decay = 0.99;
  double epsilon = 1e-5;
  double learning_rate = 1e-3;

  static OptimizerState for_params(const ParamVector& p, const Hyperparams& h) {
    return {std::vector<double>(p.size(), 0.0), h.rms_decay, h.rms_epsilon, h.learning_rate};
  }
  bool operator==(const OptimizerState&) const = default;
};

/// acc <- decay * acc + (1 - decay) g^2 ; theta <- theta - lr * g / sqrt(acc + eps).
inline void update(ParamVector& params, const ParamVector& gradient, OptimizerState& opt) {
  if (params.size() != gradient.size() || params.size() != opt.square_avg.size())
    throw ContractViolation("optimizer update with mismatched shapes");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = gradient[i];
    opt.square_avg[i] = opt.decay * opt.square_avg[i] + (1.0 - opt.decay) * g * g;
    params[i] -= opt.learning_rate * g / std::sqrt(opt.square_avg[i] + opt.epsilon);
  }
  for (double v : params.values())
    if (!std::isfinite(v)) throw NumericalError("optimizer produced non-finite parameters");
}

}  // namespace crlmaze
