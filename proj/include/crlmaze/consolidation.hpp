#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "crlmaze/a2c.hpp"
#include "crlmaze/errors.hpp"
#include "crlmaze/nn.hpp"
#include "crlmaze/seeding.hpp"

namespace crlmaze {

/// Diagonal Fisher information, aligned with the parameter layout.
struct FisherDiag {
  std::vector<double> values;
  std::int64_t episode = -1;  // training episode after which it was estimated
  int sample_size = 0;        // evaluation episodes used

  bool operator==(const FisherDiag&) const = default;
};

/// Parameter snapshot the penalty pulls towards.
struct Anchor {
  std::vector<double> values;
  std::int64_t episode = -1;

  bool operator==(const Anchor&) const = default;
};

/// One penalty term (lambda/2) * sum_k F_k (theta_k - anchor_k)^2. Fisher and
/// anchor are always captured together.
struct ConsolidationTerm {
  FisherDiag fisher;
  Anchor anchor;

  bool operator==(const ConsolidationTerm&) const = default;
};

struct FisherOptions {
  bool normalize = true;  // scale to unit maximum before clipping
  double clip = 1e-6;
  FisherClipMode clip_mode = FisherClipMode::upper;

  static FisherOptions from(const Hyperparams& h) { return {h.fisher_normalize, h.fisher_clip, h.fisher_clip_mode}; }
};

/// Running sum of squared per-decision gradients of log pi(a|s).
class FisherAccumulator {
 public:
  explicit FisherAccumulator(const ParamVector& like) : sum_(ParamVector::zeros_like(like)) {}

  /// Adds sum_b (d log pi(a_b|s_b) / d theta)^2 for one batch of decisions.
  void add(const ParamVector& params, const Matrix& observations, std::span<const int> actions) {
    if (static_cast<std::size_t>(observations.rows()) != actions.size())
      throw ContractViolation("one action per observation row expected");
    ForwardResult fwd = forward(params, observations, true);
    Matrix dlogits(fwd.logits.rows(), fwd.logits.cols());
    for (Eigen::Index i = 0; i < fwd.logits.rows(); ++i) {
      // d log softmax(z)_a / dz = onehot_a - p
      Eigen::RowVectorXd g = -softmax(fwd.logits.row(i));
      g(actions[static_cast<std::size_t>(i)]) += 1.0;
      dlogits.row(i) = g;
    }
    sum_.as_eigen() += squared_gradient_sum(fwd.cache, dlogits).as_eigen();
    count_ += static_cast<std::size_t>(observations.rows());
  }

  std::size_t count() const { return count_; }

  /// Mean squared gradient (the empirical Fisher diagonal), unnormalized.
  std::vector<double> mean() const {
    std::vector<double> out(sum_.size(), 0.0);
    if (count_ == 0) return out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sum_[i] / static_cast<double>(count_);
    return out;
  }

 private:
  ParamVector sum_;
  std::size_t count_ = 0;
};

/// Optional unit-max normalization followed by the configured clip.
inline void condition_fisher(std::vector<double>& f, const FisherOptions& opt) {
  if (opt.normalize) {
    const double peak = f.empty() ? 0.0 : *std::max_element(f.begin(), f.end());
    if (peak > 0.0)
      for (double& v : f) v /= peak;
  }
  for (double& v : f) v = opt.clip_mode == FisherClipMode::upper ? std::min(v, opt.clip) : std::max(v, opt.clip);
}

/// Runs `sample_episodes` full episodes on `variant` under the current policy
/// (no learning) and returns the conditioned Fisher diagonal with an anchor
/// copy of `params`. Uses only streams derived from `seed`.
inline ConsolidationTerm estimate_fisher(const ParamVector& params, const GridSpec& spec, const MapVariant& variant,
                                         int sample_episodes, std::uint64_t seed, const FisherOptions& opt,
                                         std::int64_t episode_index = -1) {
  if (sample_episodes < 1) throw ContractViolation("Fisher estimation needs at least one episode");
  EnvPool pool(spec, static_cast<std::size_t>(sample_episodes), [&](std::size_t env, std::int64_t) {
    return EnvAssignment{variant, derive_seed(seed, {stream::env, env}), derive_seed(seed, {stream::policy, env})};
  });
  pool.reset_all(0);
  FisherAccumulator acc(params);
  const auto steps = static_cast<std::size_t>(spec.decisions_per_episode());
  std::vector<Observation> observations(pool.size());
  std::vector<int> actions(pool.size());
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t e = 0; e < pool.size(); ++e) observations[e] = pool.slot(e).observation;
    Matrix batch = stack_observations(observations);
    Matrix logits = forward(params, batch, false).logits;
    for (std::size_t e = 0; e < pool.size(); ++e) {
      EnvSlot& slot = pool.slot(e);
      actions[e] = sample_action(logits.row(static_cast<Eigen::Index>(e)), slot.policy_rng).action;
    }
    acc.add(params, batch, actions);
    for (std::size_t e = 0; e < pool.size(); ++e) {
      EnvSlot& slot = pool.slot(e);
      advance(spec, slot.state, static_cast<Action>(actions[e]), nullptr);
      slot.observation = render_observation(spec, slot.state, slot.variant);
    }
  }
  ConsolidationTerm term;
  term.fisher.values = acc.mean();
  condition_fisher(term.fisher.values, opt);
  term.fisher.episode = episode_index;
  term.fisher.sample_size = sample_episodes;
  term.anchor.values = params.values();
  term.anchor.episode = episode_index;
  return term;
}

struct Penalty {
  double value = 0.0;
  ParamVector gradient;
};

/// (lambda/2) * sum_k F_k (theta_k - anchor_k)^2 and its gradient
/// lambda * F_k * (theta_k - anchor_k).
inline Penalty ewc_penalty_and_grads(const ParamVector& params, const FisherDiag& fisher, const Anchor& anchor,
                                     double lambda) {
  if (fisher.values.size() != params.size() || anchor.values.size() != params.size())
    throw ContractViolation("Fisher, anchor and parameters must be aligned");
  Penalty p;
  p.gradient = ParamVector::zeros_like(params);
  double sum = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double delta = params[k] - anchor.values[k];
    sum += fisher.values[k] * delta * delta;
    p.gradient[k] = lambda * fisher.values[k] * delta;
  }
  p.value = 0.5 * lambda * sum;
  return p;
}

}  // namespace crlmaze
