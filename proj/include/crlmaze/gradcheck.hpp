#pragma once

#include <random>
#include <string>
#include <vector>

#include "crlmaze/a2c.hpp"
#include "crlmaze/consolidation.hpp"
#include "crlmaze/nn.hpp"
#include "crlmaze/scenario.hpp"
#include "crlmaze/seeding.hpp"

namespace crlmaze {

struct GradCheckCase {
  std::string name;
  std::size_t n_params = 0;
  double max_relative_error = 0.0;
};

namespace detail {

inline GridSpec gradcheck_grid() {
  GridSpec g;
  g.width = 7;
  g.height = 7;
  g.initial_columns = 5;
  g.initial_lanterns = 3;
  g.episode_ticks = 40;
  g.view_radius = 1;
  g.build_layout();
  return g;
}

/// A real rollout on a tiny grid, so observations, actions and returns have
/// the structure the trainer sees.
inline RolloutBatch gradcheck_batch(const ParamVector& params, const GridSpec& spec, std::uint64_t seed) {
  const MapVariant v = build_scenario(ScenarioKind::all)[1];
  EnvPool pool(spec, 3, [&](std::size_t env, std::int64_t) {
    return EnvAssignment{v, derive_seed(seed, {stream::env, env}), derive_seed(seed, {stream::policy, env})};
  });
  pool.reset_all(0);
  return collect_rollout(pool, params, 6);
}

inline ConsolidationTerm random_term(const ParamVector& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0), shift(-0.5, 0.5);
  ConsolidationTerm t;
  t.fisher.values.resize(params.size());
  t.anchor.values.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    t.fisher.values[i] = u(rng);
    t.anchor.values[i] = params[i] + shift(rng);
  }
  return t;
}

}  // namespace detail

/// Central-difference checks of the A2C loss (with and without entropy), the
/// EWC penalty, and their sum, on networks of at most 1000 parameters.
inline std::vector<GradCheckCase> run_gradient_checks(int seeds = 3) {
  const GridSpec spec = detail::gradcheck_grid();
  std::vector<GradCheckCase> cases;
  for (int s = 1; s <= seeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    NetworkConfig net{spec.observation_size(), {8, 6}, 3};
    ParamVector params = init_params(net, derive_seed(seed, {stream::init}));
    const RolloutBatch batch = detail::gradcheck_batch(params, spec, seed);
    const ConsolidationTerm term = detail::random_term(params, seed + 100);
    const double lambda = 3.0;

    for (double entropy : {0.0, 0.05}) {
      LossCoefficients coef{0.95, 0.5, entropy, 0.01};
      const auto targets = compute_returns(batch, coef.gamma, coef.reward_scale);
      const LossResult res = a2c_objective(batch, params, targets, coef, true);
      auto loss = [&](const ParamVector& q) { return a2c_objective(batch, q, targets, coef, false).loss; };
      cases.push_back({std::string("a2c_loss") + (entropy > 0 ? "_entropy" : "") + "_seed" + std::to_string(s),
                       params.size(), check_gradient(loss, params, res.gradient).max_relative_error});
    }
    {
      const Penalty pen = ewc_penalty_and_grads(params, term.fisher, term.anchor, lambda);
      auto loss = [&](const ParamVector& q) { return ewc_penalty_and_grads(q, term.fisher, term.anchor, lambda).value; };
      cases.push_back({"ewc_penalty_seed" + std::to_string(s), params.size(),
                       check_gradient(loss, params, pen.gradient).max_relative_error});
    }
    {
      LossCoefficients coef{0.95, 0.5, 0.05, 0.01};
      const auto targets = compute_returns(batch, coef.gamma, coef.reward_scale);
      LossResult res = a2c_objective(batch, params, targets, coef, true);
      res.gradient.as_eigen() += ewc_penalty_and_grads(params, term.fisher, term.anchor, lambda).gradient.as_eigen();
      auto loss = [&](const ParamVector& q) {
        return a2c_objective(batch, q, targets, coef, false).loss +
               ewc_penalty_and_grads(q, term.fisher, term.anchor, lambda).value;
      };
      cases.push_back({"combined_loss_seed" + std::to_string(s), params.size(),
                       check_gradient(loss, params, res.gradient).max_relative_error});
    }
  }
  return cases;
}

}  // namespace crlmaze
