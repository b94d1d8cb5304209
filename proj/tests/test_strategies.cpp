#include <gtest/gtest.h>

#include <limits>
#include <set>

#include "crlmaze/strategies.hpp"
#include "crlmaze/testing/oracles.hpp"

using namespace crlmaze;

namespace {

void expect_same_trajectory(const TrainedRun& a, const TrainedRun& b) {
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].params_fingerprint, b.log[i].params_fingerprint) << "episode " << i;
    EXPECT_EQ(a.log[i].mean_reward, b.log[i].mean_reward) << "episode " << i;
  }
  EXPECT_EQ(a.final_params, b.final_params);
  ASSERT_EQ(a.map_checkpoints.size(), b.map_checkpoints.size());
  for (std::size_t i = 0; i < a.map_checkpoints.size(); ++i) EXPECT_EQ(a.map_checkpoints[i], b.map_checkpoints[i]);
}

}  // namespace

TEST(StrategyNames, RoundTrip) {
  for (auto k : kAllStrategies) EXPECT_EQ(parse_strategy(to_string(k)), k);
  EXPECT_EQ(to_string(StrategyKind::static_), "static");
  EXPECT_FALSE(parse_strategy("ewc").has_value());
  EXPECT_FALSE(is_sequential(StrategyKind::multienv));
  EXPECT_TRUE(is_sequential(StrategyKind::unsup));
}

TEST(RunStrategy, NaiveEqualsSupWithZeroLambda) {
  Hyperparams h = crlmaze::testing::tiny_hyper(3);
  h.lambda = 0.0;
  const GridSpec g = crlmaze::testing::tiny_grid();
  const auto naive = run_strategy(StrategyKind::naive, ScenarioKind::object, h, g, 11);
  const auto sup = run_strategy(StrategyKind::sup, ScenarioKind::object, h, g, 11);
  expect_same_trajectory(naive, sup);
  EXPECT_EQ(sup.terms.size(), 2u);
}

TEST(RunStrategy, SupAccumulatesOneTermPerCompletedMap) {
  Hyperparams h = crlmaze::testing::tiny_hyper(3);
  h.lambda = 50.0;
  const auto run = run_strategy(StrategyKind::sup, ScenarioKind::object, h, crlmaze::testing::tiny_grid(), 2);
  ASSERT_EQ(run.terms.size(), 2u);
  EXPECT_EQ(run.terms[0].anchor.episode, 2);
  EXPECT_EQ(run.terms[1].anchor.episode, 5);
  EXPECT_EQ(run.terms[0].anchor.values, run.map_checkpoints[0].values());
  EXPECT_EQ(run.terms[1].anchor.values, run.map_checkpoints[1].values());
  for (const auto& r : run.log) {
    EXPECT_EQ(r.lambda, r.map == 1 ? 0.0 : 50.0);
    EXPECT_EQ(r.fisher_refreshed, r.episode == 2 || r.episode == 5);
    if (r.map > 1) {
      EXPECT_GT(r.penalty, 0.0);
    }
  }
}

TEST(RunStrategy, StaticAndUnsupKeepOnlyLatestTerm) {
  Hyperparams h = crlmaze::testing::tiny_hyper(3);
  h.lambda = 10.0;
  h.alpha = 10.0;
  h.eta = 0.0;
  h.fisher_freq = 2;
  const GridSpec g = crlmaze::testing::tiny_grid();
  for (auto kind : {StrategyKind::static_, StrategyKind::unsup}) {
    Trainer t(kind, ScenarioKind::object, h, g, build_scenario(ScenarioKind::object), 4);
    TrainerHooks hooks;
    std::vector<std::int64_t> refreshes;
    hooks.on_episode = [&](const LogRow& r) {
      EXPECT_LE(t.state().terms.size(), 1u);
      if (r.fisher_refreshed) refreshes.push_back(r.episode);
    };
    t.run(hooks);
    EXPECT_EQ(refreshes, (std::vector<std::int64_t>{1, 3, 5, 7}));
    ASSERT_EQ(t.state().terms.size(), 1u);
    EXPECT_EQ(t.state().terms[0].anchor.episode, 7);
  }
}

TEST(RunStrategy, StaticAppliesLambdaAfterFirstRefresh) {
  Hyperparams h = crlmaze::testing::tiny_hyper(2);
  h.lambda = 3.0;
  h.fisher_freq = 2;
  const auto run = run_strategy(StrategyKind::static_, ScenarioKind::object, h, crlmaze::testing::tiny_grid(), 5);
  for (const auto& r : run.log) EXPECT_EQ(r.lambda, r.episode < 2 ? 0.0 : 3.0);
}

TEST(RunStrategy, SequentialTrainingOnlySeesScheduledMap) {
  Hyperparams h = crlmaze::testing::tiny_hyper(2);
  h.lambda = 1.0;
  const GridSpec g = crlmaze::testing::tiny_grid();
  const auto maps = build_scenario(ScenarioKind::all);
  Trainer t(StrategyKind::sup, ScenarioKind::all, h, g, maps, 6);
  int starts = 0;
  TrainerHooks hooks;
  hooks.on_env_start = [&](std::size_t, std::int64_t episode, const MapVariant& v) {
    EXPECT_EQ(v.map_index, active_map(t.schedule(), episode));
    ++starts;
  };
  t.run(hooks);
  EXPECT_EQ(starts, 6 * h.n_envs);
}

TEST(RunStrategy, MultienvSamplesAllMapsWithOneCheckpoint) {
  Hyperparams h = crlmaze::testing::tiny_hyper(6);
  h.n_envs = 4;
  const GridSpec g = crlmaze::testing::tiny_grid();
  Trainer t(StrategyKind::multienv, ScenarioKind::object, h, g, build_scenario(ScenarioKind::object), 7);
  std::set<int> seen;
  TrainerHooks hooks;
  int map_ends = 0;
  hooks.on_env_start = [&](std::size_t, std::int64_t, const MapVariant& v) { seen.insert(v.map_index); };
  hooks.on_map_end = [&](int map, const TrainingState&) {
    EXPECT_EQ(map, 0);
    ++map_ends;
  };
  t.run(hooks);
  EXPECT_EQ(t.state().next_episode, 6);
  EXPECT_EQ(seen, (std::set<int>{1, 2, 3}));
  EXPECT_EQ(map_ends, 1);
  EXPECT_TRUE(t.state().terms.empty());
  const auto run = run_strategy(StrategyKind::multienv, ScenarioKind::object, h, g, 7);
  EXPECT_EQ(run.map_checkpoints.size(), 1u);
  EXPECT_EQ(run.log.size(), 6u);
}

TEST(RunStrategy, MapCheckpointsPrecedeFisherEstimation) {
  Hyperparams h = crlmaze::testing::tiny_hyper(2);
  h.lambda = 5.0;
  const auto run = run_strategy(StrategyKind::sup, ScenarioKind::object, h, crlmaze::testing::tiny_grid(), 8);
  ASSERT_EQ(run.map_checkpoints.size(), 3u);
  // Fisher sampling does not touch parameters: the checkpoint after map 1
  // equals the parameters logged at the boundary episode and the anchor.
  EXPECT_EQ(run.map_checkpoints[0].fingerprint(), run.log[1].params_fingerprint);
  EXPECT_EQ(run.map_checkpoints[2], run.final_params);
}

TEST(RunStrategy, UnsupWithNegativeInfiniteEtaEqualsNaive) {
  const auto r = crlmaze::testing::oracle_unsup_never_triggers();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(RunStrategy, BoundaryTriggeredUnsupEqualsSingleAnchorSup) {
  Hyperparams h = crlmaze::testing::tiny_hyper(3);
  h.lambda = 2e3;
  h.alpha = 2e3;
  h.eta = 0.0;
  h.fisher_freq = h.train_episodes;
  const GridSpec g = crlmaze::testing::tiny_grid();
  StrategyOptions sup_opt;
  sup_opt.sup_keep_latest = true;
  StrategyOptions unsup_opt;
  unsup_opt.trigger = TriggerMode::map_boundary;
  const auto sup = run_strategy(StrategyKind::sup, ScenarioKind::object, h, g, 9, sup_opt);
  const auto unsup = run_strategy(StrategyKind::unsup, ScenarioKind::object, h, g, 9, unsup_opt);
  expect_same_trajectory(sup, unsup);
  EXPECT_EQ(sup.terms, unsup.terms);
  EXPECT_EQ(sup.terms.size(), 1u);
}

TEST(RunStrategy, DeterministicGivenSeed) {
  Hyperparams h = crlmaze::testing::tiny_hyper(2);
  h.alpha = 10.0;
  h.eta = -5.0;
  h.fisher_freq = 2;
  const GridSpec g = crlmaze::testing::tiny_grid();
  const auto a = run_strategy(StrategyKind::unsup, ScenarioKind::light, h, g, 3);
  const auto b = run_strategy(StrategyKind::unsup, ScenarioKind::light, h, g, 3);
  expect_same_trajectory(a, b);
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i], b.log[i]);
  const auto c = run_strategy(StrategyKind::unsup, ScenarioKind::light, h, g, 4);
  EXPECT_NE(a.final_params, c.final_params);
}

TEST(RunStrategy, InterruptedTrainerContinuesIdentically) {
  Hyperparams h = crlmaze::testing::tiny_hyper(2);
  h.alpha = 10.0;
  h.fisher_freq = 2;
  const GridSpec g = crlmaze::testing::tiny_grid();
  const auto maps = build_scenario(ScenarioKind::texture);
  Trainer whole(StrategyKind::unsup, ScenarioKind::texture, h, g, maps, 5);
  whole.run();
  Trainer first(StrategyKind::unsup, ScenarioKind::texture, h, g, maps, 5);
  first.run({}, 3);
  EXPECT_EQ(first.state().next_episode, 3);
  Trainer second(first.state(), h, g, maps);
  second.run();
  EXPECT_EQ(second.state(), whole.state());
}

TEST(RunStrategy, ConfigErrorsAndNumericalContext) {
  Hyperparams h = crlmaze::testing::tiny_hyper(2);
  const GridSpec g = crlmaze::testing::tiny_grid();
  EXPECT_THROW(run_strategy(StrategyKind::static_, ScenarioKind::object, h, g, 1), ConfigError);
  h.learning_rate = 1e300;
  h.rms_epsilon = 1e-300;
  try {
    run_strategy(StrategyKind::naive, ScenarioKind::object, h, g, 1);
    ADD_FAILURE() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("object/naive/seed 1"), std::string::npos) << e.what();
  }
}
