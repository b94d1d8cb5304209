#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "crlmaze/env.hpp"
#include "crlmaze/scenario.hpp"
#include "crlmaze/testing/oracles.hpp"

using namespace crlmaze;

namespace {

int count_objects(const GridSpec&, const EnvState& s, ObjectClass cls) {
  return static_cast<int>(std::count(s.objects.begin(), s.objects.end(), cls));
}

// Places the agent at `at` facing `h` on an otherwise empty board.
EnvState empty_state(const GridSpec& spec, Cell at, Heading h) {
  EnvState s = reset(spec, 1);
  std::fill(s.objects.begin(), s.objects.end(), ObjectClass::none);
  s.n_columns = 0;
  s.n_lanterns = 0;
  s.agent = at;
  s.heading = h;
  return s;
}

}  // namespace

TEST(GridSpec, DefaultsMatchDeskScale) {
  const GridSpec g = GridSpec::make_default();
  EXPECT_EQ(g.width, 21);
  EXPECT_EQ(g.height, 21);
  EXPECT_EQ(g.initial_columns, 15);
  EXPECT_EQ(g.initial_lanterns, 10);
  EXPECT_EQ(g.initial_columns * 2, g.initial_lanterns * 3);  // 3:2 ratio
  EXPECT_EQ(g.respawn_period, 12);
  EXPECT_EQ(g.decisions_per_episode(), 250);
  EXPECT_EQ(g.window(), 7);
  EXPECT_EQ(g.observation_size(), 8 * 7 * 7);
  EXPECT_NO_THROW(g.validate());
}

TEST(GridSpec, BorderWalledAndSpawnsFree) {
  const GridSpec g = GridSpec::make_default();
  for (int x = 0; x < g.width; ++x) {
    EXPECT_TRUE(g.is_wall({x, 0}));
    EXPECT_TRUE(g.is_wall({x, g.height - 1}));
  }
  for (int y = 0; y < g.height; ++y) {
    EXPECT_TRUE(g.is_wall({0, y}));
    EXPECT_TRUE(g.is_wall({g.width - 1, y}));
  }
  ASSERT_FALSE(g.spawn_points.empty());
  for (auto c : g.spawn_points) EXPECT_FALSE(g.is_wall(c));
}

TEST(GridSpec, RejectsTooManyObjects) {
  GridSpec g = GridSpec::make_default();
  g.initial_columns = g.free_cell_count();
  try {
    g.validate();
    FAIL() << "expected a configuration error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "initial_columns");
  }
  EXPECT_THROW(reset(g, 3), ConfigError);
}

TEST(GridSpec, RejectsTicksNotDivisibleByRepeat) {
  GridSpec g = GridSpec::make_default();
  g.episode_ticks = 1001;
  EXPECT_THROW(g.validate(), ConfigError);
}

TEST(GridSpec, RejectsUnknownLayout) {
  GridSpec g;
  g.layout = "spiral";
  EXPECT_THROW(g.build_layout(), ConfigError);
}

TEST(Reset, DeterministicPerSeed) {
  const GridSpec g = GridSpec::make_default();
  EXPECT_EQ(reset(g, 7), reset(g, 7));
  EXPECT_NE(reset(g, 7).objects, reset(g, 8).objects);
}

TEST(Reset, PlacesInitialObjects) {
  const GridSpec g = GridSpec::make_default();
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const EnvState s = reset(g, seed);
    EXPECT_EQ(count_objects(g, s, ObjectClass::column), 15);
    EXPECT_EQ(count_objects(g, s, ObjectClass::lantern), 10);
    EXPECT_EQ(s.n_columns, 15);
    EXPECT_EQ(s.n_lanterns, 10);
    EXPECT_EQ(s.tick, 0);
    EXPECT_EQ(s.object_at(g, s.agent), ObjectClass::none);
    EXPECT_NE(std::find(g.spawn_points.begin(), g.spawn_points.end(), s.agent), g.spawn_points.end());
    for (int y = 0; y < g.height; ++y)
      for (int x = 0; x < g.width; ++x)
        if (g.is_wall({x, y})) {
          EXPECT_EQ(s.object_at(g, {x, y}), ObjectClass::none);
        }
  }
}

TEST(Step, ColumnPickupGivesRewardAndShaping) {
  const GridSpec g = GridSpec::make_default();
  EnvState s = empty_state(g, {2, 2}, Heading::south);
  s.objects[g.index({2, 3})] = ObjectClass::column;
  s.n_columns = 1;
  const MapVariant v;
  const StepResult r = step(g, s, Action::move_forward, v);
  EXPECT_DOUBLE_EQ(r.reward, 100.7);
  EXPECT_EQ(s.object_at(g, {2, 3}), ObjectClass::none);
  ASSERT_FALSE(r.events.empty());
  EXPECT_EQ(r.events.front(), Event::column_pickup);
}

TEST(Step, LanternHitRemovesLantern) {
  const GridSpec g = GridSpec::make_default();
  EnvState s = empty_state(g, {2, 2}, Heading::east);
  s.objects[g.index({3, 2})] = ObjectClass::lantern;
  s.n_lanterns = 1;
  const double r = advance(g, s, Action::move_forward, nullptr);
  EXPECT_DOUBLE_EQ(r, -200.0 + 0.7);
  EXPECT_EQ(s.object_at(g, {3, 2}), ObjectClass::none);
}

TEST(Step, TurnLeftFromNorthFacesWest) {
  const GridSpec g = GridSpec::make_default();
  EnvState s = empty_state(g, {2, 2}, Heading::north);
  const StepResult r = step(g, s, Action::turn_left, MapVariant{});
  EXPECT_EQ(s.heading, Heading::west);
  EXPECT_EQ(s.agent, (Cell{2, 2}));
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_EQ(s.tick, 4);
}

TEST(Step, TurnRightRotatesOnce) {
  const GridSpec g = GridSpec::make_default();
  EnvState s = empty_state(g, {2, 2}, Heading::north);
  advance(g, s, Action::turn_right, nullptr);
  EXPECT_EQ(s.heading, Heading::east);
}

TEST(Step, ForwardMovesOneCellPerTick) {
  const GridSpec g = GridSpec::make_default();
  EnvState s = empty_state(g, {2, 2}, Heading::east);  // row y=2 has no pillars
  advance(g, s, Action::move_forward, nullptr);
  EXPECT_EQ(s.agent, (Cell{6, 2}));
}

TEST(Step, WallBumpIsFree) {
  const GridSpec g = GridSpec::make_default();
  EnvState s = empty_state(g, {1, 1}, Heading::north);
  std::vector<Event> events;
  const double r = advance(g, s, Action::move_forward, &events);
  EXPECT_DOUBLE_EQ(r, 0.7);
  EXPECT_EQ(s.agent, (Cell{1, 1}));
  EXPECT_EQ(std::count(events.begin(), events.end(), Event::wall_bump), 4);
}

TEST(Step, EpisodeEndsAfter250Decisions) {
  const GridSpec g = GridSpec::make_default();
  EnvState s = reset(g, 5);
  std::mt19937_64 rng(1);
  int decisions = 0;
  while (!s.done(g)) {
    advance(g, s, static_cast<Action>(rng() % 3), nullptr);
    ++decisions;
  }
  EXPECT_EQ(decisions, 250);
  EXPECT_EQ(s.tick, 1000);
  EXPECT_THROW(advance(g, s, Action::turn_left, nullptr), ContractViolation);
}

TEST(Step, RespawnRestoresCountsUpToCap) {
  const GridSpec g = GridSpec::make_default();
  EnvState s = empty_state(g, {2, 2}, Heading::north);
  advance(g, s, Action::turn_left, nullptr);
  advance(g, s, Action::turn_left, nullptr);
  advance(g, s, Action::turn_left, nullptr);  // tick 12
  EXPECT_EQ(s.n_columns, 1);
  EXPECT_EQ(s.n_lanterns, 1);
  EXPECT_EQ(count_objects(g, s, ObjectClass::column), 1);
}

TEST(EnvProperties, TrajectoryDeterministicAndAccounted) {
  const GridSpec g = GridSpec::make_default();
  const auto maps = build_scenario(ScenarioKind::all);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 actions_a(seed), actions_b(seed);
    EnvState a = reset(g, seed), b = reset(g, seed);
    double sum = 0.0;
    while (!a.done(g)) {
      const auto act = static_cast<Action>(actions_a() % 3);
      const StepResult ra = step(g, a, act, maps[seed % 3]);
      const StepResult rb = step(g, b, static_cast<Action>(actions_b() % 3), maps[seed % 3]);
      ASSERT_EQ(ra.observation, rb.observation);
      ASSERT_EQ(ra.reward, rb.reward);
      sum += ra.reward;
      ASSERT_LE(a.n_columns, g.initial_columns);
      ASSERT_LE(a.n_lanterns, g.initial_lanterns);
      ASSERT_EQ(count_objects(g, a, ObjectClass::column), a.n_columns);
      ASSERT_FALSE(g.is_wall(a.agent));
      double expected = act == Action::move_forward ? kForwardShaping : 0.0;
      for (Event e : ra.events)
        expected += e == Event::column_pickup ? kColumnReward : e == Event::lantern_hit ? kLanternReward : 0.0;
      ASSERT_EQ(ra.reward, expected);
    }
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.cumulative_reward, sum);
  }
}

TEST(EnvProperties, StateTrajectoryInvariantAcrossVariants) {
  const GridSpec g = GridSpec::make_default();
  for (auto kind : {ScenarioKind::light, ScenarioKind::texture, ScenarioKind::object, ScenarioKind::all}) {
    const auto maps = build_scenario(kind);
    std::vector<EnvState> finals;
    for (const auto& v : maps) {
      EnvState s = reset(g, 31);
      std::mt19937_64 rng(4);
      while (!s.done(g)) step(g, s, static_cast<Action>(rng() % 3), v);
      finals.push_back(s);
    }
    EXPECT_EQ(finals[0], finals[1]);
    EXPECT_EQ(finals[1], finals[2]);
  }
}

TEST(Render, EntriesInUnitIntervalAndPure) {
  const GridSpec g = GridSpec::make_default();
  const auto maps = build_scenario(ScenarioKind::all);
  EnvState s = reset(g, 12);
  for (const auto& v : maps) {
    const Observation a = render_observation(g, s, v);
    EXPECT_EQ(a, render_observation(g, s, v));
    EXPECT_EQ(a.data.size(), static_cast<std::size_t>(g.observation_size()));
    for (double x : a.data) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
}

TEST(Render, VisibilityMaskZeroesDistantCells) {
  const GridSpec g = GridSpec::make_default();
  const auto light = build_scenario(ScenarioKind::light);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const EnvState s = reset(g, seed);
    const Observation o = render_observation(g, s, light[2]);  // visibility 1
    for (int c = 0; c < o.channels; ++c)
      for (int row = 0; row < o.window; ++row)
        for (int col = 0; col < o.window; ++col)
          if (std::max(std::abs(row - 3), std::abs(col - 3)) >= 2) {
            ASSERT_EQ(o.at(c, row, col), 0.0);
          }
  }
}

TEST(Render, EgocentricRotation) {
  const GridSpec g = GridSpec::make_default();
  EnvState s = empty_state(g, {2, 2}, Heading::north);
  s.objects[g.index({2, 1})] = ObjectClass::column;  // one cell north
  const MapVariant v;
  Observation o = render_observation(g, s, v);
  EXPECT_EQ(o.at(kFirstSlotChannel + v.column_slot, 2, 3), 1.0);  // straight ahead
  s.heading = Heading::east;                                       // column now on the left
  o = render_observation(g, s, v);
  EXPECT_EQ(o.at(kFirstSlotChannel + v.column_slot, 3, 2), 1.0);
  EXPECT_EQ(o.at(kLightChannel, 3, 3), 1.0);
}

TEST(Render, IntensityScalesEveryChannel) {
  const GridSpec g = GridSpec::make_default();
  EnvState s = reset(g, 3);
  MapVariant bright, dim;
  dim.light_intensity = 0.5;
  const Observation a = render_observation(g, s, bright), b = render_observation(g, s, dim);
  for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_DOUBLE_EQ(b.data[i], 0.5 * a.data[i]);
}

TEST(Render, TextureVariantsDifferOnlyOnWallChannel) {
  const auto r = crlmaze::testing::oracle_texture_channel_isolation();
  EXPECT_TRUE(r.passed) << r.detail;
}
