#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "crlmaze/errors.hpp"
#include "crlmaze/scenario.hpp"

namespace crlmaze {

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

enum class Heading : std::uint8_t { north, east, south, west };
enum class Action : std::uint8_t { turn_left, turn_right, move_forward };
enum class ObjectClass : std::uint8_t { none, column, lantern };
enum class Event : std::uint8_t { column_pickup, lantern_hit, wall_bump };

inline constexpr int kNumActions = 3;
inline constexpr double kColumnReward = 100.0;
inline constexpr double kLanternReward = -200.0;
inline constexpr double kForwardShaping = 0.7;

/// Observation channels: wall texture, six appearance slots, light level.
inline constexpr int kObservationChannels = 2 + kAppearanceSlots;
inline constexpr int kWallChannel = 0;
inline constexpr int kFirstSlotChannel = 1;
inline constexpr int kLightChannel = kFirstSlotChannel + kAppearanceSlots;

inline Cell offset(Heading h) {
  switch (h) {
    case Heading::north: return {0, -1};
    case Heading::east: return {1, 0};
    case Heading::south: return {0, 1};
    case Heading::west: return {-1, 0};
  }
  return {0, 0};
}

inline Heading turned_left(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }
inline Heading turned_right(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }

/// Static maze description shared by every environment of a run.
struct GridSpec {
  int width = 21;
  int height = 21;
  std::string layout = "pillars";
  std::vector<std::uint8_t> wall_mask;  // row-major, 1 = wall
  std::vector<Cell> spawn_points;
  int initial_columns = 15;
  int initial_lanterns = 10;
  int respawn_period = 12;
  int episode_ticks = 1000;
  int action_repeat = 4;
  int view_radius = 3;

  /// Regenerates wall_mask and spawn_points from (width, height, layout).
  /// Layouts: "pillars" (border plus a pillar every 4 cells), "open" (border only).
  void build_layout() {
    if (width < 5 || height < 5) throw ConfigError("grid must be at least 5x5", "width");
    wall_mask.assign(static_cast<std::size_t>(width * height), 0);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        bool border = x == 0 || y == 0 || x == width - 1 || y == height - 1;
        bool pillar = layout == "pillars" && x % 4 == 0 && y % 4 == 0;
        if (border || pillar) wall_mask[index({x, y})] = 1;
      }
    if (layout != "pillars" && layout != "open")
      throw ConfigError("unknown grid layout '" + layout + "'", "layout");
    spawn_points.clear();
    for (int y : {2, height / 2, height - 3})
      for (int x : {2, width / 2, width - 3}) {
        Cell c{x, y};
        if (!is_wall(c) && std::find(spawn_points.begin(), spawn_points.end(), c) == spawn_points.end())
          spawn_points.push_back(c);
      }
  }

  static GridSpec make_default() {
    GridSpec spec;
    spec.build_layout();
    return spec;
  }

  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y * width + c.x); }
  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  bool is_wall(Cell c) const { return !in_bounds(c) || wall_mask[index(c)] != 0; }

  int free_cell_count() const {
    return static_cast<int>(std::count(wall_mask.begin(), wall_mask.end(), std::uint8_t{0}));
  }

  int decisions_per_episode() const { return episode_ticks / action_repeat; }
  int window() const { return 2 * view_radius + 1; }
  int observation_size() const { return kObservationChannels * window() * window(); }

  void validate() const {
    if (wall_mask.size() != static_cast<std::size_t>(width * height))
      throw ConfigError("wall mask does not match grid dimensions", "layout");
    for (int x = 0; x < width; ++x)
      if (!is_wall({x, 0}) || !is_wall({x, height - 1}))
        throw ConfigError("grid border must be walled", "layout");
    for (int y = 0; y < height; ++y)
      if (!is_wall({0, y}) || !is_wall({width - 1, y}))
        throw ConfigError("grid border must be walled", "layout");
    if (spawn_points.empty()) throw ConfigError("grid has no spawn points", "layout");
    for (auto c : spawn_points)
      if (is_wall(c)) throw ConfigError("spawn point on a wall cell", "layout");
    if (initial_columns < 0 || initial_lanterns < 0)
      throw ConfigError("object counts must be non-negative", "initial_columns");
    if (initial_columns + initial_lanterns + 1 > free_cell_count())
      throw ConfigError("not enough free cells for the initial objects and the agent",
                        "initial_columns");
    if (respawn_period <= 0) throw ConfigError("respawn_period must be positive", "respawn_period");
    if (action_repeat <= 0) throw ConfigError("action_repeat must be positive", "action_repeat");
    if (episode_ticks <= 0 || episode_ticks % action_repeat != 0)
      throw ConfigError("episode_ticks must be a positive multiple of action_repeat",
                        "episode_ticks");
    if (view_radius < 0) throw ConfigError("view_radius must be non-negative", "view_radius");
  }

  bool operator==(const GridSpec&) const = default;
};

/// Egocentric observation, stored channel-major: (channel, row, col). Row 0
/// is the farthest row ahead of the agent; the agent sits at the centre.
struct Observation {
  int channels = kObservationChannels;
  int window = 0;
  std::vector<double> data;

  double at(int channel, int row, int col) const {
    return data[static_cast<std::size_t>((channel * window + row) * window + col)];
  }
  double& at(int channel, int row, int col) {
    return data[static_cast<std::size_t>((channel * window + row) * window + col)];
  }
  bool operator==(const Observation&) const = default;
};

struct EnvState {
  Cell agent;
  Heading heading = Heading::north;
  std::vector<ObjectClass> objects;  // row-major, one entry per cell
  int n_columns = 0;
  int n_lanterns = 0;
  int tick = 0;
  double cumulative_reward = 0.0;
  std::mt19937_64 rng;

  ObjectClass object_at(const GridSpec& spec, Cell c) const { return objects[spec.index(c)]; }
  bool done(const GridSpec& spec) const { return tick >= spec.episode_ticks; }
  bool operator==(const EnvState&) const = default;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  std::vector<Event> events;
};

namespace detail {

inline bool is_free(const GridSpec& spec, const EnvState& s, Cell c) {
  return !spec.is_wall(c) && s.objects[spec.index(c)] == ObjectClass::none && !(c == s.agent);
}

/// Uniform choice among free cells; false when none is left.
inline bool place_random(const GridSpec& spec, EnvState& s, ObjectClass cls) {
  std::vector<Cell> candidates;
  candidates.reserve(static_cast<std::size_t>(spec.width * spec.height));
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x)
      if (is_free(spec, s, {x, y})) candidates.push_back({x, y});
  if (candidates.empty()) return false;
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  Cell c = candidates[pick(s.rng)];
  s.objects[spec.index(c)] = cls;
  (cls == ObjectClass::column ? s.n_columns : s.n_lanterns) += 1;
  return true;
}

}  // namespace detail

/// Renders the egocentric window. Walls (and out-of-grid cells) carry the
/// variant's texture value, objects light up their class's appearance slot,
/// the light channel carries the intensity, and everything is scaled by the
/// intensity. Cells beyond the visibility radius (Chebyshev) stay zero.
inline Observation render_observation(const GridSpec& spec, const EnvState& state,
                                      const MapVariant& variant) {
  const int r = spec.view_radius;
  Observation obs;
  obs.window = spec.window();
  obs.data.assign(static_cast<std::size_t>(spec.observation_size()), 0.0);
  const Cell fwd = offset(state.heading);
  const Cell right = offset(turned_right(state.heading));
  const double light = variant.light_intensity;
  for (int row = 0; row < obs.window; ++row) {
    for (int col = 0; col < obs.window; ++col) {
      const int ahead = r - row;
      const int side = col - r;
      if (std::max(std::abs(ahead), std::abs(side)) > variant.visibility_radius) continue;
      const Cell c{state.agent.x + ahead * fwd.x + side * right.x,
                   state.agent.y + ahead * fwd.y + side * right.y};
      obs.at(kLightChannel, row, col) = light;
      if (spec.is_wall(c)) {
        obs.at(kWallChannel, row, col) = variant.wall_texture * light;
        continue;
      }
      switch (state.object_at(spec, c)) {
        case ObjectClass::column:
          obs.at(kFirstSlotChannel + variant.column_slot, row, col) = light;
          break;
        case ObjectClass::lantern:
          obs.at(kFirstSlotChannel + variant.lantern_slot, row, col) = light;
          break;
        case ObjectClass::none: break;
      }
    }
  }
  return obs;
}

/// Starts an episode: agent on a seeded spawn point with a random heading,
/// initial objects scattered uniformly over the remaining free cells.
inline EnvState reset(const GridSpec& spec, std::uint64_t seed) {
  spec.validate();
  EnvState s;
  s.rng.seed(seed);
  s.objects.assign(static_cast<std::size_t>(spec.width * spec.height), ObjectClass::none);
  std::uniform_int_distribution<std::size_t> spawn(0, spec.spawn_points.size() - 1);
  s.agent = spec.spawn_points[spawn(s.rng)];
  std::uniform_int_distribution<int> heading(0, 3);
  s.heading = static_cast<Heading>(heading(s.rng));
  for (int i = 0; i < spec.initial_columns; ++i) detail::place_random(spec, s, ObjectClass::column);
  for (int i = 0; i < spec.initial_lanterns; ++i) detail::place_random(spec, s, ObjectClass::lantern);
  return s;
}

/// Advances one decision: the action is held for action_repeat ticks (turns
/// only rotate on the first tick). Objects the agent enters are consumed.
/// Every respawn_period ticks one column and one lantern reappear if their
/// class is below its initial count. Does not render; see step().
inline double advance(const GridSpec& spec, EnvState& s, Action action, std::vector<Event>* events) {
  if (s.done(spec)) throw ContractViolation("step called on a finished episode");
  double reward = 0.0;
  if (action == Action::move_forward) reward += kForwardShaping;
  for (int t = 0; t < spec.action_repeat; ++t) {
    if (action == Action::turn_left && t == 0) s.heading = turned_left(s.heading);
    if (action == Action::turn_right && t == 0) s.heading = turned_right(s.heading);
    if (action == Action::move_forward) {
      const Cell d = offset(s.heading);
      const Cell next{s.agent.x + d.x, s.agent.y + d.y};
      if (spec.is_wall(next)) {
        if (events) events->push_back(Event::wall_bump);
      } else {
        s.agent = next;
        auto& slot = s.objects[spec.index(next)];
        if (slot == ObjectClass::column) {
          reward += kColumnReward;
          s.n_columns -= 1;
          if (events) events->push_back(Event::column_pickup);
        } else if (slot == ObjectClass::lantern) {
          reward += kLanternReward;
          s.n_lanterns -= 1;
          if (events) events->push_back(Event::lantern_hit);
        }
        slot = ObjectClass::none;
      }
    }
    s.tick += 1;
    if (s.tick % spec.respawn_period == 0) {
      if (s.n_columns < spec.initial_columns) detail::place_random(spec, s, ObjectClass::column);
      if (s.n_lanterns < spec.initial_lanterns) detail::place_random(spec, s, ObjectClass::lantern);
    }
  }
  s.cumulative_reward += reward;
  return reward;
}

inline StepResult step(const GridSpec& spec, EnvState& state, Action action,
                       const MapVariant& variant) {
  StepResult result;
  result.reward = advance(spec, state, action, &result.events);
  result.done = state.done(spec);
  result.observation = render_observation(spec, state, variant);
  return result;
}

}  // namespace crlmaze
