#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "crlmaze/errors.hpp"

namespace crlmaze {

enum class ScenarioKind : std::uint8_t { light, texture, object, all };

inline constexpr std::size_t kMapsPerScenario = 3;
inline constexpr int kAppearanceSlots = 6;

inline std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::light: return "light";
    case ScenarioKind::texture: return "texture";
    case ScenarioKind::object: return "object";
    case ScenarioKind::all: return "all";
  }
  return "?";
}

inline std::optional<ScenarioKind> parse_scenario(std::string_view name) {
  for (auto k : {ScenarioKind::light, ScenarioKind::texture, ScenarioKind::object, ScenarioKind::all})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

/// One stationary environmental condition. The simulator dynamics never read
/// a variant; only observation rendering does.
struct MapVariant {
  ScenarioKind kind = ScenarioKind::light;
  int map_index = 1;  // 1-based, M1..M3
  double wall_texture = 0.25;
  int column_slot = 0;
  int lantern_slot = 1;
  int visibility_radius = 3;
  double light_intensity = 1.0;

  bool operator==(const MapVariant&) const = default;

  void validate() const {
    if (map_index < 1 || map_index > static_cast<int>(kMapsPerScenario))
      throw ConfigError("variant map index must be in 1..3", "map_index");
    if (column_slot == lantern_slot)
      throw ConfigError("column and lantern appearance slots must differ", "column_slot");
    if (column_slot < 0 || column_slot >= kAppearanceSlots)
      throw ConfigError("column appearance slot out of range", "column_slot");
    if (lantern_slot < 0 || lantern_slot >= kAppearanceSlots)
      throw ConfigError("lantern appearance slot out of range", "lantern_slot");
    if (!(wall_texture >= 0.0 && wall_texture <= 1.0))
      throw ConfigError("wall texture must lie in [0, 1]", "wall_texture");
    if (!(light_intensity >= 0.0 && light_intensity <= 1.0))
      throw ConfigError("light intensity must lie in [0, 1]", "light_intensity");
    if (visibility_radius < 0)
      throw ConfigError("visibility radius must be non-negative", "visibility_radius");
  }
};

using ScenarioMaps = std::array<MapVariant, kMapsPerScenario>;

namespace detail {

// Per-map factor tables. Index 0 doubles as the neutral setting for the
// factors a scenario keeps fixed.
inline constexpr std::array<int, 3> kVisibility{3, 2, 1};
inline constexpr std::array<double, 3> kIntensity{1.0, 0.5, 0.15};
inline constexpr std::array<double, 3> kTexture{0.25, 0.6, 0.95};

inline void apply_light(MapVariant& v, std::size_t i) {
  v.visibility_radius = kVisibility[i];
  v.light_intensity = kIntensity[i];
}
inline void apply_texture(MapVariant& v, std::size_t i) { v.wall_texture = kTexture[i]; }

// M2 gets fresh appearances; M3's columns reuse M1's lantern appearance.
inline constexpr std::array<std::array<int, 2>, 3> kObjectSlots{{{0, 1}, {2, 3}, {1, 4}}};

inline void apply_object(MapVariant& v, std::size_t i) {
  v.column_slot = kObjectSlots[i][0];
  v.lantern_slot = kObjectSlots[i][1];
}

}  // namespace detail

/// Channel-wise composition: light factors from `light`, wall texture from
/// `texture`, appearance slots from `object`.
inline MapVariant compose(const MapVariant& light, const MapVariant& texture,
                          const MapVariant& object) {
  MapVariant v;
  v.kind = ScenarioKind::all;
  v.map_index = light.map_index;
  v.visibility_radius = light.visibility_radius;
  v.light_intensity = light.light_intensity;
  v.wall_texture = texture.wall_texture;
  v.column_slot = object.column_slot;
  v.lantern_slot = object.lantern_slot;
  return v;
}

/// The three maps M1, M2, M3 of a scenario. Deterministic.
inline ScenarioMaps build_scenario(ScenarioKind kind) {
  ScenarioMaps maps{};
  for (std::size_t i = 0; i < kMapsPerScenario; ++i) {
    MapVariant v;
    v.kind = kind;
    v.map_index = static_cast<int>(i + 1);
    detail::apply_light(v, 0);
    detail::apply_texture(v, 0);
    detail::apply_object(v, 0);
    switch (kind) {
      case ScenarioKind::light: detail::apply_light(v, i); break;
      case ScenarioKind::texture: detail::apply_texture(v, i); break;
      case ScenarioKind::object: detail::apply_object(v, i); break;
      case ScenarioKind::all:
        detail::apply_light(v, i);
        detail::apply_texture(v, i);
        detail::apply_object(v, i);
        break;
    }
    maps[i] = v;
  }
  return maps;
}

/// Sequential schedule: M1 for the first `episodes_per_map` training
/// episodes, then M2, then M3.
struct Schedule {
  std::int64_t episodes_per_map = 0;
  std::int64_t n_maps = static_cast<std::int64_t>(kMapsPerScenario);

  std::int64_t total_episodes() const { return episodes_per_map * n_maps; }
};

/// 1-based index of the map active at `episode_index`.
inline int active_map(const Schedule& schedule, std::int64_t episode_index) {
  if (schedule.episodes_per_map <= 0)
    throw ContractViolation("schedule needs a positive episodes_per_map");
  if (episode_index < 0 || episode_index >= schedule.total_episodes())
    throw ContractViolation("episode index outside the training schedule");
  return static_cast<int>(episode_index / schedule.episodes_per_map) + 1;
}

}  // namespace crlmaze
