#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "crlmaze/a2c.hpp"
#include "crlmaze/env.hpp"
#include "crlmaze/errors.hpp"
#include "crlmaze/scenario.hpp"
#include "crlmaze/strategies.hpp"

namespace crlmaze {

// INI layout:
//   [experiment]           scenarios, strategies, seeds, output_dir, parallelism, ...
//   [grid]                 GridSpec overrides
//   [defaults]             Hyperparams shared by every cell
//   [<scenario>]           overrides for one scenario
//   [<scenario>.<strategy>] overrides for one cell
// Later layers win. Comments start with ';'.

/// Parsed experiment description.
struct ExperimentConfig {
  std::vector<ScenarioKind> scenarios;
  std::vector<StrategyKind> strategies;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "results";
  int parallelism = 1;
  int rollout_threads = 1;
  int checkpoint_every = 25;
  TriggerMode unsup_trigger = TriggerMode::drift;
  bool sup_keep_latest = false;
  GridSpec grid = GridSpec::make_default();
  std::map<std::pair<ScenarioKind, StrategyKind>, Hyperparams> cells;

  const Hyperparams& hyper(ScenarioKind scenario, StrategyKind strategy) const {
    auto it = cells.find({scenario, strategy});
    if (it == cells.end())
      throw ConfigError("no hyperparameters for " + std::string(to_string(scenario)) + "." +
                        std::string(to_string(strategy)));
    return it->second;
  }

  StrategyOptions options() const {
    StrategyOptions o;
    o.trigger = unsup_trigger;
    o.sup_keep_latest = sup_keep_latest;
    o.rollout_threads = static_cast<std::size_t>(rollout_threads);
    return o;
  }

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline double parse_double(const std::string& key, std::string_view text) {
  const std::string s = trim(text);
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (!s.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (s.empty() || ec != std::errc() || ptr != end || std::isnan(v))
    throw ConfigError("'" + s + "' is not a number", key);
  return v;
}

template <typename Int>
Int parse_integer(const std::string& key, std::string_view text) {
  const std::string s = trim(text);
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("'" + s + "' is not an integer", key);
  return v;
}

inline bool parse_bool(const std::string& key, std::string_view text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("'" + s + "' is not a boolean", key);
}

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename Int>
std::string join_ints(const std::vector<Int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? " " : "") + std::to_string(xs[i]);
  return out;
}

struct Field {
  std::function<void(Hyperparams&, const std::string&)> set;
  std::function<std::string(const Hyperparams&)> get;
};

template <typename T>
Field number_field(T Hyperparams::*member, const std::string& key) {
  Field f;
  if constexpr (std::is_same_v<T, double>) {
    f.set = [member, key](Hyperparams& h, const std::string& v) { h.*member = parse_double(key, v); };
    f.get = [member](const Hyperparams& h) { return format_double(h.*member); };
  } else if constexpr (std::is_same_v<T, bool>) {
    f.set = [member, key](Hyperparams& h, const std::string& v) { h.*member = parse_bool(key, v); };
    f.get = [member](const Hyperparams& h) { return std::string(h.*member ? "true" : "false"); };
  } else {
    f.set = [member, key](Hyperparams& h, const std::string& v) { h.*member = parse_integer<T>(key, v); };
    f.get = [member](const Hyperparams& h) { return std::to_string(h.*member); };
  }
  return f;
}

/// Hyperparameter keys in serialization order.
inline const std::vector<std::pair<std::string, Field>>& hyper_fields() {
  static const std::vector<std::pair<std::string, Field>> fields = [] {
    std::vector<std::pair<std::string, Field>> v;
    auto add = [&v](const std::string& key, Field f) { v.emplace_back(key, std::move(f)); };
    add("learning_rate", number_field(&Hyperparams::learning_rate, "learning_rate"));
    add("gamma", number_field(&Hyperparams::gamma, "gamma"));
    add("n_envs", number_field(&Hyperparams::n_envs, "n_envs"));
    add("n_steps", number_field(&Hyperparams::n_steps, "n_steps"));
    add("value_coef", number_field(&Hyperparams::value_coef, "value_coef"));
    add("entropy_coef", number_field(&Hyperparams::entropy_coef, "entropy_coef"));
    add("rms_decay", number_field(&Hyperparams::rms_decay, "rms_decay"));
    add("rms_epsilon", number_field(&Hyperparams::rms_epsilon, "rms_epsilon"));
    add("reward_scale", number_field(&Hyperparams::reward_scale, "reward_scale"));
    add("hidden_sizes", Field{[](Hyperparams& h, const std::string& s) {
                                h.hidden_sizes.clear();
                                for (const auto& t : split_list(s))
                                  h.hidden_sizes.push_back(parse_integer<int>("hidden_sizes", t));
                              },
                              [](const Hyperparams& h) { return join_ints(h.hidden_sizes); }});
    add("train_episodes", number_field(&Hyperparams::train_episodes, "train_episodes"));
    add("test_episodes", number_field(&Hyperparams::test_episodes, "test_episodes"));
    add("greedy_eval", number_field(&Hyperparams::greedy_eval, "greedy_eval"));
    add("window_long", number_field(&Hyperparams::window_long, "window_long"));
    add("window_short", number_field(&Hyperparams::window_short, "window_short"));
    add("eta", number_field(&Hyperparams::eta, "eta"));
    add("alpha", number_field(&Hyperparams::alpha, "alpha"));
    add("lambda", number_field(&Hyperparams::lambda, "lambda"));
    add("fisher_freq", number_field(&Hyperparams::fisher_freq, "fisher_freq"));
    add("fisher_clip", number_field(&Hyperparams::fisher_clip, "fisher_clip"));
    add("fisher_clip_mode", Field{[](Hyperparams& h, const std::string& s) {
                                    const auto t = trim(s);
                                    if (t == "upper") h.fisher_clip_mode = FisherClipMode::upper;
                                    else if (t == "floor") h.fisher_clip_mode = FisherClipMode::floor;
                                    else throw ConfigError("fisher_clip_mode must be upper or floor", "fisher_clip_mode");
                                  },
                                  [](const Hyperparams& h) {
                                    return std::string(h.fisher_clip_mode == FisherClipMode::upper ? "upper" : "floor");
                                  }});
    add("fisher_normalize", number_field(&Hyperparams::fisher_normalize, "fisher_normalize"));
    add("fisher_sample_size", number_field(&Hyperparams::fisher_sample_size, "fisher_sample_size"));
    return v;
  }();
  return fields;
}

inline const Field* find_hyper_field(const std::string& key) {
  for (const auto& [k, f] : hyper_fields())
    if (k == key) return &f;
  return nullptr;
}

/// Keys a cell must set (in any layer) for its strategy to be meaningful.
inline std::vector<std::string> required_keys(StrategyKind kind) {
  std::vector<std::string> keys{"learning_rate", "train_episodes"};
  switch (kind) {
    case StrategyKind::sup: keys.insert(keys.end(), {"lambda"}); break;
    case StrategyKind::static_: keys.insert(keys.end(), {"lambda", "fisher_freq"}); break;
    case StrategyKind::unsup: keys.insert(keys.end(), {"eta", "alpha", "fisher_freq"}); break;
    default: break;
  }
  return keys;
}

using Section = std::vector<std::pair<std::string, std::string>>;

inline void apply_grid_key(GridSpec& g, const std::string& key, const std::string& value) {
  if (key == "width") g.width = parse_integer<int>(key, value);
  else if (key == "height") g.height = parse_integer<int>(key, value);
  else if (key == "layout") g.layout = trim(value);
  else if (key == "initial_columns") g.initial_columns = parse_integer<int>(key, value);
  else if (key == "initial_lanterns") g.initial_lanterns = parse_integer<int>(key, value);
  else if (key == "respawn_period") g.respawn_period = parse_integer<int>(key, value);
  else if (key == "episode_ticks") g.episode_ticks = parse_integer<int>(key, value);
  else if (key == "action_repeat") g.action_repeat = parse_integer<int>(key, value);
  else if (key == "view_radius") g.view_radius = parse_integer<int>(key, value);
  else throw ConfigError("unknown key '" + key + "' in [grid]", key);
}

inline void apply_experiment_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "scenarios") {
    c.scenarios.clear();
    for (const auto& name : split_list(value)) {
      auto k = parse_scenario(name);
      if (!k) throw ConfigError("unknown scenario '" + name + "'", key);
      c.scenarios.push_back(*k);
    }
  } else if (key == "strategies") {
    c.strategies.clear();
    for (const auto& name : split_list(value)) {
      auto k = parse_strategy(name);
      if (!k) throw ConfigError("unknown strategy '" + name + "'", key);
      c.strategies.push_back(*k);
    }
  } else if (key == "seeds") {
    c.seeds.clear();
    for (const auto& s : split_list(value)) c.seeds.push_back(parse_integer<std::uint64_t>(key, s));
  } else if (key == "output_dir") {
    c.output_dir = trim(value);
  } else if (key == "parallelism") {
    c.parallelism = parse_integer<int>(key, value);
  } else if (key == "rollout_threads") {
    c.rollout_threads = parse_integer<int>(key, value);
  } else if (key == "checkpoint_every") {
    c.checkpoint_every = parse_integer<int>(key, value);
  } else if (key == "unsup_trigger") {
    const auto t = trim(value);
    if (t == "drift") c.unsup_trigger = TriggerMode::drift;
    else if (t == "map_boundary") c.unsup_trigger = TriggerMode::map_boundary;
    else throw ConfigError("unsup_trigger must be drift or map_boundary", key);
  } else if (key == "sup_keep_latest") {
    c.sup_keep_latest = parse_bool(key, value);
  } else {
    throw ConfigError("unknown key '" + key + "' in [experiment]", key);
  }
}

}  // namespace detail

/// Parses INI text. Every (scenario, strategy) cell is resolved and
/// validated; errors name the offending key.
inline ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& err) {
    throw ConfigError(std::string("malformed config: ") + err.message() + " (line " +
                      std::to_string(err.line()) + ")");
  }

  ExperimentConfig cfg;
  std::map<std::string, detail::Section> sections;
  for (const auto& [name, node] : tree) {
    if (!node.data().empty()) throw ConfigError("key '" + name + "' outside any section", name);
    detail::Section sec;
    for (const auto& [key, value] : node) sec.emplace_back(key, value.data());
    sections[name] = std::move(sec);
  }

  bool have_experiment = false;
  for (const auto& [name, sec] : sections) {
    if (name == "experiment") {
      have_experiment = true;
      for (const auto& [k, v] : sec) detail::apply_experiment_key(cfg, k, v);
    } else if (name == "grid") {
      for (const auto& [k, v] : sec) detail::apply_grid_key(cfg.grid, k, v);
    } else if (name != "defaults") {
      const auto dot = name.find('.');
      const auto scenario = parse_scenario(name.substr(0, dot));
      const bool strategy_ok = dot == std::string::npos || parse_strategy(name.substr(dot + 1)).has_value();
      if (!scenario || !strategy_ok) throw ConfigError("unknown section [" + name + "]", name);
      for (const auto& [k, v] : sec)
        if (!detail::find_hyper_field(k)) throw ConfigError("unknown key '" + k + "' in [" + name + "]", k);
    } else {
      for (const auto& [k, v] : sec)
        if (!detail::find_hyper_field(k)) throw ConfigError("unknown key '" + k + "' in [defaults]", k);
    }
  }
  if (!have_experiment) throw ConfigError("missing [experiment] section", "experiment");
  if (cfg.scenarios.empty()) throw ConfigError("no scenarios listed", "scenarios");
  if (cfg.strategies.empty()) throw ConfigError("no strategies listed", "strategies");
  if (cfg.seeds.empty()) throw ConfigError("seeds list is empty", "seeds");
  if (std::set<std::uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() != cfg.seeds.size())
    throw ConfigError("seeds must be distinct", "seeds");
  if (cfg.parallelism < 1) throw ConfigError("parallelism must be at least 1", "parallelism");
  if (cfg.rollout_threads < 1) throw ConfigError("rollout_threads must be at least 1", "rollout_threads");
  if (cfg.checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative", "checkpoint_every");
  if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty", "output_dir");
  cfg.grid.build_layout();
  cfg.grid.validate();

  for (auto scenario : cfg.scenarios) {
    for (auto strategy : cfg.strategies) {
      Hyperparams h;
      std::set<std::string> seen;
      const std::string s_name(to_string(scenario));
      for (const std::string& layer : {std::string("defaults"), s_name, s_name + "." + std::string(to_string(strategy))}) {
        auto it = sections.find(layer);
        if (it == sections.end()) continue;
        for (const auto& [k, v] : it->second) {
          detail::find_hyper_field(k)->set(h, v);
          seen.insert(k);
        }
      }
      for (const auto& key : detail::required_keys(strategy))
        if (!seen.count(key))
          throw ConfigError("missing required key '" + key + "' for " + s_name + "." +
                                std::string(to_string(strategy)),
                            key);
      h.validate();
      if ((strategy == StrategyKind::static_ || strategy == StrategyKind::unsup) && h.fisher_freq <= 0)
        throw ConfigError("fisher_freq must be positive for this strategy", "fisher_freq");
      cfg.cells[{scenario, strategy}] = std::move(h);
    }
  }
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

/// Canonical text form. Every cell is written out in full, so loading the
/// result reproduces the same resolved configuration.
inline std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  auto names = [](const auto& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? " " : "") + std::string(to_string(xs[i]));
    return s;
  };
  out << "[experiment]\n"
      << "scenarios = " << names(c.scenarios) << "\n"
      << "strategies = " << names(c.strategies) << "\n"
      << "seeds = " << detail::join_ints(c.seeds) << "\n"
      << "output_dir = " << c.output_dir << "\n"
      << "parallelism = " << c.parallelism << "\n"
      << "rollout_threads = " << c.rollout_threads << "\n"
      << "checkpoint_every = " << c.checkpoint_every << "\n"
      << "unsup_trigger = " << (c.unsup_trigger == TriggerMode::drift ? "drift" : "map_boundary") << "\n"
      << "sup_keep_latest = " << (c.sup_keep_latest ? "true" : "false") << "\n\n";
  const GridSpec& g = c.grid;
  out << "[grid]\n"
      << "width = " << g.width << "\nheight = " << g.height << "\nlayout = " << g.layout
      << "\ninitial_columns = " << g.initial_columns << "\ninitial_lanterns = " << g.initial_lanterns
      << "\nrespawn_period = " << g.respawn_period << "\nepisode_ticks = " << g.episode_ticks
      << "\naction_repeat = " << g.action_repeat << "\nview_radius = " << g.view_radius << "\n";
  for (const auto& [key, h] : c.cells) {
    out << "\n[" << to_string(key.first) << "." << to_string(key.second) << "]\n";
    for (const auto& [name, field] : detail::hyper_fields()) out << name << " = " << field.get(h) << "\n";
  }
  return out.str();
}

}  // namespace crlmaze
