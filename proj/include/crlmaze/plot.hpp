#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "crlmaze/csv.hpp"
#include "crlmaze/errors.hpp"
#include "crlmaze/scenario.hpp"
#include "crlmaze/strategies.hpp"

namespace crlmaze {

namespace detail {

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

/// Minimal SVG writer; all coordinates are printed with two decimals so the
/// output is byte-stable.
class Svg {
 public:
  Svg(double w, double h) : w_(w), h_(h) {}

  void line(double x1, double y1, double x2, double y2, const std::string& stroke, const std::string& cls,
            bool dotted = false, double width = 1.0) {
    body_ += "<line class=\"" + cls + "\" x1=\"" + fmt2(x1) + "\" y1=\"" + fmt2(y1) + "\" x2=\"" + fmt2(x2) +
             "\" y2=\"" + fmt2(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + fmt2(width) + "\"" +
             (dotted ? " stroke-dasharray=\"3,3\"" : "") + "/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, const std::string& cls,
                double width = 1.0) {
    body_ += "<polyline class=\"" + cls + "\" fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" +
             fmt2(width) + "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      body_ += (i ? " " : "") + fmt2(pts[i].first) + "," + fmt2(pts[i].second);
    body_ += "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& cls) {
    body_ += "<rect class=\"" + cls + "\" x=\"" + fmt2(x) + "\" y=\"" + fmt2(y) + "\" width=\"" + fmt2(w) +
             "\" height=\"" + fmt2(h) + "\" fill=\"" + fill + "\"/>\n";
  }
  void text(double x, double y, const std::string& s, const std::string& anchor = "middle", int size = 11) {
    body_ += "<text x=\"" + fmt2(x) + "\" y=\"" + fmt2(y) + "\" font-family=\"sans-serif\" font-size=\"" +
             std::to_string(size) + "\" text-anchor=\"" + anchor + "\">" + s + "</text>\n";
  }
  void open_group(const std::string& cls) { body_ += "<g class=\"" + cls + "\">\n"; }
  void close_group() { body_ += "</g>\n"; }

  std::string str() const {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt2(w_) + "\" height=\"" + fmt2(h_) +
           "\" viewBox=\"0 0 " + fmt2(w_) + " " + fmt2(h_) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" +
           body_ + "</svg>\n";
  }

 private:
  double w_, h_;
  std::string body_;
};

struct Axis {
  double lo, hi, px_lo, px_hi;
  double operator()(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

inline std::pair<double, double> padded_range(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

inline void write_text_file(const std::filesystem::path& path, const std::string& s) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << s;
}

}  // namespace detail

/// Reward curve of one run with both moving averages and a dotted vertical
/// line at every map change.
inline std::string reward_curve_svg(const CsvTable& log, const std::string& title) {
  const double W = 720, H = 360, L = 60, R = 20, T = 30, B = 40;
  const std::size_t n = log.rows.size();
  if (n == 0) throw ConfigError("log has no episodes");
  std::vector<double> ep(n), reward(n), ms(n), ml(n), map(n);
  for (std::size_t i = 0; i < n; ++i) {
    ep[i] = log.number(i, "episode");
    reward[i] = log.number(i, "mean_reward");
    ms[i] = log.number(i, "mavg_short");
    ml[i] = log.number(i, "mavg_long");
    map[i] = log.number(i, "map");
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* v : {&reward, &ms, &ml})
    for (double x : *v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  const auto [ylo, yhi] = detail::padded_range(lo, hi);
  const auto [xlo, xhi] = detail::padded_range(ep.front(), ep.back() + 1);
  const detail::Axis x{xlo, xhi, L, W - R}, y{ylo, yhi, H - B, T};

  detail::Svg svg(W, H);
  svg.text(W / 2, 18, title, "middle", 13);
  svg.line(L, H - B, W - R, H - B, "black", "axis");
  svg.line(L, T, L, H - B, "black", "axis");
  svg.text(W / 2, H - 8, "episode");
  svg.text(L - 6, y(ylo) + 4, detail::fmt2(ylo), "end", 9);
  svg.text(L - 6, y(yhi) + 4, detail::fmt2(yhi), "end", 9);
  if (ylo < 0 && yhi > 0) svg.line(L, y(0), W - R, y(0), "#bbbbbb", "zero");

  auto series = [&](const std::vector<double>& v) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < n; ++i) pts.emplace_back(x(ep[i]), y(v[i]));
    return pts;
  };
  svg.polyline(series(reward), "#9ecae1", "reward");
  svg.polyline(series(ml), "#08519c", "mavg-long", 1.5);
  svg.polyline(series(ms), "#e6550d", "mavg-short", 1.5);
  for (std::size_t i = 1; i < n; ++i)
    if (map[i] != map[i - 1] && map[i] > 0 && map[i - 1] > 0)
      svg.line(x(ep[i]), T, x(ep[i]), H - B, "black", "map-change", true);

  svg.line(W - 170, T + 8, W - 150, T + 8, "#9ecae1", "legend");
  svg.text(W - 145, T + 12, "episode reward", "start", 10);
  svg.line(W - 170, T + 22, W - 150, T + 22, "#e6550d", "legend");
  svg.text(W - 145, T + 26, "short moving average", "start", 10);
  svg.line(W - 170, T + 36, W - 150, T + 36, "#08519c", "legend");
  svg.text(W - 145, T + 40, "long moving average", "start", 10);
  return svg.str();
}

/// Grouped bars of mean A per strategy for each scenario, plus an average
/// group, with the multienv mean test reward as a dotted upper bound.
inline std::string a_metric_bars_svg(const CsvTable& summary) {
  const std::vector<StrategyKind> bar_kinds{StrategyKind::naive, StrategyKind::sup, StrategyKind::static_,
                                            StrategyKind::unsup};
  const std::vector<std::string> colors{"#bdbdbd", "#3182bd", "#31a354", "#e6550d"};
  std::map<std::string, std::map<std::string, double>> a;  // scenario -> strategy -> A
  std::map<std::string, double> bound;
  for (std::size_t i = 0; i < summary.rows.size(); ++i) {
    const auto& scenario = summary.rows[i][summary.column("scenario")];
    const auto& strategy = summary.rows[i][summary.column("strategy")];
    const double am = summary.number(i, "A_mean");
    const double mm = summary.number(i, "multienv_mean");
    if (std::isfinite(am)) a[scenario][strategy] = am;
    if (std::isfinite(mm)) bound[scenario] = mm;
    a[scenario];
  }
  std::vector<std::string> groups;
  for (auto k : {ScenarioKind::light, ScenarioKind::texture, ScenarioKind::object, ScenarioKind::all})
    if (a.count(std::string(to_string(k)))) groups.emplace_back(to_string(k));
  if (groups.empty()) throw ConfigError("summary has no rows");

  // Average group: per strategy over the scenarios that have it.
  std::map<std::string, double> avg;
  for (auto kind : bar_kinds) {
    const std::string s(to_string(kind));
    double sum = 0;
    int cnt = 0;
    for (const auto& g : groups)
      if (auto it = a[g].find(s); it != a[g].end()) {
        sum += it->second;
        ++cnt;
      }
    if (cnt) avg[s] = sum / cnt;
  }
  double bsum = 0;
  for (const auto& [g, b] : bound) bsum += b;
  a["average"] = avg;
  if (!bound.empty()) bound["average"] = bsum / static_cast<double>(bound.size());
  groups.emplace_back("average");

  double lo = 0, hi = 0;
  for (const auto& g : groups) {
    for (const auto& [s, v] : a[g]) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (bound.count(g)) hi = std::max(hi, bound[g]);
  }
  const auto [ylo, yhi] = detail::padded_range(lo, hi);
  const double W = 120.0 * static_cast<double>(groups.size()) + 100, H = 360, L = 60, T = 30, B = 50;
  const double group_w = 120, bar_w = 22;
  const detail::Axis y{ylo, yhi, H - B, T};

  detail::Svg svg(W, H);
  svg.text(W / 2, 18, "A metric per strategy and scenario", "middle", 13);
  svg.line(L, T, L, H - B, "black", "axis");
  svg.line(L, y(0), W - 20, y(0), "black", "axis");
  svg.text(L - 6, y(ylo) + 4, detail::fmt2(ylo), "end", 9);
  svg.text(L - 6, y(yhi) + 4, detail::fmt2(yhi), "end", 9);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const std::string& g = groups[gi];
    const double gx = L + 10 + group_w * static_cast<double>(gi);
    svg.open_group("group");
    for (std::size_t b = 0; b < bar_kinds.size(); ++b) {
      auto it = a[g].find(std::string(to_string(bar_kinds[b])));
      if (it == a[g].end()) continue;
      const double x0 = gx + bar_w * static_cast<double>(b);
      const double top = y(std::max(it->second, 0.0)), bottom = y(std::min(it->second, 0.0));
      svg.rect(x0, top, bar_w - 2, bottom - top, colors[b], "bar");
    }
    if (bound.count(g))
      svg.line(gx - 4, y(bound[g]), gx + bar_w * 4 + 2, y(bound[g]), "black", "upper-bound", true, 1.5);
    svg.close_group();
    svg.text(gx + bar_w * 2, H - B + 16, g);
  }
  for (std::size_t b = 0; b < bar_kinds.size(); ++b) {
    const double lx = L + 10 + 90.0 * static_cast<double>(b);
    svg.rect(lx, H - 18, 10, 10, colors[b], "legend");
    svg.text(lx + 14, H - 9, std::string(to_string(bar_kinds[b])), "start", 10);
  }
  svg.line(L + 370, H - 13, L + 390, H - 13, "black", "legend", true);
  svg.text(L + 394, H - 9, "multienv", "start", 10);
  return svg.str();
}

/// Writes reward_curve.svg into every run directory with a log.csv and
/// a_metric_bars.svg next to summary.csv. Returns the files written.
inline std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& results_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(results_dir)) throw ConfigError("no results directory " + results_dir.string());
  std::vector<fs::path> logs;
  for (const auto& entry : fs::recursive_directory_iterator(results_dir))
    if (entry.is_regular_file() && entry.path().filename() == "log.csv") logs.push_back(entry.path());
  std::sort(logs.begin(), logs.end());
  std::vector<fs::path> written;
  for (const auto& log : logs) {
    const fs::path dir = log.parent_path();
    const std::string title = fs::relative(dir, results_dir).generic_string();
    const fs::path out = dir / "reward_curve.svg";
    detail::write_text_file(out, reward_curve_svg(read_csv(log), title));
    written.push_back(out);
  }
  const fs::path summary = results_dir / "summary.csv";
  if (fs::exists(summary)) {
    const fs::path out = results_dir / "a_metric_bars.svg";
    detail::write_text_file(out, a_metric_bars_svg(read_csv(summary)));
    written.push_back(out);
  }
  if (written.empty()) throw ConfigError("no log.csv or summary.csv under " + results_dir.string());
  return written;
}

}  // namespace crlmaze
