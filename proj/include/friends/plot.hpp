#pragma once

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "friends/analysis.hpp"

namespace friends {

inline constexpr double kSecondsPerDay = 86400.0;

/// Interval on a day's 00:00-24:00 axis, in seconds since local midnight.
struct PlotInterval {
  double start_s = 0.0;
  double end_s = 0.0;
  double duration_ms = 0.0;
  std::optional<Confidence> confidence;
};

struct TemperatureMark {
  double at_s = 0.0;
  int value = 0;
  bool on_edge = true;  // TEMPERATURE_ON vs TEMPERATURE_OFF
};

/// Three stacked tracks for one date: puffs, temperature, touches.
struct DayPlot {
  Date date{};
  std::vector<PlotInterval> puffs;
  std::vector<TemperatureMark> temperatures;
  std::vector<PlotInterval> touches;
};

inline double seconds_into_day(DeviceInstant t, std::int64_t midnight) {
  return static_cast<double>(t.total_ticks() - (midnight << 16)) / kTicksPerSecond;
}

inline double clip_day(double s) { return std::clamp(s, 0.0, kSecondsPerDay); }

inline std::vector<DayPlot> build_day_plots(const Analysis& analysis, const ZoneConfig& zone) {
  std::map<Date, DayPlot> plots;
  for (const auto& [date, _] : analysis.days) plots[date].date = date;
  for (const auto& p : analysis.kept) {
    const auto& e = p.episode;
    auto date = zone.date_of(e.start.posix_seconds);
    auto& plot = plots[date];
    plot.date = date;
    const auto midnight = zone.midnight(date);
    const double s = seconds_into_day(e.start, midnight);
    const double f = seconds_into_day(e.end, midnight);
    PlotInterval iv{clip_day(s), clip_day(f), e.duration_ms, e.confidence};
    if (e.kind == EpisodeKind::Puff) {
      plot.puffs.push_back(iv);
    } else {
      plot.touches.push_back(iv);
    }
    if (p.temp_on) plot.temperatures.push_back({clip_day(s), p.temp_on->raw_value, true});
    if (p.temp_off) plot.temperatures.push_back({clip_day(f), p.temp_off->raw_value, false});
  }
  std::vector<DayPlot> out;
  for (auto& [_, plot] : plots) out.push_back(std::move(plot));
  return out;
}

inline nlohmann::json to_json(const PlotInterval& iv) {
  nlohmann::json j{{"start_s", iv.start_s}, {"end_s", iv.end_s}, {"duration_ms", iv.duration_ms}};
  if (iv.confidence) j["confidence"] = std::string(to_string(*iv.confidence));
  return j;
}

inline nlohmann::json to_json(const DayPlot& plot) {
  nlohmann::json j{{"date", format_date(plot.date)}};
  j["puffs"] = nlohmann::json::array();
  j["temperatures"] = nlohmann::json::array();
  j["touches"] = nlohmann::json::array();
  for (const auto& iv : plot.puffs) j["puffs"].push_back(to_json(iv));
  for (const auto& iv : plot.touches) j["touches"].push_back(to_json(iv));
  for (const auto& t : plot.temperatures) {
    j["temperatures"].push_back(
        {{"at_s", t.at_s}, {"value", t.value}, {"edge", t.on_edge ? "ON" : "OFF"}});
  }
  return j;
}

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace detail

/// Renders a day as a standalone SVG document. Output depends only on the
/// plot contents, so identical inputs give identical bytes.
inline std::string render_svg(const DayPlot& plot) {
  using detail::num;
  constexpr double width = 1200, left = 90, right = 20, axis_w = width - left - right;
  constexpr double track_h = 80, gap = 20, top = 40;
  constexpr double puff_y = top, temp_y = top + track_h + gap, touch_y = top + 2 * (track_h + gap);
  constexpr double axis_y = touch_y + track_h + 10, height = axis_y + 40;
  auto x = [&](double s) { return left + axis_w * s / kSecondsPerDay; };
  auto w = [&](double a, double b) { return std::max(0.5, axis_w * (b - a) / kSecondsPerDay); };

  std::ostringstream out;
  out << R"(<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width=")" << width
      << R"(" height=")" << height << R"(" font-family="sans-serif" font-size="12">)" << '\n';
  out << R"( <rect x="0" y="0" width=")" << width << R"(" height=")" << height
      << R"(" fill="white"/>)" << '\n';
  out << R"( <text x=")" << left << R"(" y="24" font-size="16">)" << format_date(plot.date)
      << "</text>\n";

  const std::pair<const char*, double> tracks[] = {
      {"Puff", puff_y}, {"Temperature", temp_y}, {"Touch", touch_y}};
  for (const auto& [name, y] : tracks) {
    out << R"( <rect class="track" x=")" << left << R"(" y=")" << y << R"(" width=")" << axis_w
        << R"(" height=")" << track_h << R"(" fill="#f4f4f4" stroke="#cccccc"/>)" << '\n';
    out << R"( <text x="8" y=")" << num(y + track_h / 2 + 4) << R"(">)" << name << "</text>\n";
  }

  for (int h = 0; h <= 24; h += 2) {
    double px = x(h * 3600.0);
    char label[8];
    std::snprintf(label, sizeof(label), "%02d:00", h);
    out << R"( <line x1=")" << num(px) << R"(" y1=")" << top << R"(" x2=")" << num(px)
        << R"(" y2=")" << axis_y << R"(" stroke="#dddddd"/>)" << '\n';
    out << R"( <text x=")" << num(px - 16) << R"(" y=")" << axis_y + 16 << R"(">)" << label
        << "</text>\n";
  }

  for (const auto& p : plot.puffs) {
    const bool high = p.confidence == Confidence::High;
    out << R"( <rect class="puff )" << (high ? "high" : "standard") << R"(" x=")" << num(x(p.start_s))
        << R"(" y=")" << puff_y + 10 << R"(" width=")" << num(w(p.start_s, p.end_s))
        << R"(" height=")" << track_h - 20 << R"(" fill=")" << (high ? "#b22222" : "#f28e2b")
        << R"("><title>)" << num(p.duration_ms) << " ms</title></rect>\n";
  }
  for (const auto& t : plot.temperatures) {
    double cy = temp_y + track_h - 5 - (track_h - 10) * t.value / 1024.0;
    out << R"( <circle class="temperature )" << (t.on_edge ? "on" : "off") << R"(" cx=")"
        << num(x(t.at_s)) << R"(" cy=")" << num(cy) << R"(" r="2.5" fill=")"
        << (t.on_edge ? "#d62728" : "#1f77b4") << R"("><title>)" << t.value
        << "</title></circle>\n";
  }
  for (const auto& t : plot.touches) {
    out << R"( <rect class="touch" x=")" << num(x(t.start_s)) << R"(" y=")" << touch_y + 10
        << R"(" width=")" << num(w(t.start_s, t.end_s)) << R"(" height=")" << track_h - 20
        << R"(" fill="#4e79a7"><title>)" << num(t.duration_ms) << " ms</title></rect>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace friends
