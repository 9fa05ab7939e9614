#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "friends/pipeline.hpp"

namespace friends {

/// Puffing-topography summary for one local date.
struct PTMetrics {
  Date date{};
  int puff_count = 0;
  double total_puff_duration_s = 0.0;
  std::vector<double> inter_puff_intervals_s;
  int touch_count = 0;
  double total_touch_duration_s = 0.0;
};

inline std::vector<PTMetrics> compute_pt_metrics(
    const std::map<Date, std::vector<Episode>>& buckets) {
  std::vector<PTMetrics> out;
  for (const auto& [date, episodes] : buckets) {
    PTMetrics m;
    m.date = date;
    std::int64_t puff_ticks = 0;
    std::int64_t touch_ticks = 0;
    std::vector<Episode> puffs;
    for (const auto& e : episodes) {
      if (e.kind == EpisodeKind::Puff) {
        ++m.puff_count;
        puff_ticks += e.duration_ticks();
        puffs.push_back(e);
      } else {
        ++m.touch_count;
        touch_ticks += e.duration_ticks();
      }
    }
    std::sort(puffs.begin(), puffs.end(),
              [](const Episode& a, const Episode& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < puffs.size(); ++i) {
      m.inter_puff_intervals_s.push_back(
          static_cast<double>(ticks_between(puffs[i - 1].end, puffs[i].start)) / kTicksPerSecond);
    }
    m.total_puff_duration_s = static_cast<double>(puff_ticks) / kTicksPerSecond;
    m.total_touch_duration_s = static_cast<double>(touch_ticks) / kTicksPerSecond;
    out.push_back(std::move(m));
  }
  return out;
}

inline nlohmann::json to_json(const PTMetrics& m) {
  return nlohmann::json{{"date", format_date(m.date)},
                        {"puff_count", m.puff_count},
                        {"total_puff_duration_s", m.total_puff_duration_s},
                        {"inter_puff_intervals_s", m.inter_puff_intervals_s},
                        {"touch_count", m.touch_count},
                        {"total_touch_duration_s", m.total_touch_duration_s}};
}

inline nlohmann::json metrics_document(const std::vector<PTMetrics>& metrics) {
  auto doc = nlohmann::json::array();
  for (const auto& m : metrics) doc.push_back(to_json(m));
  return doc;
}

inline std::string format_ms(double ms) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", ms);
  return buf;
}

inline constexpr std::string_view kEpisodeTableHeader = "Event,Date,Range,Duration (ms)";

/// One CSV row: Event,Date,Range,Duration (ms).
inline std::string episode_row(const Episode& e, const ZoneConfig& zone) {
  std::string row(to_string(e.kind));
  row += ',';
  row += format_date(e.date);
  row += ',';
  row += format_instant(e.start, zone, false);
  row += " to ";
  row += format_instant(e.end, zone, false);
  row += ',';
  row += format_ms(e.duration_ms);
  return row;
}

inline std::string export_episode_table(const std::vector<Episode>& episodes,
                                        const ZoneConfig& zone) {
  std::string out(kEpisodeTableHeader);
  out += '\n';
  for (const auto& e : episodes) {
    out += episode_row(e, zone);
    out += '\n';
  }
  return out;
}

/// Reference-vs-device comparison for one session.
struct DriftReport {
  std::string label;
  std::vector<double> offsets_s;  // per pair: ON offset then OFF offset
  double approx_time_diff_s = 0.0;  // median of offsets
  double display_s = 0.0;           // median rounded to the display granularity
};

/// ON/OFF pair as real seconds on a shared time base.
struct TimedPair {
  double on_s = 0.0;
  double off_s = 0.0;
};

class DriftError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

/// Rounds to the nearest multiple of `step`, halves away from zero.
inline double round_to(double value, double step) {
  if (step <= 0.0) return value;
  return std::round(value / step) * step;
}

/**
 * Offsets are reference minus device, one per ON and one per OFF. The
 * representative value is their median; `display_s` snaps it to
 * `granularity_s` whole units for a compact report.
 */
inline DriftReport compute_drift(const std::vector<TimedPair>& reference,
                                 const std::vector<TimedPair>& device, std::string label = {},
                                 double granularity_s = 1.0) {
  if (reference.size() != device.size()) {
    throw DriftError("LengthMismatch: " + std::to_string(reference.size()) + " reference vs " +
                     std::to_string(device.size()) + " device pairs");
  }
  DriftReport r;
  r.label = std::move(label);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    r.offsets_s.push_back(reference[i].on_s - device[i].on_s);
    r.offsets_s.push_back(reference[i].off_s - device[i].off_s);
  }
  r.approx_time_diff_s = median(r.offsets_s);
  r.display_s = round_to(r.approx_time_diff_s, granularity_s);
  if (r.display_s == 0.0) r.display_s = 0.0;  // no "-0.0"
  return r;
}

inline nlohmann::json to_json(const DriftReport& r) {
  return nlohmann::json{{"label", r.label},
                        {"offsets_s", r.offsets_s},
                        {"approx_time_diff_s", r.approx_time_diff_s},
                        {"display_s", r.display_s}};
}

}  // namespace friends
