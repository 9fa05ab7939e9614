#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "friends/codec.hpp"
#include "friends/emulator.hpp"

namespace friends {

struct PuffSpec {
  double duration_s = 0.0;
  double gap_s = 0.0;  // OFF of this puff to ON of the next
};

struct TouchBehavior {
  double fraction = 0.9;  // share of puffs with a touch around them
  double lead_s = 0.5;    // touch starts this long before the puff
  double lag_s = 0.5;     // and ends this long after it
};

struct TemperatureModel {
  int baseline = 260;
  int delta = 245;
};

struct Session {
  std::string label;
  double start_offset_s = 0.0;  // from Scenario::start
  std::vector<PuffSpec> puffs;
  double duration_jitter_s = 0.0;  // each duration gets + U[0, jitter)
  TouchBehavior touch;
  TemperatureModel temperature;
};

struct NoiseModel {
  int false_positive_count = 0;
  double min_duration_s = 0.1;
  double max_duration_s = 0.9;  // exclusive
};

struct Scenario {
  DeviceInstant start;
  std::vector<Session> sessions;
  NoiseModel noise;
  std::uint64_t seed = 0;
  std::size_t capacity = kDefaultFlashCapacity;
};

struct TimedInterval {
  DeviceInstant on;
  DeviceInstant off;
  std::string session;
  friend bool operator==(const TimedInterval&, const TimedInterval&) = default;
};

/// Flash image plus the ground truth it was generated from.
struct GeneratedLog {
  std::vector<std::uint64_t> records;
  std::vector<TimedInterval> true_puffs;
  std::vector<TimedInterval> false_positives;
  std::vector<TimedInterval> touches;

  double true_puff_seconds() const {
    std::int64_t ticks = 0;
    for (const auto& p : true_puffs) ticks += p.off.total_ticks() - p.on.total_ticks();
    return static_cast<double>(ticks) / kTicksPerSecond;
  }
};

namespace detail {

/// Portable uniform [0,1) from a 64-bit engine.
inline double unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

inline std::int64_t to_ticks(double seconds) {
  return static_cast<std::int64_t>(std::llround(seconds * kTicksPerSecond));
}

}  // namespace detail

inline void validate(const Scenario& s) {
  double prev_end = -1e300;
  for (const auto& session : s.sessions) {
    if (session.touch.fraction < 0.0 || session.touch.fraction > 1.0) {
      throw std::invalid_argument("touch fraction outside [0,1] in session " + session.label);
    }
    if (session.touch.lead_s < 0.0 || session.touch.lag_s < 0.0 || session.duration_jitter_s < 0.0) {
      throw std::invalid_argument("negative timing in session " + session.label);
    }
    double span = session.touch.lead_s;
    for (const auto& p : session.puffs) {
      if (!(p.duration_s > 0.0)) throw std::invalid_argument("puff duration must be > 0");
      if (p.gap_s < 0.0) throw std::invalid_argument("puff gap must be >= 0");
      span += p.duration_s + session.duration_jitter_s + p.gap_s;
    }
    span += session.touch.lag_s;
    double begin = session.start_offset_s - session.touch.lead_s;
    if (begin < prev_end) {
      throw std::invalid_argument("sessions overlap or are out of order at " + session.label);
    }
    prev_end = begin + span;
  }
  if (s.noise.false_positive_count < 0 || s.noise.min_duration_s <= 0.0 ||
      s.noise.max_duration_s < s.noise.min_duration_s) {
    throw std::invalid_argument("bad noise model");
  }
}

/**
 * Synthesizes a flash image for a scenario.
 *
 * Each true puff yields PUFF_ON/PUFF_OFF followed directly by its
 * TEMPERATURE_ON/OFF pair, bracketed by TOUCH_ON/OFF when the touch draw
 * succeeds. False positives are bare short puff pairs placed uniformly over
 * the session spans, clear of every true puff and touch. Records are ordered
 * by time; the temperature pair shares its puff's OFF time.
 */
inline GeneratedLog generate(const Scenario& scenario) {
  validate(scenario);
  std::mt19937_64 rng(scenario.seed);
  GeneratedLog log;

  // (ticks, sequence, word); sequence keeps same-time records in emit order.
  std::vector<std::tuple<std::int64_t, std::size_t, std::uint64_t>> timeline;
  auto emit_timed = [&](EventKind k, std::int64_t ticks) {
    auto ev = DecodedEvent::timed(k, DeviceInstant::from_ticks(ticks));
    timeline.emplace_back(ticks, timeline.size(), encode_word(ev));
  };
  auto emit_temp = [&](EventKind k, int value, std::int64_t ticks) {
    auto v = static_cast<std::uint16_t>(std::clamp(value, 0, static_cast<int>(kMaxTemperature)));
    auto ev = DecodedEvent::temperature(k, TemperatureReading{v});
    timeline.emplace_back(ticks, timeline.size(), encode_word(ev));
  };

  const std::int64_t base = scenario.start.total_ticks();
  std::vector<std::pair<std::int64_t, std::int64_t>> spans;     // session extents
  std::vector<std::pair<std::int64_t, std::int64_t>> occupied;  // puff+touch extents

  for (const auto& session : scenario.sessions) {
    double t = session.start_offset_s;
    const std::int64_t session_begin = base + detail::to_ticks(t);
    for (const auto& spec : session.puffs) {
      double dur = spec.duration_s + session.duration_jitter_s * detail::unit(rng);
      std::int64_t on = base + detail::to_ticks(t);
      std::int64_t off = base + detail::to_ticks(t + dur);
      bool touched = detail::unit(rng) < session.touch.fraction;
      std::int64_t touch_on = on - detail::to_ticks(session.touch.lead_s);
      std::int64_t touch_off = off + detail::to_ticks(session.touch.lag_s);
      if (touched) emit_timed(EventKind::TouchOn, touch_on);
      emit_timed(EventKind::PuffOn, on);
      emit_timed(EventKind::PuffOff, off);
      emit_temp(EventKind::TemperatureOn, session.temperature.baseline + session.temperature.delta, off);
      emit_temp(EventKind::TemperatureOff, session.temperature.baseline, off);
      if (touched) {
        emit_timed(EventKind::TouchOff, touch_off);
        log.touches.push_back({DeviceInstant::from_ticks(touch_on),
                               DeviceInstant::from_ticks(touch_off), session.label});
      }
      log.true_puffs.push_back(
          {DeviceInstant::from_ticks(on), DeviceInstant::from_ticks(off), session.label});
      occupied.emplace_back(std::min(on, touch_on), std::max(off, touch_off));
      t += dur + spec.gap_s;
    }
    if (!session.puffs.empty()) spans.emplace_back(session_begin, base + detail::to_ticks(t));
  }

  const auto& noise = scenario.noise;
  if (noise.false_positive_count > 0) {
    std::int64_t total = 0;
    for (auto [a, b] : spans) total += b - a;
    if (total <= 0) throw std::invalid_argument("false positives need a non-empty session span");
    const std::int64_t margin = detail::to_ticks(0.25);
    int placed = 0;
    for (int attempt = 0; placed < noise.false_positive_count; ++attempt) {
      if (attempt > 100000) throw std::invalid_argument("cannot place false positives");
      auto pos = static_cast<std::int64_t>(detail::unit(rng) * static_cast<double>(total));
      double dur = noise.min_duration_s +
                   (noise.max_duration_s - noise.min_duration_s) * detail::unit(rng);
      std::int64_t on = 0;
      for (auto [a, b] : spans) {
        if (pos < b - a) {
          on = a + pos;
          break;
        }
        pos -= b - a;
      }
      std::int64_t off = on + detail::to_ticks(dur);
      if (off <= on) off = on + 1;
      bool clash = std::any_of(occupied.begin(), occupied.end(), [&](auto iv) {
        return on < iv.second + margin && iv.first - margin < off;
      });
      if (clash) continue;
      occupied.emplace_back(on, off);
      emit_timed(EventKind::PuffOn, on);
      emit_timed(EventKind::PuffOff, off);
      log.false_positives.push_back(
          {DeviceInstant::from_ticks(on), DeviceInstant::from_ticks(off), "noise"});
      ++placed;
    }
  }

  std::stable_sort(timeline.begin(), timeline.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  if (timeline.size() > scenario.capacity) throw CapacityExceeded(timeline.size(), scenario.capacity);
  log.records.reserve(timeline.size());
  for (const auto& [ticks, seq, word] : timeline) log.records.push_back(word);
  auto by_on = [](const TimedInterval& a, const TimedInterval& b) { return a.on < b.on; };
  std::sort(log.false_positives.begin(), log.false_positives.end(), by_on);
  return log;
}

inline std::vector<std::uint64_t> generate_records(const Scenario& scenario) {
  return generate(scenario).records;
}

/**
 * One day of the bench validation protocol: four sessions (midnight,
 * morning, afternoon, evening), each three sets of six puffs of about 2, 3
 * and 4 s with 30 s between puffs, plus 17 sub-second false positives.
 * The day is 2024-02-12 in UTC-06:00.
 */
inline Scenario validation_day_scenario(std::uint64_t seed = 2024) {
  Scenario s;
  s.start = DeviceInstant{1707717600u, 0};  // 2024-02-12 00:00:00 at UTC-06:00
  s.seed = seed;
  s.noise.false_positive_count = 17;
  const std::pair<const char*, double> slots[] = {
      {"Midnight", 1 * 3600 + 37 * 60},
      {"Morning", 8 * 3600 + 33 * 60},
      {"Afternoon", 16 * 3600 + 46 * 60},
      {"Evening", 21 * 3600 + 4 * 60},
  };
  for (const auto& [label, offset] : slots) {
    Session session;
    session.label = label;
    session.start_offset_s = offset;
    session.duration_jitter_s = 0.5;
    for (double nominal : {2.0, 3.0, 4.0}) {
      for (int i = 0; i < 6; ++i) session.puffs.push_back({nominal, 30.0});
    }
    s.sessions.push_back(std::move(session));
  }
  return s;
}

// JSON mirror of the scenario types, field for field.

inline void to_json(nlohmann::json& j, const PuffSpec& p) {
  j = {{"duration_s", p.duration_s}, {"gap_s", p.gap_s}};
}
inline void from_json(const nlohmann::json& j, PuffSpec& p) {
  p.duration_s = j.at("duration_s").get<double>();
  p.gap_s = j.value("gap_s", 0.0);
}
inline void to_json(nlohmann::json& j, const TouchBehavior& t) {
  j = {{"fraction", t.fraction}, {"lead_s", t.lead_s}, {"lag_s", t.lag_s}};
}
inline void from_json(const nlohmann::json& j, TouchBehavior& t) {
  TouchBehavior d;
  t.fraction = j.value("fraction", d.fraction);
  t.lead_s = j.value("lead_s", d.lead_s);
  t.lag_s = j.value("lag_s", d.lag_s);
}
inline void to_json(nlohmann::json& j, const TemperatureModel& t) {
  j = {{"baseline", t.baseline}, {"delta", t.delta}};
}
inline void from_json(const nlohmann::json& j, TemperatureModel& t) {
  TemperatureModel d;
  t.baseline = j.value("baseline", d.baseline);
  t.delta = j.value("delta", d.delta);
}
inline void to_json(nlohmann::json& j, const Session& s) {
  j = {{"label", s.label},
       {"start_offset_s", s.start_offset_s},
       {"puffs", s.puffs},
       {"duration_jitter_s", s.duration_jitter_s},
       {"touch", s.touch},
       {"temperature", s.temperature}};
}
inline void from_json(const nlohmann::json& j, Session& s) {
  s.label = j.value("label", std::string{});
  s.start_offset_s = j.value("start_offset_s", 0.0);
  s.puffs = j.value("puffs", std::vector<PuffSpec>{});
  s.duration_jitter_s = j.value("duration_jitter_s", 0.0);
  s.touch = j.value("touch", TouchBehavior{});
  s.temperature = j.value("temperature", TemperatureModel{});
}
inline void to_json(nlohmann::json& j, const NoiseModel& n) {
  j = {{"false_positive_count", n.false_positive_count},
       {"min_duration_s", n.min_duration_s},
       {"max_duration_s", n.max_duration_s}};
}
inline void from_json(const nlohmann::json& j, NoiseModel& n) {
  NoiseModel d;
  n.false_positive_count = j.value("false_positive_count", d.false_positive_count);
  n.min_duration_s = j.value("min_duration_s", d.min_duration_s);
  n.max_duration_s = j.value("max_duration_s", d.max_duration_s);
}
inline void to_json(nlohmann::json& j, const Scenario& s) {
  j = {{"start", {{"posix_seconds", s.start.posix_seconds}, {"fraction_ticks", s.start.fraction_ticks}}},
       {"sessions", s.sessions},
       {"noise", s.noise},
       {"seed", s.seed},
       {"capacity", s.capacity}};
}
inline void from_json(const nlohmann::json& j, Scenario& s) {
  const auto& start = j.at("start");
  s.start = DeviceInstant{start.at("posix_seconds").get<std::uint32_t>(),
                          start.value("fraction_ticks", std::uint16_t{0})};
  s.sessions = j.value("sessions", std::vector<Session>{});
  s.noise = j.value("noise", NoiseModel{});
  s.seed = j.value("seed", std::uint64_t{0});
  s.capacity = j.value("capacity", kDefaultFlashCapacity);
}

}  // namespace friends
