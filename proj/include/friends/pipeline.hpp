#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "friends/codec.hpp"
#include "friends/zone.hpp"

namespace friends {

enum class EpisodeKind { Puff, Touch };
enum class Confidence { High, Standard };

inline constexpr std::string_view to_string(EpisodeKind k) {
  return k == EpisodeKind::Puff ? "PUFF" : "TOUCH";
}
inline constexpr std::string_view to_string(Confidence c) {
  return c == Confidence::High ? "HIGH" : "STANDARD";
}

inline constexpr std::int64_t ticks_between(DeviceInstant a, DeviceInstant b) {
  return b.total_ticks() - a.total_ticks();
}
inline constexpr double ticks_to_ms(std::int64_t ticks) {
  return static_cast<double>(ticks) * 1000.0 / kTicksPerSecond;
}

/// A paired ON/OFF interval.
struct Episode {
  EpisodeKind kind = EpisodeKind::Puff;
  DeviceInstant start;
  DeviceInstant end;
  double duration_ms = 0.0;
  Date date{};
  std::optional<Confidence> confidence;  // puffs only
  std::size_t on_index = 0;              // stream position of the ON record
  std::size_t off_index = 0;             // stream position of the OFF record

  std::int64_t duration_ticks() const { return ticks_between(start, end); }
  double duration_s() const { return static_cast<double>(duration_ticks()) / kTicksPerSecond; }

  friend bool operator==(const Episode&, const Episode&) = default;
};

inline Episode make_episode(EpisodeKind kind, DeviceInstant start, DeviceInstant end,
                            const ZoneConfig& zone, std::size_t on_index = 0,
                            std::size_t off_index = 0) {
  Episode e;
  e.kind = kind;
  e.start = start;
  e.end = end;
  e.duration_ms = ticks_to_ms(ticks_between(start, end));
  e.date = zone.date_of(start.posix_seconds);
  if (kind == EpisodeKind::Puff) e.confidence = Confidence::Standard;
  e.on_index = on_index;
  e.off_index = off_index;
  return e;
}

struct Orphan {
  std::size_t index = 0;  // stream position
  DecodedEvent event;
  friend bool operator==(const Orphan&, const Orphan&) = default;
};

struct Pairing {
  std::vector<Episode> episodes;  // ordered by ON position
  std::vector<Orphan> orphans;    // ordered by stream position
};

/**
 * Pairs ON/OFF records per kind.
 *
 * Within the puff subsequence (and, separately, the touch subsequence) an ON
 * immediately followed by an OFF forms one episode. Repeated ONs, OFFs with no
 * open ON, and an ON left open at the end are orphans. Temperature records are
 * ignored here.
 */
inline Pairing pair_episodes(const std::vector<DecodedEvent>& events,
                             const ZoneConfig& zone = ZoneConfig::utc()) {
  Pairing out;
  // index 0 = puff, 1 = touch
  std::array<std::optional<std::size_t>, 2> open{};
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    auto k = ev.kind();
    if (is_temperature(k)) continue;
    const bool puff = (k == EventKind::PuffOn || k == EventKind::PuffOff);
    auto& slot = open[puff ? 0 : 1];
    if (is_on(k)) {
      if (slot) out.orphans.push_back({*slot, events[*slot]});
      slot = i;
    } else if (slot) {
      out.episodes.push_back(make_episode(puff ? EpisodeKind::Puff : EpisodeKind::Touch,
                                          *events[*slot].instant(), *ev.instant(), zone, *slot,
                                          i));
      slot.reset();
    } else {
      out.orphans.push_back({i, ev});
    }
  }
  for (auto& slot : open) {
    if (slot) out.orphans.push_back({*slot, events[*slot]});
  }
  std::sort(out.episodes.begin(), out.episodes.end(),
            [](const Episode& a, const Episode& b) { return a.on_index < b.on_index; });
  std::sort(out.orphans.begin(), out.orphans.end(),
            [](const Orphan& a, const Orphan& b) { return a.index < b.index; });
  return out;
}

/// Episode plus the temperature pair sampled around it.
struct PuffWithTemps {
  Episode episode;
  std::optional<TemperatureReading> temp_on;
  std::optional<TemperatureReading> temp_off;

  bool has_temps() const { return temp_on.has_value() && temp_off.has_value(); }
  std::optional<int> temp_delta() const {
    if (!has_temps()) return std::nullopt;
    return std::abs(static_cast<int>(temp_on->raw_value) - static_cast<int>(temp_off->raw_value));
  }
  friend bool operator==(const PuffWithTemps&, const PuffWithTemps&) = default;
};

struct UnattachedTemperature {
  std::size_t index = 0;
  DecodedEvent event;
  friend bool operator==(const UnattachedTemperature&, const UnattachedTemperature&) = default;
};

struct TemperatureAssociation {
  std::vector<PuffWithTemps> entries;  // one per input episode, same order
  std::vector<UnattachedTemperature> unattached;
};

/**
 * Attaches each TEMPERATURE_ON/OFF pair to the episode that closed just
 * before it. The pair must sit between that episode's OFF record and the ON
 * record of the next episode; anything else is reported as unattached.
 */
inline TemperatureAssociation associate_temperatures(const std::vector<DecodedEvent>& events,
                                                     const std::vector<Episode>& episodes) {
  TemperatureAssociation out;
  out.entries.reserve(episodes.size());
  std::map<std::size_t, std::size_t> closes_at;  // OFF position -> episode
  std::map<std::size_t, std::size_t> opens_at;   // ON position -> episode
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    out.entries.push_back({episodes[e], std::nullopt, std::nullopt});
    closes_at[episodes[e].off_index] = e;
    opens_at[episodes[e].on_index] = e;
  }

  std::optional<std::size_t> window;  // episode owning the current window
  std::size_t window_id = 0;
  struct Pending {
    std::size_t index;
    TemperatureReading value;
    std::size_t window_id;
  };
  std::optional<Pending> pending;

  auto reject = [&](std::size_t i) { out.unattached.push_back({i, events[i]}); };

  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto k = events[i].kind();
    if (opens_at.count(i)) {
      window.reset();
      ++window_id;
      continue;
    }
    if (auto it = closes_at.find(i); it != closes_at.end()) {
      window = it->second;
      ++window_id;
      continue;
    }
    if (k == EventKind::TemperatureOn) {
      if (pending) reject(pending->index);
      pending = Pending{i, *events[i].temperature(), window_id};
    } else if (k == EventKind::TemperatureOff) {
      if (!pending) {
        reject(i);
        continue;
      }
      auto& entry_slot = window;
      if (pending->window_id == window_id && entry_slot && !out.entries[*entry_slot].temp_on) {
        out.entries[*entry_slot].temp_on = pending->value;
        out.entries[*entry_slot].temp_off = *events[i].temperature();
      } else {
        reject(pending->index);
        reject(i);
      }
      pending.reset();
    }
  }
  if (pending) reject(pending->index);
  std::sort(out.unattached.begin(), out.unattached.end(),
            [](const auto& a, const auto& b) { return a.index < b.index; });
  return out;
}

struct FilterConfig {
  bool use_thermistor = false;
  double min_puff_ms = 200.0;
  double temp_delta_threshold = 10.0;
  std::optional<double> display_min_puff_s;  // off unless set
};

/**
 * Noise removal over puffs, keeping their temperature data.
 *
 * Without the thermistor, puffs lasting at most `min_puff_ms` are dropped.
 * With it, consecutive puffs N, N+1 are first merged when the start reading
 * of N+1 is not above the end reading of N; each resulting short puff is then
 * kept only if its temperature swing exceeds `temp_delta_threshold`. Short
 * puffs without a temperature pair fall back to the duration rule. Touch
 * entries pass through untouched.
 */
inline std::vector<PuffWithTemps> fuse_and_filter_with_temps(const std::vector<PuffWithTemps>& input,
                                                             const FilterConfig& config) {
  std::vector<PuffWithTemps> touches;
  std::vector<PuffWithTemps> puffs;
  for (const auto& p : input) {
    (p.episode.kind == EpisodeKind::Puff ? puffs : touches).push_back(p);
  }

  if (config.use_thermistor && !puffs.empty()) {
    std::vector<PuffWithTemps> merged;
    merged.push_back(puffs.front());
    for (std::size_t i = 1; i < puffs.size(); ++i) {
      auto& prev = merged.back();
      const auto& next = puffs[i];
      if (prev.temp_off && next.temp_on && next.temp_on->raw_value <= prev.temp_off->raw_value) {
        Episode span = prev.episode;
        span.end = next.episode.end;
        span.off_index = next.episode.off_index;
        span.duration_ms = ticks_to_ms(span.duration_ticks());
        prev.episode = span;
        prev.temp_off = next.temp_off;
      } else {
        merged.push_back(next);
      }
    }
    puffs = std::move(merged);
  }

  std::vector<PuffWithTemps> out;
  for (const auto& p : puffs) {
    bool keep = true;
    if (p.episode.duration_ms <= config.min_puff_ms) {
      if (config.use_thermistor && p.has_temps()) {
        keep = static_cast<double>(*p.temp_delta()) > config.temp_delta_threshold;
      } else {
        keep = false;
      }
    }
    if (keep) out.push_back(p);
  }
  out.insert(out.end(), touches.begin(), touches.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.episode.on_index < b.episode.on_index;
  });
  return out;
}

inline std::vector<Episode> fuse_and_filter(const std::vector<PuffWithTemps>& input,
                                            const FilterConfig& config) {
  std::vector<Episode> out;
  for (const auto& p : fuse_and_filter_with_temps(input, config)) out.push_back(p.episode);
  return out;
}

/// Keeps puffs lasting at least `min_seconds`; touches pass through.
inline std::vector<Episode> apply_display_filter(const std::vector<Episode>& episodes,
                                                 double min_seconds) {
  std::vector<Episode> out;
  for (const auto& e : episodes) {
    if (e.kind != EpisodeKind::Puff || e.duration_ms >= min_seconds * 1000.0) out.push_back(e);
  }
  return out;
}

/// Each episode lands whole on the local date of its start.
inline std::map<Date, std::vector<Episode>> bucket_by_day(const std::vector<Episode>& episodes,
                                                          const ZoneConfig& zone) {
  std::map<Date, std::vector<Episode>> out;
  for (auto e : episodes) {
    e.date = zone.date_of(e.start.posix_seconds);
    out[e.date].push_back(e);
  }
  return out;
}

inline bool overlaps(const Episode& a, const Episode& b) {
  return a.start <= b.end && b.start <= a.end;
}

/// HIGH when the puff's closed interval meets any touch interval.
inline std::vector<Episode> classify_confidence(const std::vector<Episode>& puffs,
                                                const std::vector<Episode>& touches) {
  std::vector<Episode> out = puffs;
  for (auto& p : out) {
    if (p.kind != EpisodeKind::Puff) continue;
    bool hit = std::any_of(touches.begin(), touches.end(), [&](const Episode& t) {
      return t.kind == EpisodeKind::Touch && overlaps(p, t);
    });
    p.confidence = hit ? Confidence::High : Confidence::Standard;
  }
  return out;
}

inline std::vector<Episode> only(const std::vector<Episode>& episodes, EpisodeKind kind) {
  std::vector<Episode> out;
  std::copy_if(episodes.begin(), episodes.end(), std::back_inserter(out),
               [&](const Episode& e) { return e.kind == kind; });
  return out;
}

}  // namespace friends
