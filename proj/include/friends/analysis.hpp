#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "friends/codec.hpp"
#include "friends/metrics.hpp"
#include "friends/pipeline.hpp"

namespace friends {

/// Everything the batch pipeline derives from one decoded log.
struct Analysis {
  Pairing pairing;
  std::vector<UnattachedTemperature> unattached;
  std::vector<PuffWithTemps> kept;  // after fusion and display filter, stream order
  std::vector<Episode> episodes;    // episodes of `kept`, confidence assigned
  std::map<Date, std::vector<Episode>> days;
  std::vector<PTMetrics> metrics;
};

/// pair -> associate temperatures -> fuse/filter -> display filter ->
/// confidence -> bucket by day -> metrics.
inline Analysis analyze(const std::vector<DecodedEvent>& events, const FilterConfig& config,
                        const ZoneConfig& zone) {
  Analysis a;
  a.pairing = pair_episodes(events, zone);
  auto assoc = associate_temperatures(events, a.pairing.episodes);
  a.unattached = std::move(assoc.unattached);

  auto fused = fuse_and_filter_with_temps(assoc.entries, config);
  if (config.display_min_puff_s) {
    const double min_ms = *config.display_min_puff_s * 1000.0;
    std::erase_if(fused, [&](const PuffWithTemps& p) {
      return p.episode.kind == EpisodeKind::Puff && p.episode.duration_ms < min_ms;
    });
  }

  std::vector<Episode> touches;
  for (const auto& p : fused) {
    if (p.episode.kind == EpisodeKind::Touch) touches.push_back(p.episode);
  }
  for (auto& p : fused) {
    if (p.episode.kind == EpisodeKind::Puff) {
      p.episode = classify_confidence({p.episode}, touches).front();
    }
  }
  a.kept = std::move(fused);
  for (const auto& p : a.kept) a.episodes.push_back(p.episode);
  a.days = bucket_by_day(a.episodes, zone);
  a.metrics = compute_pt_metrics(a.days);
  return a;
}

inline nlohmann::json to_json(DeviceInstant t) {
  return nlohmann::json{{"posix_seconds", t.posix_seconds}, {"fraction_ticks", t.fraction_ticks}};
}

inline nlohmann::json to_json(const PuffWithTemps& p, const ZoneConfig& zone) {
  const auto& e = p.episode;
  nlohmann::json j{{"kind", std::string(to_string(e.kind))},
                   {"start", to_json(e.start)},
                   {"end", to_json(e.end)},
                   {"duration_ms", e.duration_ms},
                   {"date", format_date(e.date)},
                   {"range", format_instant(e.start, zone, false) + " to " +
                                 format_instant(e.end, zone, false)}};
  j["confidence"] = e.confidence ? nlohmann::json(std::string(to_string(*e.confidence)))
                                 : nlohmann::json(nullptr);
  j["temp_on"] = p.temp_on ? nlohmann::json(p.temp_on->raw_value) : nlohmann::json(nullptr);
  j["temp_off"] = p.temp_off ? nlohmann::json(p.temp_off->raw_value) : nlohmann::json(nullptr);
  return j;
}

}  // namespace friends
