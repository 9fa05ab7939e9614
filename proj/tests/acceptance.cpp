// Acceptance suite: one PASS/FAIL line per criterion, each with its time budget.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "friends/friends.hpp"

using namespace friends;
namespace fs = std::filesystem;

namespace {

const ZoneConfig kCst = ZoneConfig::fixed(-6 * 3600);

struct Outcome {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
  void check(bool cond, const std::string& why) {
    if (!cond) fail(why);
  }
};

LinkOptions fast_options() {
  LinkOptions o;
  o.handshake_timeout = std::chrono::milliseconds(500);
  o.reply_timeout = std::chrono::milliseconds(500);
  o.data_line_timeout = std::chrono::milliseconds(1000);
  return o;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("friends-acceptance-" + std::to_string(::getpid()) + "-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------

Outcome golden_records() {
  Outcome o;
  const std::pair<const char*, const char*> rows[] = {
      {"100065CA42C88D44", "PUFF_ON 2024-02-12 10:09:44.55"},
      {"200065CA42C9AAE0", "PUFF_OFF 2024-02-12 10:09:45.67"},
      {"50000000000001F9", "TEMPERATURE_ON 505"},
      {"6000000000000104", "TEMPERATURE_OFF 260"},
      {"300065CA42CE04A0", "TOUCH_ON 2024-02-12 10:09:50.02"},
      {"400065CA42D007CD", "TOUCH_OFF 2024-02-12 10:09:52.03"},
  };
  for (const auto& [raw, want] : rows) {
    auto got = render_converted_line(parse_record(raw), kCst);
    o.check(got == want, std::string(raw) + " -> '" + got + "'");
  }
  return o;
}

Outcome fraction_semantics() {
  Outcome o;
  for (std::uint32_t t = 0; t < 65536; ++t) {
    long cs = std::lround(t * 100.0 / 65536.0);
    int sec = 0;
    if (cs == 100) {
      cs = 0;
      sec = 1;
    }
    char want[40];
    std::snprintf(want, sizeof want, "1970-01-01 00:00:%02d.%02ld", sec, cs);
    auto got = format_instant({0u, static_cast<std::uint16_t>(t)}, ZoneConfig::utc());
    if (got != want) {
      o.fail("tick " + std::to_string(t) + ": " + got + " vs " + want);
      break;
    }
  }
  // carry across minute, day and year
  o.check(format_instant({1704067199u, 65535}, ZoneConfig::utc()) == "2024-01-01 00:00:00.00",
          "carry across year boundary");
  return o;
}

Outcome codec_round_trip() {
  Outcome o;
  std::mt19937_64 rng(20240212);
  const auto& kinds = kAllEventKinds;
  for (int i = 0; i < 10000 && o.ok; ++i) {
    auto k = kinds[rng() % kinds.size()];
    DecodedEvent ev = is_temperature(k)
                          ? DecodedEvent::temperature(k, {static_cast<std::uint16_t>(rng() % 1025)})
                          : DecodedEvent::timed(k, {static_cast<std::uint32_t>(rng()),
                                                    static_cast<std::uint16_t>(rng())});
    auto text = encode_record(ev);
    if (!(parse_record(text) == ev)) o.fail("decode(encode(e)) != e for " + text);
    // canonical text survives decode then encode
    if (encode_record(parse_record(text)) != text) o.fail("encode(decode(s)) != s for " + text);
    if (!is_temperature(k)) {
      auto w = encode_word(ev);
      if (format_record(w) != text || parse_raw(text).word != w) o.fail("word/text mismatch " + text);
    }
  }
  return o;
}

Outcome validation_day_desk_scale() {
  Outcome o;
  auto log = generate(validation_day_scenario());
  EmulatedDevice dev;
  dev.load_flash(log.records);
  EmulatorServer server(dev);
  auto ep = server.start_tcp();
  DeviceLink link(fast_options());
  link.connect(ep);
  auto lines = link.read_data();
  link.disconnect();
  auto decoded = decode_stream(lines);
  o.check(decoded.rejects.empty(), "rejected lines in pulled data");

  FilterConfig raw;
  raw.min_puff_ms = 0;
  auto all = analyze(decoded.events, raw, kCst);
  auto raw_count = only(all.episodes, EpisodeKind::Puff).size();
  o.check(raw_count == 89, "raw puff count " + std::to_string(raw_count));

  FilterConfig shown;
  shown.display_min_puff_s = 1.0;
  auto filtered = analyze(decoded.events, shown, kCst);
  auto puffs = only(filtered.episodes, EpisodeKind::Puff);
  o.check(puffs.size() == 72, "filtered puff count " + std::to_string(puffs.size()));
  double total = 0;
  for (const auto& p : puffs) total += p.duration_s();
  double truth = log.true_puff_seconds();
  double missing = std::abs(truth - total) / truth;
  char buf[96];
  std::snprintf(buf, sizeof buf, "total %.2f s vs truth %.2f s (%.3f%% off)", total, truth, missing * 100);
  o.check(missing <= 0.005, buf);
  if (o.ok) o.detail = "raw 89, filtered 72, " + std::string(buf);
  return o;
}

Outcome noise_filter_truth_table() {
  Outcome o;
  int cases = 0;
  for (bool therm : {false, true}) {
    for (double ms : {150.0, 200.0, 250.0}) {
      for (int delta : {8, 10, 12}) {
        const bool long_puff = ms > 200.0;
        const bool big_swing = delta > 10;
        // swing only rescues short puffs, and only in thermistor mode
        const bool want = therm ? (long_puff || big_swing) : long_puff;

        PuffWithTemps p;
        p.episode = make_episode(EpisodeKind::Puff, {1000u, 0},
                                 DeviceInstant::from_ticks((1000ll << 16) +
                                                           std::llround(ms * 65.536)),
                                 ZoneConfig::utc());
        p.temp_on = TemperatureReading{static_cast<std::uint16_t>(260 + delta)};
        p.temp_off = TemperatureReading{260};
        FilterConfig cfg;
        cfg.use_thermistor = therm;
        bool kept = !fuse_and_filter({p}, cfg).empty();
        if (kept != want) {
          o.fail("thermistor=" + std::to_string(therm) + " ms=" + std::to_string(ms) +
                 " delta=" + std::to_string(delta));
        }
        ++cases;
      }
    }
  }
  if (o.ok) o.detail = std::to_string(cases) + " cases incl. boundaries";
  return o;
}

Outcome pairing_oracle() {
  Outcome o;
  const EventKind alphabet[] = {EventKind::PuffOn, EventKind::PuffOff, EventKind::TouchOn,
                                EventKind::TouchOff};
  std::size_t checked = 0;
  for (int len = 0; len <= 8 && o.ok; ++len) {
    std::size_t total = std::size_t{1} << (2 * len);
    for (std::size_t code = 0; code < total && o.ok; ++code) {
      std::vector<DecodedEvent> ev;
      std::size_t c = code;
      for (int i = 0; i < len; ++i, c /= 4) {
        ev.push_back(DecodedEvent::timed(alphabet[c % 4], {static_cast<std::uint32_t>(100 + i), 0}));
      }
      // brute force: within each kind's subsequence, adjacent ON,OFF is a pair
      std::set<std::pair<std::size_t, std::size_t>> want_pairs;
      std::set<std::size_t> want_orphans;
      for (auto [on, off] : {std::pair{EventKind::PuffOn, EventKind::PuffOff},
                             std::pair{EventKind::TouchOn, EventKind::TouchOff}}) {
        std::vector<std::size_t> sub;
        for (std::size_t i = 0; i < ev.size(); ++i) {
          if (ev[i].kind() == on || ev[i].kind() == off) sub.push_back(i);
        }
        std::set<std::size_t> used;
        for (std::size_t j = 0; j + 1 < sub.size(); ++j) {
          if (ev[sub[j]].kind() == on && ev[sub[j + 1]].kind() == off) {
            want_pairs.insert({sub[j], sub[j + 1]});
            used.insert(sub[j]);
            used.insert(sub[j + 1]);
          }
        }
        for (auto i : sub) {
          if (!used.count(i)) want_orphans.insert(i);
        }
      }
      auto got = pair_episodes(ev);
      std::set<std::pair<std::size_t, std::size_t>> got_pairs;
      for (const auto& e : got.episodes) got_pairs.insert({e.on_index, e.off_index});
      std::set<std::size_t> got_orphans;
      for (const auto& x : got.orphans) got_orphans.insert(x.index);
      if (got_pairs != want_pairs || got_orphans != want_orphans) {
        o.fail("mismatch at length " + std::to_string(len) + " code " + std::to_string(code));
      }
      ++checked;
    }
  }
  if (o.ok) o.detail = std::to_string(checked) + " sequences";
  return o;
}

double hms(const char* text) {
  int h = 0, m = 0;
  double s = 0;
  std::sscanf(text, "%d:%d:%lf", &h, &m, &s);
  return h * 3600.0 + m * 60.0 + s;
}

DriftReport drift_of(const std::vector<std::array<const char*, 4>>& rows, double ref_shift) {
  std::vector<TimedPair> ref, dev;
  for (const auto& r : rows) {
    ref.push_back({hms(r[0]) + ref_shift, hms(r[1]) + ref_shift});
    dev.push_back({hms(r[2]), hms(r[3])});
  }
  return compute_drift(ref, dev);
}

Outcome drift_report() {
  Outcome o;
  auto midnight = drift_of({{"01:37:02.13", "01:37:04.50", "01:37:01.18", "01:37:03.37"},
                            {"01:40:31.96", "01:40:35.13", "01:40:30.61", "01:40:34.17"},
                            {"01:44:37.26", "01:44:41.60", "01:44:36.98", "01:44:40.36"}},
                           0);
  // reference clock read on a 12-hour face in the evening session
  auto evening = drift_of({{"09:04:31.45", "09:04:33.92", "21:04:25.17", "21:04:27.33"},
                           {"09:17:01.90", "09:17:04.99", "21:16:55.26", "21:16:58.41"},
                           {"09:20:45.24", "09:20:49.48", "21:20:38.47", "21:20:42.61"}},
                          12 * 3600);
  o.check(std::abs(midnight.display_s - 1.0) <= 0.5, "midnight " + std::to_string(midnight.display_s));
  o.check(std::abs(evening.display_s - 7.0) <= 0.5, "evening " + std::to_string(evening.display_s));
  char buf[96];
  std::snprintf(buf, sizeof buf, "midnight %.3f -> %.1f s, evening %.3f -> %.1f s",
                midnight.approx_time_diff_s, midnight.display_s, evening.approx_time_diff_s,
                evening.display_s);
  if (o.ok) o.detail = buf;
  return o;
}

LinkErrc error_of(const std::function<void()>& f, Outcome& o, const std::string& what) {
  try {
    f();
  } catch (const LinkError& e) {
    return e.code();
  }
  o.fail(what + ": no error raised");
  return LinkErrc::Timeout;
}

Outcome protocol_conformance() {
  Outcome o;
  const std::vector<std::string> golden = {"100065CA42C88D44", "200065CA42C9AAE0",
                                           "50000000000001F9", "6000000000000104",
                                           "300065CA42CE04A0", "400065CA42D007CD"};
  std::vector<std::uint64_t> words;
  for (const auto& s : golden) words.push_back(parse_raw(s).word);

  {
    EmulatedDevice dev;
    dev.load_flash(words);
    EmulatorServer server(dev);
    auto ep = server.start_tcp();
    DeviceLink link(fast_options());
    link.connect(ep);  // PING/PONG
    DeviceInstant t{1707754184u, 0x8D44};
    link.set_time(t);
    auto back = link.read_time();
    o.check(std::abs(to_unix_seconds(back) - to_unix_seconds(t)) < 1.0, "GETT after SETT");
    auto first = link.read_data();
    auto second = link.read_data();
    o.check(first == golden, "DATA not byte-identical to flash");
    o.check(second == first, "second DATA differs");
    link.erase_flash();
    o.check(link.read_data().empty(), "flash not empty after ERAS");
    o.check(dev.handle("NOPE") == std::vector<std::string>{"ERR 1"}, "unknown command reply");
  }
  {
    EmulatedDevice dev;
    EmulatorServer server(dev);
    auto ep = server.start_tcp();
    server.stop();
    DeviceLink link(fast_options());
    auto e = error_of([&] { link.connect(ep); }, o, "dead endpoint");
    o.check(e == LinkErrc::NoHandshake, "dead endpoint gave " + std::string(to_string(e)));
  }
  {
    EmulatedDevice dev;
    dev.load_flash(words);
    ServeOptions opts;
    opts.truncate_data_after = 4;
    EmulatorServer server(dev, opts);
    auto ep = server.start_tcp();
    DeviceLink link(fast_options());
    link.connect(ep);
    try {
      link.read_data();
      o.fail("truncated stream: no error raised");
    } catch (const LinkError& e) {
      o.check(e.code() == LinkErrc::AbortedByPeer, "truncated stream gave " + std::string(to_string(e.code())));
      o.check(e.partial_count() == 4, "partial count " + std::to_string(e.partial_count()));
    }
  }
  if (o.ok) o.detail = "PING SETT GETT ERAS DATA, dead endpoint, truncation, double read";
  return o;
}

Outcome plot_emission() {
  Outcome o;
  auto dir = scratch("plots");
  const std::uint32_t d1 = 1707717600u, d2 = d1 + 86400u;
  std::vector<DecodedEvent> ev = {
      DecodedEvent::timed(EventKind::TouchOn, {d1 + 35999, 0}),
      DecodedEvent::timed(EventKind::PuffOn, {d1 + 36000, 0}),
      DecodedEvent::timed(EventKind::PuffOff, {d1 + 36003, 0}),
      DecodedEvent::temperature(EventKind::TemperatureOn, {505}),
      DecodedEvent::temperature(EventKind::TemperatureOff, {260}),
      DecodedEvent::timed(EventKind::TouchOff, {d1 + 36004, 0}),
      DecodedEvent::timed(EventKind::PuffOn, {d1 + 40000, 0}),  // 0.5 s, hidden at 1 s
      DecodedEvent::timed(EventKind::PuffOff, {d1 + 40000, 32768}),
      DecodedEvent::timed(EventKind::PuffOn, {d2 + 7200, 0}),
      DecodedEvent::timed(EventKind::PuffOff, {d2 + 7202, 0}),
  };
  std::string raw;
  for (const auto& e : ev) raw += encode_record(e) + "\n";
  app::write_file(dir / "two-days.hex", raw);

  app::RunConfig cfg;
  cfg.zone = kCst;
  cfg.input = dir / "two-days.hex";
  cfg.filter.display_min_puff_s = 1.0;
  std::ostringstream diag;
  cfg.out = dir / "a";
  auto a = app::cmd_plot(cfg, diag);
  cfg.out = dir / "b";
  auto b = app::cmd_plot(cfg, diag);
  o.check(a.size() == 2, std::to_string(a.size()) + " plot files");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) files += e.is_regular_file();
  o.check(files == 2, "directory holds " + std::to_string(files) + " files");
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    auto sa = app::read_file(a[i]);
    o.check(sa == app::read_file(b[i]), "bytes differ for " + a[i].filename().string());
    for (auto track : {">Puff<", ">Temperature<", ">Touch<"}) {
      o.check(sa.find(track) != std::string::npos, std::string("missing track ") + track);
    }
    o.check(sa.find("500.000 ms") == std::string::npos, "filtered puff drawn");
  }
  if (a.size() == 2) {
    o.check(a[0].filename() == "2024-02-12.svg" && a[1].filename() == "2024-02-13.svg", "file names");
    auto day1 = app::read_file(a[0]);
    o.check(day1.find("class=\"touch\"") != std::string::npos, "touch not drawn");
    o.check(day1.find("class=\"temperature on\"") != std::string::npos, "temperature not drawn");
  }
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"golden-record-vectors", 1, golden_records},
      {"fraction-semantics", 5, fraction_semantics},
      {"codec-round-trip", 5, codec_round_trip},
      {"validation-day-desk-scale", 10, validation_day_desk_scale},
      {"noise-filter-truth-table", 1, noise_filter_truth_table},
      {"pairing-oracle-equivalence", 30, pairing_oracle},
      {"drift-report", 1, drift_report},
      {"protocol-conformance", 10, protocol_conformance},
      {"per-day-plot-emission", 5, plot_emission},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      o.fail("took " + std::to_string(secs) + " s, budget " + std::to_string(c.budget_s) + " s");
    }
    std::printf("%s  %-28s %8.3f s  %s\n", o.ok ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
    failed += !o.ok;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed,
              std::size(criteria));
  return failed == 0 ? 0 : 1;
}
