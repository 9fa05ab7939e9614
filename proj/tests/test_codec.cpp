#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "friends/codec.hpp"

using namespace friends;

namespace {

const ZoneConfig kCst = ZoneConfig::fixed(-6 * 3600);

// Reference records: raw -> converted line at UTC-06:00.
const std::vector<std::pair<std::string, std::string>> kGolden = {
    {"100065CA42C88D44", "PUFF_ON 2024-02-12 10:09:44.55"},
    {"200065CA42C9AAE0", "PUFF_OFF 2024-02-12 10:09:45.67"},
    {"50000000000001F9", "TEMPERATURE_ON 505"},
    {"6000000000000104", "TEMPERATURE_OFF 260"},
    {"300065CA42CE04A0", "TOUCH_ON 2024-02-12 10:09:50.02"},
    {"400065CA42D007CD", "TOUCH_OFF 2024-02-12 10:09:52.03"},
};

CodecErrc parse_error(const std::string& text) {
  try {
    parse_record(text);
  } catch (const CodecError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for " << text;
  return CodecErrc::WrongLength;
}

}  // namespace

TEST(EventKind, CodeMappingIsBijective) {
  std::vector<std::uint16_t> seen;
  for (auto k : kAllEventKinds) {
    auto back = kind_from_code(event_code(k));
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, k);
    seen.push_back(event_code(k));
  }
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(std::unique(seen.begin(), seen.end()), seen.end());
  EXPECT_FALSE(kind_from_code(0x7000));
  EXPECT_FALSE(kind_from_code(0x0000));
}

TEST(ParseRecord, PuffOnFields) {
  auto e = parse_record("100065CA42C88D44");
  EXPECT_EQ(e.kind(), EventKind::PuffOn);
  ASSERT_TRUE(e.instant());
  EXPECT_EQ(e.instant()->posix_seconds, 0x65CA42C8u);
  EXPECT_EQ(e.instant()->fraction_ticks, 0x8D44u);
  EXPECT_FALSE(e.temperature());
}

TEST(ParseRecord, TemperatureFields) {
  auto e = parse_record("50000000000001F9");
  EXPECT_EQ(e.kind(), EventKind::TemperatureOn);
  ASSERT_TRUE(e.temperature());
  EXPECT_EQ(e.temperature()->raw_value, 505);
  EXPECT_FALSE(e.instant());
}

TEST(ParseRecord, LowercaseAndWhitespaceAccepted) {
  EXPECT_EQ(parse_record("  100065ca42c88d44\r\n"), parse_record("100065CA42C88D44"));
}

TEST(ParseRecord, TemperatureIgnoresMiddleDigits) {
  auto e = parse_record("5000DEADBEEF0104");
  EXPECT_EQ(e.temperature()->raw_value, 260);
  EXPECT_EQ(encode_record(e), "5000000000000104");
}

TEST(ParseRecord, Errors) {
  EXPECT_EQ(parse_error("7000AAAA0000FFFF"), CodecErrc::UnknownEventCode);
  EXPECT_EQ(parse_error("100065CA42C88D4"), CodecErrc::WrongLength);
  EXPECT_EQ(parse_error("100065CA42C88D440"), CodecErrc::WrongLength);
  EXPECT_EQ(parse_error(""), CodecErrc::WrongLength);
  EXPECT_EQ(parse_error("100065CA42C88DZ4"), CodecErrc::NonHexCharacter);
  EXPECT_EQ(parse_error("1000 65CA42C88D4"), CodecErrc::NonHexCharacter);
  EXPECT_EQ(parse_error("5000000000000401"), CodecErrc::TemperatureOutOfRange);
}

TEST(ParseRecord, Temperature1024IsInclusiveUpperBound) {
  EXPECT_EQ(parse_record("6000000000000400").temperature()->raw_value, 1024);
}

TEST(EncodeRecord, GoldenExamples) {
  EXPECT_EQ(encode_record(DecodedEvent::timed(EventKind::PuffOff, {0x65CA42C9u, 0xAAE0})),
            "200065CA42C9AAE0");
  EXPECT_EQ(encode_record(DecodedEvent::temperature(EventKind::TemperatureOff, {260})),
            "6000000000000104");
}

TEST(EncodeRecord, RoundTripSeededRandom) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10000; ++i) {
    auto kind = kAllEventKinds[rng() % kAllEventKinds.size()];
    DecodedEvent e;
    if (is_temperature(kind)) {
      e = DecodedEvent::temperature(kind, {static_cast<std::uint16_t>(rng() % 1025)});
    } else {
      e = DecodedEvent::timed(kind, {static_cast<std::uint32_t>(rng()),
                                     static_cast<std::uint16_t>(rng())});
    }
    auto text = encode_record(e);
    ASSERT_EQ(text.size(), 16u);
    ASSERT_EQ(parse_record(text), e) << text;
    ASSERT_EQ(encode_record(parse_record(text)), text);
  }
}

TEST(DecoderInvariants, DecodeEncodeUppercases) {
  std::mt19937_64 rng(11);
  const char* hex = "0123456789abcdef";
  for (int i = 0; i < 2000; ++i) {
    auto kind = kAllEventKinds[rng() % kAllEventKinds.size()];
    std::string s = detail::to_hex(event_code(kind), 4);
    if (is_temperature(kind)) {
      s += "00000000" + detail::to_hex(rng() % 1025, 4);
    } else {
      for (int d = 0; d < 12; ++d) s += hex[rng() % 16];
    }
    std::string upper = s;
    for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    ASSERT_EQ(encode_record(parse_record(s)), upper);
  }
}

TEST(UnixSeconds, Examples) {
  EXPECT_EQ(to_unix_seconds({0, 0}), 0.0);
  // 0x65CA42C8 = 1707754184 and 0x8D44 = 36164, computed independently.
  EXPECT_EQ(0x65CA42C8u, 1707754184u);
  EXPECT_EQ(to_unix_seconds({0x65CA42C8u, 0x8D44}), 1707754184.0 + 36164.0 / 65536.0);
  EXPECT_NEAR(to_unix_seconds({0x65CA42C8u, 0x8D44}), 1707754184.55182, 1e-5);
  double whole = 0;
  EXPECT_EQ(std::modf(to_unix_seconds({123, 0x8000}), &whole), 0.5);
}

TEST(UnixSeconds, ExactForEveryFraction) {
  for (std::uint32_t t = 0; t < 65536; ++t) {
    double v = to_unix_seconds({0xFFFFFFFFu, static_cast<std::uint16_t>(t)});
    ASSERT_EQ(static_cast<std::int64_t>(v * 65536.0), (0xFFFFFFFFll << 16) + t);
  }
}

TEST(Render, GoldenVerbatim) {
  for (const auto& [raw, converted] : kGolden) {
    EXPECT_EQ(render_converted_line(parse_record(raw), kCst), converted);
  }
}

TEST(Render, EpochUnderUtc) {
  EXPECT_EQ(render_converted_line(parse_record("1000000000000000"), ZoneConfig::utc()),
            "PUFF_ON 1970-01-01 00:00:00.00");
}

TEST(Render, CentisecondCarryRollsOverMidnightAndYear) {
  // 1999-12-31 23:59:59 UTC plus 0xFFFF ticks rounds to the next second.
  auto e = DecodedEvent::timed(EventKind::TouchOff, {946684799u, 0xFFFF});
  EXPECT_EQ(render_converted_line(e, ZoneConfig::utc()), "TOUCH_OFF 2000-01-01 00:00:00.00");
}

// Independent route: the fraction t/65536 and its centisecond scale are
// exact in double, so std::round (ties away from zero) is the oracle.
TEST(Render, CentisecondsMatchRoundingOracleForAllTicks) {
  const std::uint32_t base = 1707754184u;  // 16:09:44 UTC
  for (std::uint32_t t = 0; t < 65536; ++t) {
    auto expect_cs = static_cast<int>(std::round(t * 100.0 / 65536.0));
    int expect_sec = 44;
    if (expect_cs == 100) {
      expect_cs = 0;
      expect_sec = 45;
    }
    char want[32];
    std::snprintf(want, sizeof(want), "16:09:%02d.%02d", expect_sec, expect_cs);
    auto got = format_instant({base, static_cast<std::uint16_t>(t)}, ZoneConfig::utc(), false);
    ASSERT_EQ(got, want) << "ticks " << t;
  }
}

TEST(Render, NamedZoneMatchesFixedOffsetInWinter) {
  auto chicago = ZoneConfig::parse("America/Chicago");
  for (const auto& [raw, converted] : kGolden) {
    EXPECT_EQ(render_converted_line(parse_record(raw), chicago), converted);
  }
}

TEST(Zone, ParseForms) {
  EXPECT_EQ(ZoneConfig::parse("UTC-06:00"), ZoneConfig::fixed(-21600));
  EXPECT_EQ(ZoneConfig::parse("-06:00"), ZoneConfig::fixed(-21600));
  EXPECT_EQ(ZoneConfig::parse("+0530"), ZoneConfig::fixed(19800));
  EXPECT_EQ(ZoneConfig::parse("UTC"), ZoneConfig::utc());
  EXPECT_EQ(ZoneConfig::parse("UTC-06:00").label(), "UTC-06:00");
  EXPECT_THROW(ZoneConfig::parse("Mars/Olympus"), std::invalid_argument);
  EXPECT_THROW(ZoneConfig::parse("UTC+99:00"), std::invalid_argument);
}

TEST(Zone, RenderingIsDeterministic) {
  auto z = ZoneConfig::parse("Europe/Berlin");
  DeviceInstant t{1720000000u, 1234};
  EXPECT_EQ(format_instant(t, z), format_instant(t, z));
  EXPECT_EQ(format_instant(t, z), "2024-07-03 11:46:40.02");
}

TEST(DecodeStream, GoldenHasNoRejects) {
  std::vector<std::string> lines;
  for (const auto& [raw, _] : kGolden) lines.push_back(raw);
  auto d = decode_stream(lines);
  EXPECT_EQ(d.events.size(), 6u);
  EXPECT_TRUE(d.rejects.empty());
  EXPECT_EQ(d.events[2].kind(), EventKind::TemperatureOn);
}

TEST(DecodeStream, Empty) {
  auto d = decode_stream(std::vector<std::string>{});
  EXPECT_TRUE(d.events.empty());
  EXPECT_TRUE(d.rejects.empty());
}

TEST(DecodeStream, CorruptLineIsReportedNotFatal) {
  std::vector<std::string> lines;
  for (int i = 0; i < 10; ++i) {
    lines.push_back(encode_record(DecodedEvent::timed(EventKind::PuffOn, {1000u + i, 0})));
  }
  lines.insert(lines.begin() + 4, "10006XCA42C88D44");
  lines.insert(lines.begin() + 2, "");
  auto d = decode_stream(lines);
  EXPECT_EQ(d.events.size(), 10u);
  ASSERT_EQ(d.rejects.size(), 1u);
  EXPECT_EQ(d.rejects[0].line, 6u);
  EXPECT_EQ(d.rejects[0].error, CodecErrc::NonHexCharacter);
  for (std::size_t i = 0; i < d.events.size(); ++i) {
    EXPECT_EQ(d.events[i].instant()->posix_seconds, 1000u + i);
  }
}

TEST(DecodeStream, NeverDropsValidRecordsAmidNoise) {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 200; ++round) {
    std::vector<std::string> lines;
    std::vector<DecodedEvent> expected;
    for (int i = 0; i < 30; ++i) {
      if (rng() % 3 == 0) {
        static const char* junk[] = {"zz", "7000AAAA0000FFFF", "12345", "50000000000FFFFF", "  "};
        lines.push_back(junk[rng() % 5]);
      } else {
        auto e = DecodedEvent::timed(EventKind::TouchOn, {static_cast<std::uint32_t>(rng()), 0});
        expected.push_back(e);
        lines.push_back(encode_record(e));
      }
    }
    ASSERT_EQ(decode_stream(lines).events, expected);
  }
}

TEST(DecodeStream, WarnsOn1024) {
  auto d = decode_stream(std::vector<std::string>{"5000000000000400"});
  EXPECT_EQ(d.events.size(), 1u);
  EXPECT_EQ(d.warnings.size(), 1u);
}

TEST(SplitLines, HandlesCrlf) {
  auto lines = split_lines("a\r\nb\nc");
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "a");
  EXPECT_EQ(lines[1], "b");
  EXPECT_EQ(lines[2], "c");
}
