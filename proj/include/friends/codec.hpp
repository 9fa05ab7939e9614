#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "friends/zone.hpp"

namespace friends {

/**
 * Event codes carried in the top 16 bits of a device record.
 *
 * Puff and touch records carry a timestamp; temperature records carry an
 * ADC reading and no time of their own.
 */
enum class EventKind : std::uint16_t {
  PuffOn = 0x1000,
  PuffOff = 0x2000,
  TouchOn = 0x3000,
  TouchOff = 0x4000,
  TemperatureOn = 0x5000,
  TemperatureOff = 0x6000,
};

inline constexpr std::array<EventKind, 6> kAllEventKinds = {
    EventKind::PuffOn,  EventKind::PuffOff,       EventKind::TouchOn,
    EventKind::TouchOff, EventKind::TemperatureOn, EventKind::TemperatureOff};

inline constexpr std::uint16_t event_code(EventKind k) { return static_cast<std::uint16_t>(k); }

inline constexpr std::optional<EventKind> kind_from_code(std::uint16_t code) {
  for (auto k : kAllEventKinds) {
    if (event_code(k) == code) return k;
  }
  return std::nullopt;
}

inline constexpr std::string_view kind_label(EventKind k) {
  switch (k) {
    case EventKind::PuffOn: return "PUFF_ON";
    case EventKind::PuffOff: return "PUFF_OFF";
    case EventKind::TouchOn: return "TOUCH_ON";
    case EventKind::TouchOff: return "TOUCH_OFF";
    case EventKind::TemperatureOn: return "TEMPERATURE_ON";
    case EventKind::TemperatureOff: return "TEMPERATURE_OFF";
  }
  return "UNKNOWN";
}

inline constexpr bool is_temperature(EventKind k) {
  return k == EventKind::TemperatureOn || k == EventKind::TemperatureOff;
}
inline constexpr bool is_on(EventKind k) {
  return k == EventKind::PuffOn || k == EventKind::TouchOn || k == EventKind::TemperatureOn;
}

inline constexpr std::uint32_t kTicksPerSecond = 65536;

/// Device clock reading: whole UTC seconds plus 1/65536 s ticks.
struct DeviceInstant {
  std::uint32_t posix_seconds = 0;
  std::uint16_t fraction_ticks = 0;

  /// Ticks since the epoch; fits comfortably in 48 bits.
  constexpr std::int64_t total_ticks() const {
    return (static_cast<std::int64_t>(posix_seconds) << 16) | fraction_ticks;
  }
  static constexpr DeviceInstant from_ticks(std::int64_t ticks) {
    return DeviceInstant{static_cast<std::uint32_t>(ticks >> 16),
                         static_cast<std::uint16_t>(ticks & 0xFFFF)};
  }

  friend constexpr auto operator<=>(const DeviceInstant&, const DeviceInstant&) = default;
};

/// Exact: 32 integer bits plus 16 fraction bits fit in a double mantissa.
inline constexpr double to_unix_seconds(DeviceInstant t) {
  return static_cast<double>(t.posix_seconds) +
         static_cast<double>(t.fraction_ticks) / static_cast<double>(kTicksPerSecond);
}

/// Nearest instant to a real number of unix seconds (ties round up).
inline DeviceInstant instant_from_seconds(double unix_seconds) {
  auto ticks = static_cast<std::int64_t>(unix_seconds * kTicksPerSecond + 0.5);
  if (ticks < 0) ticks = 0;
  return DeviceInstant::from_ticks(ticks);
}

inline constexpr std::uint16_t kMaxTemperature = 1024;

struct TemperatureReading {
  std::uint16_t raw_value = 0;
  friend constexpr auto operator<=>(const TemperatureReading&, const TemperatureReading&) = default;
};

/// One decoded record. The payload alternative is fixed by the kind.
class DecodedEvent {
 public:
  DecodedEvent() = default;

  static DecodedEvent timed(EventKind kind, DeviceInstant at) {
    if (is_temperature(kind)) throw std::invalid_argument("temperature events carry no instant");
    DecodedEvent e;
    e.kind_ = kind;
    e.payload_ = at;
    return e;
  }
  static DecodedEvent temperature(EventKind kind, TemperatureReading value) {
    if (!is_temperature(kind)) throw std::invalid_argument("timed event carries no temperature");
    if (value.raw_value > kMaxTemperature) throw std::invalid_argument("temperature above 1024");
    DecodedEvent e;
    e.kind_ = kind;
    e.payload_ = value;
    return e;
  }

  EventKind kind() const { return kind_; }
  std::optional<DeviceInstant> instant() const {
    if (auto p = std::get_if<DeviceInstant>(&payload_)) return *p;
    return std::nullopt;
  }
  std::optional<TemperatureReading> temperature() const {
    if (auto p = std::get_if<TemperatureReading>(&payload_)) return *p;
    return std::nullopt;
  }

  friend bool operator==(const DecodedEvent&, const DecodedEvent&) = default;

 private:
  EventKind kind_ = EventKind::PuffOn;
  std::variant<DeviceInstant, TemperatureReading> payload_{};
};

enum class CodecErrc { NonHexCharacter, WrongLength, UnknownEventCode, TemperatureOutOfRange };

inline constexpr std::string_view to_string(CodecErrc e) {
  switch (e) {
    case CodecErrc::NonHexCharacter: return "NonHexCharacter";
    case CodecErrc::WrongLength: return "WrongLength";
    case CodecErrc::UnknownEventCode: return "UnknownEventCode";
    case CodecErrc::TemperatureOutOfRange: return "TemperatureOutOfRange";
  }
  return "Unknown";
}

class CodecError : public std::runtime_error {
 public:
  CodecError(CodecErrc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}
  CodecErrc code() const { return code_; }

 private:
  CodecErrc code_;
};

/// A raw 64-bit record as stored in device flash.
struct RawRecord {
  std::uint64_t word = 0;
  std::optional<std::size_t> source_line;

  std::uint16_t code() const { return static_cast<std::uint16_t>(word >> 48); }
  bool valid() const { return kind_from_code(code()).has_value(); }
  friend bool operator==(const RawRecord& a, const RawRecord& b) { return a.word == b.word; }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\v\f";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

inline std::string to_hex(std::uint64_t v, int digits) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out(static_cast<std::size_t>(digits), '0');
  for (int i = digits - 1; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    v >>= 4;
  }
  return out;
}

/// Parses exactly `digits` hex characters; nullopt on any other input.
inline std::optional<std::uint64_t> parse_hex(std::string_view s, std::size_t digits) {
  if (s.size() != digits) return std::nullopt;
  std::uint64_t v = 0;
  for (char c : s) {
    int h = hex_value(c);
    if (h < 0) return std::nullopt;
    v = (v << 4) | static_cast<std::uint64_t>(h);
  }
  return v;
}

}  // namespace detail

inline RawRecord parse_raw(std::string_view text) {
  auto t = detail::trim(text);
  if (t.size() != 16) {
    throw CodecError(CodecErrc::WrongLength,
                     "expected 16 hex characters, got " + std::to_string(t.size()));
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (detail::hex_value(t[i]) < 0) {
      throw CodecError(CodecErrc::NonHexCharacter, "position " + std::to_string(i));
    }
  }
  return RawRecord{*detail::parse_hex(t, 16), std::nullopt};
}

/// Decodes one record word. The layout, most significant first, is
/// [code:16][posix seconds:32][fraction ticks:16]; temperature records keep
/// the ADC count in the low 16 bits and ignore the middle 32.
inline DecodedEvent decode_word(std::uint64_t word) {
  auto code = static_cast<std::uint16_t>(word >> 48);
  auto kind = kind_from_code(code);
  if (!kind) throw CodecError(CodecErrc::UnknownEventCode, detail::to_hex(code, 4));
  auto low = static_cast<std::uint16_t>(word & 0xFFFF);
  if (is_temperature(*kind)) {
    if (low > kMaxTemperature) {
      throw CodecError(CodecErrc::TemperatureOutOfRange, std::to_string(low));
    }
    return DecodedEvent::temperature(*kind, TemperatureReading{low});
  }
  auto secs = static_cast<std::uint32_t>((word >> 16) & 0xFFFFFFFFu);
  return DecodedEvent::timed(*kind, DeviceInstant{secs, low});
}

inline DecodedEvent parse_record(std::string_view text) { return decode_word(parse_raw(text).word); }

inline std::uint64_t encode_word(const DecodedEvent& e) {
  std::uint64_t word = static_cast<std::uint64_t>(event_code(e.kind())) << 48;
  if (auto t = e.instant()) {
    word |= static_cast<std::uint64_t>(t->posix_seconds) << 16;
    word |= t->fraction_ticks;
  } else if (auto temp = e.temperature()) {
    word |= temp->raw_value;
  }
  return word;
}

inline std::string format_record(std::uint64_t word) { return detail::to_hex(word, 16); }

inline std::string encode_record(const DecodedEvent& e) { return format_record(encode_word(e)); }

struct LineIssue {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct LineReject {
  std::size_t line = 0;  // 1-based
  CodecErrc error{};
  std::string text;
};

struct DecodedStream {
  std::vector<DecodedEvent> events;
  std::vector<std::size_t> event_lines;  // 1-based source line per event
  std::vector<LineReject> rejects;
  std::vector<LineIssue> warnings;
};

/// Decodes a record file line by line. Bad lines are collected, never fatal.
template <typename Range>
DecodedStream decode_stream(const Range& lines) {
  DecodedStream out;
  std::size_t n = 0;
  for (const auto& raw : lines) {
    ++n;
    std::string_view line{raw};
    if (detail::trim(line).empty()) continue;
    try {
      auto ev = parse_record(line);
      if (auto temp = ev.temperature(); temp && temp->raw_value == kMaxTemperature) {
        out.warnings.push_back({n, "temperature reading 1024 exceeds a 10-bit ADC range"});
      }
      out.events.push_back(ev);
      out.event_lines.push_back(n);
    } catch (const CodecError& err) {
      out.rejects.push_back({n, err.code(), std::string(detail::trim(line))});
    }
  }
  return out;
}

/// Splits text on LF, dropping a trailing CR from each line.
inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

/// Centiseconds of a tick fraction, nearest with ties away from zero.
/// May return 100; callers carry into the seconds field.
inline constexpr std::uint32_t centiseconds(std::uint16_t ticks) {
  return (static_cast<std::uint32_t>(ticks) * 100u + kTicksPerSecond / 2) / kTicksPerSecond;
}

/// "YYYY-MM-DD HH:MM:SS.cc" for an instant, with centisecond carry.
inline std::string format_instant(DeviceInstant t, const ZoneConfig& zone, bool with_date = true) {
  std::int64_t secs = t.posix_seconds;
  std::uint32_t cs = centiseconds(t.fraction_ticks);
  if (cs >= 100) {
    cs -= 100;
    ++secs;
  }
  auto c = zone.civil(secs);
  char buf[40];
  if (with_date) {
    std::snprintf(buf, sizeof(buf), "%s %02d:%02d:%02d.%02u", format_date(c.date).c_str(), c.hour,
                  c.minute, c.second, cs);
  } else {
    std::snprintf(buf, sizeof(buf), "%02d:%02d:%02d.%02u", c.hour, c.minute, c.second, cs);
  }
  return buf;
}

inline std::string render_converted_line(const DecodedEvent& e, const ZoneConfig& zone) {
  std::string out(kind_label(e.kind()));
  out += ' ';
  if (auto t = e.instant()) {
    out += format_instant(*t, zone);
  } else if (auto temp = e.temperature()) {
    out += std::to_string(temp->raw_value);
  }
  return out;
}

}  // namespace friends
