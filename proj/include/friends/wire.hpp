#pragma once

// Line protocol spoken between the host and a device. One LF-terminated
// ASCII line per message:
//
//   host -> device   PING | SETT <16 hex> | GETT | ERAS | DATA
//   device -> host   PONG | OK | TIME <12 hex> | REC <16 hex>... | END <n> | ERR <code>
//
// SETT carries the instant as 4 zero digits, 8 digits of seconds and 4 of
// ticks. TIME drops the zero padding.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "friends/codec.hpp"

namespace friends::wire {

struct Ping {};
struct SetTime {
  DeviceInstant instant;
};
struct GetTime {};
struct Erase {};
struct Data {};

using Command = std::variant<Ping, SetTime, GetTime, Erase, Data>;

struct Pong {};
struct Ok {};
struct Time {
  DeviceInstant instant;
};
struct Rec {
  std::uint64_t word = 0;
};
struct End {
  std::size_t count = 0;
};
struct Err {
  int code = 0;
};

using Response = std::variant<Pong, Ok, Time, Rec, End, Err>;

/// Device-side error codes.
inline constexpr int kErrUnknownCommand = 1;
inline constexpr int kErrBadArgument = 2;

inline std::string instant_hex12(DeviceInstant t) {
  return detail::to_hex((static_cast<std::uint64_t>(t.posix_seconds) << 16) | t.fraction_ticks, 12);
}

inline std::string format(const Command& c) {
  struct V {
    std::string operator()(const Ping&) const { return "PING"; }
    std::string operator()(const SetTime& s) const { return "SETT 0000" + instant_hex12(s.instant); }
    std::string operator()(const GetTime&) const { return "GETT"; }
    std::string operator()(const Erase&) const { return "ERAS"; }
    std::string operator()(const Data&) const { return "DATA"; }
  };
  return std::visit(V{}, c);
}

inline std::string format(const Response& r) {
  struct V {
    std::string operator()(const Pong&) const { return "PONG"; }
    std::string operator()(const Ok&) const { return "OK"; }
    std::string operator()(const Time& t) const { return "TIME " + instant_hex12(t.instant); }
    std::string operator()(const Rec& r) const { return "REC " + format_record(r.word); }
    std::string operator()(const End& e) const { return "END " + std::to_string(e.count); }
    std::string operator()(const Err& e) const { return "ERR " + std::to_string(e.code); }
  };
  return std::visit(V{}, r);
}

namespace detail_ {

inline std::optional<std::size_t> parse_decimal(std::string_view s) {
  if (s.empty() || s.size() > 18) return std::nullopt;
  std::size_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  return v;
}

inline DeviceInstant instant_from_word(std::uint64_t w) {
  return DeviceInstant{static_cast<std::uint32_t>(w >> 16), static_cast<std::uint16_t>(w & 0xFFFF)};
}

}  // namespace detail_

/// Strict parse; nullopt for anything not in the grammar.
inline std::optional<Command> parse_command(std::string_view line) {
  if (line == "PING") return Ping{};
  if (line == "GETT") return GetTime{};
  if (line == "ERAS") return Erase{};
  if (line == "DATA") return Data{};
  if (line.starts_with("SETT ")) {
    auto w = detail::parse_hex(line.substr(5), 16);
    if (!w || (*w >> 48) != 0) return std::nullopt;
    return SetTime{detail_::instant_from_word(*w)};
  }
  return std::nullopt;
}

inline std::optional<Response> parse_response(std::string_view line) {
  if (line == "PONG") return Pong{};
  if (line == "OK") return Ok{};
  if (line.starts_with("TIME ")) {
    auto w = detail::parse_hex(line.substr(5), 12);
    if (!w) return std::nullopt;
    return Time{detail_::instant_from_word(*w)};
  }
  if (line.starts_with("REC ")) {
    auto w = detail::parse_hex(line.substr(4), 16);
    if (!w) return std::nullopt;
    return Rec{*w};
  }
  if (line.starts_with("END ")) {
    auto n = detail_::parse_decimal(line.substr(4));
    if (!n) return std::nullopt;
    return End{*n};
  }
  if (line.starts_with("ERR ")) {
    auto n = detail_::parse_decimal(line.substr(4));
    if (!n) return std::nullopt;
    return Err{static_cast<int>(*n)};
  }
  return std::nullopt;
}

}  // namespace friends::wire
