#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace friends {

/// Calendar date in the rendering zone.
using Date = std::chrono::year_month_day;

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

inline std::optional<Date> parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  std::string s(text);
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) return std::nullopt;
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) return std::nullopt;
  return date;
}

/// Broken-down local wall time.
struct CivilTime {
  Date date;
  int hour = 0;
  int minute = 0;
  int second = 0;
};

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

/// Time zone used when rendering instants. Storage is always UTC.
///
/// A zone is either a fixed UTC offset ("UTC", "UTC-06:00", "+05:30") or a
/// named zone ("America/Chicago", or "local" for the host zone). Named zones
/// are resolved through the C library, serialized behind a process-wide lock
/// because the lookup swaps the TZ environment variable.
class ZoneConfig {
 public:
  static ZoneConfig utc() { return fixed(0); }
  static ZoneConfig fixed(int offset_seconds) {
    ZoneConfig z;
    z.offset_s_ = offset_seconds;
    return z;
  }
  static ZoneConfig host() {
    ZoneConfig z;
    z.name_ = "local";
    return z;
  }

  /// Throws std::invalid_argument on an unrecognized zone.
  static ZoneConfig parse(std::string_view text) {
    std::string s(text);
    if (s.empty() || s == "local") return host();
    if (s == "UTC" || s == "Z" || s == "GMT") return utc();
    std::string_view rest = s;
    if (rest.starts_with("UTC")) rest.remove_prefix(3);
    if (!rest.empty() && (rest[0] == '+' || rest[0] == '-' || rest[0] == '\xe2')) {
      int sign = 1;
      if (rest[0] == '-') sign = -1;
      if (rest.starts_with("\xe2\x88\x92")) {  // U+2212 minus sign
        sign = -1;
        rest.remove_prefix(2);
      }
      rest.remove_prefix(1);
      int hh = 0, mm = 0;
      std::string r(rest);
      char tail = 0;
      int n = std::sscanf(r.c_str(), "%d:%d%c", &hh, &mm, &tail);
      if (n == 1 && r.size() == 4) {
        n = std::sscanf(r.c_str(), "%2d%2d%c", &hh, &mm, &tail);
      }
      if ((n == 1 || n == 2) && hh >= 0 && hh <= 18 && mm >= 0 && mm < 60) {
        return fixed(sign * (hh * 3600 + mm * 60));
      }
      throw std::invalid_argument("unrecognized zone offset: " + s);
    }
    std::error_code ec;
    if (s.find("..") == std::string::npos &&
        std::filesystem::is_regular_file(std::filesystem::path("/usr/share/zoneinfo") / s, ec)) {
      ZoneConfig z;
      z.name_ = s;
      return z;
    }
    throw std::invalid_argument("unknown zone: " + s);
  }

  bool is_fixed() const { return !name_.has_value(); }

  std::string label() const {
    if (name_) return *name_;
    if (offset_s_ == 0) return "UTC";
    int a = offset_s_ < 0 ? -offset_s_ : offset_s_;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "UTC%c%02d:%02d", offset_s_ < 0 ? '-' : '+', a / 3600,
                  (a % 3600) / 60);
    return buf;
  }

  /// Offset from UTC in seconds at the given instant.
  int offset_at(std::int64_t unix_seconds) const {
    if (!name_) return offset_s_;
    std::lock_guard<std::mutex> lock(tz_mutex());
    std::time_t t = static_cast<std::time_t>(unix_seconds);
    std::tm tm{};
    if (*name_ == "local") {
      localtime_r(&t, &tm);
      return static_cast<int>(tm.tm_gmtoff);
    }
    const char* old = std::getenv("TZ");
    std::optional<std::string> saved;
    if (old) saved = old;
    ::setenv("TZ", name_->c_str(), 1);
    ::tzset();
    localtime_r(&t, &tm);
    if (saved) {
      ::setenv("TZ", saved->c_str(), 1);
    } else {
      ::unsetenv("TZ");
    }
    ::tzset();
    return static_cast<int>(tm.tm_gmtoff);
  }

  /// Local seconds (unix seconds shifted by the zone offset).
  std::int64_t to_local_seconds(std::int64_t unix_seconds) const {
    return unix_seconds + offset_at(unix_seconds);
  }

  CivilTime civil(std::int64_t unix_seconds) const {
    std::int64_t local = to_local_seconds(unix_seconds);
    std::int64_t days = floor_div(local, 86400);
    std::int64_t sod = local - days * 86400;
    CivilTime c;
    c.date = Date{std::chrono::sys_days{std::chrono::days{days}}};
    c.hour = static_cast<int>(sod / 3600);
    c.minute = static_cast<int>((sod % 3600) / 60);
    c.second = static_cast<int>(sod % 60);
    return c;
  }

  Date date_of(std::int64_t unix_seconds) const { return civil(unix_seconds).date; }

  /// Unix seconds of local midnight starting `date`.
  std::int64_t midnight(const Date& date) const {
    std::int64_t local = std::chrono::sys_days{date}.time_since_epoch().count() * 86400LL;
    // Two passes settle the offset for named zones across transitions.
    std::int64_t guess = local - offset_at(local);
    return local - offset_at(guess);
  }

  friend bool operator==(const ZoneConfig&, const ZoneConfig&) = default;

 private:
  static std::mutex& tz_mutex() {
    static std::mutex m;
    return m;
  }

  int offset_s_ = 0;
  std::optional<std::string> name_;
};

}  // namespace friends
