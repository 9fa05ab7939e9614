#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "friends/analysis.hpp"
#include "friends/codec.hpp"
#include "friends/emulator.hpp"
#include "friends/link.hpp"
#include "friends/metrics.hpp"
#include "friends/plot.hpp"

namespace friends::app {

/// Process exit codes.
enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kDevice = 3 };

class AppError : public std::runtime_error {
 public:
  AppError(int exit_code, const std::string& message)
      : std::runtime_error(message), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

struct RunConfig {
  ZoneConfig zone = ZoneConfig::host();
  FilterConfig filter;
  std::filesystem::path input;
  std::filesystem::path out;
  std::string port;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AppError(kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw AppError(kIo, "cannot write " + path.string());
  out << content;
  if (!out) throw AppError(kIo, "write failed for " + path.string());
}

inline DecodedStream load_raw(const std::filesystem::path& path) {
  return decode_stream(split_lines(read_file(path)));
}

inline void report_rejects(const DecodedStream& d, std::ostream& diag) {
  for (const auto& r : d.rejects) {
    diag << "warning: line " << r.line << ": " << to_string(r.error) << " \"" << r.text << "\"\n";
  }
  for (const auto& w : d.warnings) diag << "warning: line " << w.line << ": " << w.message << '\n';
}

inline std::string converted_text(const DecodedStream& d, const ZoneConfig& zone) {
  std::string out;
  for (const auto& e : d.events) {
    out += render_converted_line(e, zone);
    out += '\n';
  }
  return out;
}

/// Raw record file -> converted file (or `sink` when no path is given).
inline DecodedStream cmd_decode(const std::filesystem::path& raw,
                                const std::optional<std::filesystem::path>& out,
                                const ZoneConfig& zone, std::ostream& sink, std::ostream& diag) {
  auto decoded = load_raw(raw);
  report_rejects(decoded, diag);
  if (decoded.events.empty() && !decoded.rejects.empty()) {
    throw AppError(kIo, "no valid records in " + raw.string());
  }
  auto text = converted_text(decoded, zone);
  if (out) {
    write_file(*out, text);
  } else {
    sink << text;
  }
  return decoded;
}

inline std::string metrics_text(const Analysis& a) { return metrics_document(a.metrics).dump(2) + "\n"; }

/// Writes <out>/episodes.csv and <out>/metrics.json.
inline Analysis cmd_analyze(const RunConfig& cfg, std::ostream& diag) {
  auto decoded = load_raw(cfg.input);
  report_rejects(decoded, diag);
  auto a = analyze(decoded.events, cfg.filter, cfg.zone);
  if (!a.pairing.orphans.empty()) {
    diag << "warning: " << a.pairing.orphans.size() << " unpaired ON/OFF records\n";
  }
  if (!a.unattached.empty()) {
    diag << "warning: " << a.unattached.size() << " temperature records not attached to an episode\n";
  }
  write_file(cfg.out / "episodes.csv", export_episode_table(a.episodes, cfg.zone));
  write_file(cfg.out / "metrics.json", metrics_text(a));
  return a;
}

/// One <date>.svg per day under cfg.out.
inline std::vector<std::filesystem::path> cmd_plot(const RunConfig& cfg, std::ostream& diag) {
  auto decoded = load_raw(cfg.input);
  report_rejects(decoded, diag);
  auto a = analyze(decoded.events, cfg.filter, cfg.zone);
  std::vector<std::filesystem::path> written;
  for (const auto& plot : build_day_plots(a, cfg.zone)) {
    auto path = cfg.out / (format_date(plot.date) + ".svg");
    write_file(path, render_svg(plot));
    written.push_back(path);
  }
  if (written.empty()) diag << "notice: no events to plot\n";
  return written;
}

inline std::string describe_instant(DeviceInstant t, const ZoneConfig& zone) {
  return wire::instant_hex12(t) + " " + format_instant(t, zone);
}

/// Parses "<seconds>[.<ticks>]" or "now".
inline DeviceInstant parse_instant_arg(const std::string& text) {
  if (text.empty() || text == "now") return host_now();
  auto dot = text.find('.');
  try {
    auto secs = std::stoull(text.substr(0, dot));
    unsigned long ticks = dot == std::string::npos ? 0 : std::stoul(text.substr(dot + 1));
    if (secs > 0xFFFFFFFFull || ticks > 0xFFFF) throw std::out_of_range("instant");
    return DeviceInstant{static_cast<std::uint32_t>(secs), static_cast<std::uint16_t>(ticks)};
  } catch (const std::exception&) {
    throw AppError(kUsage, "bad instant '" + text + "', expected <seconds>[.<ticks>] or now");
  }
}

struct DeviceRequest {
  std::string sub;  // ports | set-time | read-time | erase | start | pull
  std::string port;
  std::optional<std::string> time;  // set-time / start
  std::optional<std::filesystem::path> out;  // pull
  bool convert = false;  // pull: also write the converted file
  std::filesystem::path registry = default_port_registry();
  LinkOptions link;
};

/// One device-panel action. Returns the text shown to the operator.
inline std::string cmd_device(const DeviceRequest& req, const ZoneConfig& zone, std::ostream& diag) {
  if (req.sub == "ports") {
    std::string out;
    for (const auto& p : list_ports(req.registry)) out += p.system_name + "\t" + p.label + "\n";
    return out;
  }
  static const std::vector<std::string> known = {"set-time", "read-time", "erase", "start", "pull"};
  if (std::find(known.begin(), known.end(), req.sub) == known.end()) {
    throw AppError(kUsage, "unknown device command '" + req.sub + "'");
  }
  if (req.port.empty()) throw AppError(kUsage, "--port is required for device " + req.sub);
  if (req.sub == "pull" && !req.out) throw AppError(kUsage, "--out is required for device pull");

  DeviceLink link(req.link);
  try {
    link.connect(req.port);
    if (req.sub == "set-time") {
      auto t = req.time ? parse_instant_arg(*req.time) : host_now();
      link.set_time(t);
      return "OK " + describe_instant(t, zone) + "\n";
    }
    if (req.sub == "read-time") return "TIME " + describe_instant(link.read_time(), zone) + "\n";
    if (req.sub == "erase") {
      link.erase_flash();
      return "OK\n";
    }
    if (req.sub == "start") {
      auto t = req.time ? parse_instant_arg(*req.time) : host_now();
      link.start_collection(t);
      return "OK erased, clock " + describe_instant(t, zone) + "\n";
    }
    std::string raw;
    auto n = link.read_data([&](std::string_view line) {
      raw += line;
      raw += '\n';
    });
    write_file(*req.out, raw);
    std::string msg = std::to_string(n) + " records -> " + req.out->string() + "\n";
    if (req.convert) {
      auto conv = req.out->string() + ".converted.txt";
      std::ostringstream ignored;
      cmd_decode(*req.out, std::filesystem::path(conv), zone, ignored, diag);
      msg += "converted -> " + conv + "\n";
    }
    return msg;
  } catch (const LinkError& e) {
    throw AppError(kDevice, e.what());
  }
}

}  // namespace friends::app
