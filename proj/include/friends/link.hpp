#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "friends/channel.hpp"
#include "friends/codec.hpp"
#include "friends/wire.hpp"

namespace friends {

struct PortDescriptor {
  std::string system_name;
  std::string label;
  friend bool operator==(const PortDescriptor&, const PortDescriptor&) = default;
};

enum class LinkState { Disconnected, Connected, Busy };

inline constexpr std::string_view to_string(LinkState s) {
  switch (s) {
    case LinkState::Disconnected: return "DISCONNECTED";
    case LinkState::Connected: return "CONNECTED";
    case LinkState::Busy: return "BUSY";
  }
  return "UNKNOWN";
}

enum class LinkErrc {
  PortUnavailable,
  NoHandshake,
  Timeout,
  Rejected,
  MalformedReply,
  AbortedByPeer,
  NotConnected,
  AlreadyConnected,
  Busy,
};

inline constexpr std::string_view to_string(LinkErrc e) {
  switch (e) {
    case LinkErrc::PortUnavailable: return "PortUnavailable";
    case LinkErrc::NoHandshake: return "NoHandshake";
    case LinkErrc::Timeout: return "Timeout";
    case LinkErrc::Rejected: return "Rejected";
    case LinkErrc::MalformedReply: return "MalformedReply";
    case LinkErrc::AbortedByPeer: return "AbortedByPeer";
    case LinkErrc::NotConnected: return "NotConnected";
    case LinkErrc::AlreadyConnected: return "AlreadyConnected";
    case LinkErrc::Busy: return "Busy";
  }
  return "Unknown";
}

class LinkError : public std::runtime_error {
 public:
  LinkError(LinkErrc code, const std::string& detail, std::size_t partial_count = 0)
      : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)),
        code_(code),
        partial_count_(partial_count) {}
  LinkErrc code() const { return code_; }
  /// Records delivered before a transfer was cut short.
  std::size_t partial_count() const { return partial_count_; }

 private:
  LinkErrc code_;
  std::size_t partial_count_;
};

struct LinkOptions {
  std::chrono::milliseconds handshake_timeout{2000};
  std::chrono::milliseconds reply_timeout{2000};
  std::chrono::milliseconds data_line_timeout{5000};
  SerialConfig serial;
};

/// Directory where running emulators advertise themselves as ports.
inline std::filesystem::path default_port_registry() {
  if (const char* dir = std::getenv("FRIENDS_PORT_REGISTRY"); dir && *dir) return dir;
  return std::filesystem::temp_directory_path() / "friends-ports";
}

/// USB serial adapters under /dev plus any registered emulators.
inline std::vector<PortDescriptor> list_ports(
    const std::filesystem::path& registry = default_port_registry(),
    const std::filesystem::path& dev_dir = "/dev") {
  namespace fs = std::filesystem;
  std::vector<PortDescriptor> out;
  std::error_code ec;
  if (fs::is_directory(dev_dir, ec)) {
    for (const auto& entry : fs::directory_iterator(dev_dir, ec)) {
      auto name = entry.path().filename().string();
      if (name.starts_with("ttyUSB") || name.starts_with("ttyACM")) {
        out.push_back({entry.path().string(), "USB serial (" + name + ")"});
      }
    }
  }
  if (fs::is_directory(registry, ec)) {
    for (const auto& entry : fs::directory_iterator(registry, ec)) {
      if (entry.path().extension() != ".port") continue;
      std::ifstream in(entry.path());
      auto doc = nlohmann::json::parse(in, nullptr, false);
      if (doc.is_discarded() || !doc.contains("system_name")) continue;
      auto sys = doc["system_name"].get<std::string>();
      if (sys.empty()) continue;
      out.push_back({sys, doc.value("label", sys)});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.system_name < b.system_name; });
  return out;
}

/**
 * Host side of the device workflow.
 *
 * Exactly one command is in flight at a time; a second call made while one
 * is running (for example from inside a read_data sink) fails with Busy.
 * Every command waits for its terminating reply before returning. A timeout
 * or a dropped stream leaves the link disconnected.
 */
class DeviceLink {
 public:
  explicit DeviceLink(LinkOptions options = {}) : options_(options) {}

  LinkState state() const {
    if (busy_.load()) return LinkState::Busy;
    return channel_.is_open() ? LinkState::Connected : LinkState::Disconnected;
  }
  const std::string& port() const { return port_; }

  void connect(const std::string& port) {
    if (busy_.load()) throw LinkError(LinkErrc::Busy, "connect");
    if (channel_.is_open()) throw LinkError(LinkErrc::AlreadyConnected, port_);
    Endpoint ep;
    try {
      ep = Endpoint::parse(port);
    } catch (const std::invalid_argument& e) {
      throw LinkError(LinkErrc::PortUnavailable, e.what());
    }
    UniqueFd fd;
    if (ep.type == Endpoint::Type::Tcp) {
      fd = connect_tcp(ep.host, ep.port, options_.handshake_timeout);
      if (!fd) throw LinkError(LinkErrc::NoHandshake, "no device answering at " + port);
    } else {
      fd = open_serial(ep.path, options_.serial);
      if (!fd) throw LinkError(LinkErrc::PortUnavailable, port);
    }
    channel_ = LineChannel(std::move(fd));
    port_ = port;
    try {
      Guard g(*this);
      auto reply = exchange(wire::Ping{}, options_.handshake_timeout);
      if (!std::holds_alternative<wire::Pong>(reply)) {
        throw LinkError(LinkErrc::NoHandshake, "unexpected reply to PING");
      }
    } catch (const LinkError& e) {
      drop();
      if (e.code() == LinkErrc::NoHandshake) throw;
      throw LinkError(LinkErrc::NoHandshake, e.what());
    }
  }

  void disconnect() {
    if (busy_.load()) throw LinkError(LinkErrc::Busy, "disconnect");
    drop();
  }

  void set_time(DeviceInstant instant) {
    Guard g(*this);
    expect_ok(exchange(wire::SetTime{instant}, options_.reply_timeout), "SETT");
  }

  DeviceInstant read_time() {
    Guard g(*this);
    auto reply = exchange(wire::GetTime{}, options_.reply_timeout);
    if (auto t = std::get_if<wire::Time>(&reply)) return t->instant;
    if (auto e = std::get_if<wire::Err>(&reply)) {
      throw LinkError(LinkErrc::Rejected, "ERR " + std::to_string(e->code));
    }
    throw LinkError(LinkErrc::MalformedReply, "expected TIME");
  }

  void erase_flash() {
    Guard g(*this);
    expect_ok(exchange(wire::Erase{}, options_.reply_timeout), "ERAS");
  }

  /// Erase then clock sync, with no other command able to slip in between.
  void start_collection(DeviceInstant now) {
    Guard g(*this);
    expect_ok(exchange(wire::Erase{}, options_.reply_timeout), "ERAS");
    expect_ok(exchange(wire::SetTime{now}, options_.reply_timeout), "SETT");
  }

  /// Streams stored records to `sink` as 16-hex lines, in storage order.
  std::size_t read_data(const std::function<void(std::string_view)>& sink) {
    Guard g(*this);
    send(wire::Data{});
    std::size_t count = 0;
    for (;;) {
      std::optional<std::string> line;
      try {
        line = channel_.read_line(options_.data_line_timeout);
      } catch (const ChannelError&) {
        drop();
        throw LinkError(LinkErrc::AbortedByPeer, "after " + std::to_string(count) + " records",
                        count);
      }
      if (!line) {
        drop();
        throw LinkError(LinkErrc::Timeout, "no data line", count);
      }
      auto reply = wire::parse_response(*line);
      if (!reply) {
        drop();
        throw LinkError(LinkErrc::MalformedReply, *line, count);
      }
      if (auto rec = std::get_if<wire::Rec>(&*reply)) {
        ++count;
        sink(format_record(rec->word));
        continue;
      }
      if (auto end = std::get_if<wire::End>(&*reply)) {
        if (end->count != count) {
          throw LinkError(LinkErrc::MalformedReply,
                          "END " + std::to_string(end->count) + " after " +
                              std::to_string(count) + " records",
                          count);
        }
        return count;
      }
      if (auto e = std::get_if<wire::Err>(&*reply)) {
        throw LinkError(LinkErrc::Rejected, "ERR " + std::to_string(e->code), count);
      }
      drop();
      throw LinkError(LinkErrc::MalformedReply, *line, count);
    }
  }

  std::vector<std::string> read_data() {
    std::vector<std::string> lines;
    read_data([&](std::string_view l) { lines.emplace_back(l); });
    return lines;
  }

 private:
  class Guard {
   public:
    explicit Guard(DeviceLink& link) : link_(link) {
      bool expected = false;
      if (!link_.busy_.compare_exchange_strong(expected, true)) {
        throw LinkError(LinkErrc::Busy, "another command is in flight");
      }
      if (!link_.channel_.is_open()) {
        link_.busy_.store(false);
        throw LinkError(LinkErrc::NotConnected, "");
      }
    }
    ~Guard() { link_.busy_.store(false); }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    DeviceLink& link_;
  };

  void drop() {
    channel_.close();
    port_.clear();
  }

  void send(const wire::Command& cmd) {
    try {
      channel_.write_line(wire::format(cmd));
    } catch (const ChannelError& e) {
      drop();
      throw LinkError(LinkErrc::AbortedByPeer, e.what());
    }
  }

  wire::Response exchange(const wire::Command& cmd, std::chrono::milliseconds timeout) {
    send(cmd);
    std::optional<std::string> line;
    try {
      line = channel_.read_line(timeout);
    } catch (const ChannelError& e) {
      drop();
      throw LinkError(LinkErrc::AbortedByPeer, e.what());
    }
    if (!line) {
      drop();
      throw LinkError(LinkErrc::Timeout, wire::format(cmd));
    }
    auto reply = wire::parse_response(*line);
    if (!reply) throw LinkError(LinkErrc::MalformedReply, *line);
    return *reply;
  }

  static void expect_ok(const wire::Response& reply, std::string_view what) {
    if (std::holds_alternative<wire::Ok>(reply)) return;
    if (auto e = std::get_if<wire::Err>(&reply)) {
      throw LinkError(LinkErrc::Rejected, std::string(what) + " -> ERR " + std::to_string(e->code));
    }
    throw LinkError(LinkErrc::MalformedReply, std::string(what) + " -> " + wire::format(reply));
  }

  LinkOptions options_;
  LineChannel channel_;
  std::string port_;
  std::atomic<bool> busy_{false};
};

}  // namespace friends
