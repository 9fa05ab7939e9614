#pragma once

#include <fcntl.h>
#include <poll.h>
#include <stdlib.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "friends/channel.hpp"
#include "friends/codec.hpp"
#include "friends/link.hpp"
#include "friends/wire.hpp"

namespace friends {

class CapacityExceeded : public std::length_error {
 public:
  CapacityExceeded(std::size_t requested, std::size_t capacity)
      : std::length_error("CapacityExceeded: " + std::to_string(requested) + " records, capacity " +
                          std::to_string(capacity)) {}
};

/// Stand-in for the device's flash size.
inline constexpr std::size_t kDefaultFlashCapacity = 65536;

/// Host wall clock in device ticks.
inline std::int64_t host_clock_ticks() {
  auto now = std::chrono::system_clock::now().time_since_epoch();
  auto us = std::chrono::duration_cast<std::chrono::microseconds>(now).count();
  // split to keep us * 65536 inside 64 bits
  return (us / 1'000'000) * kTicksPerSecond + (us % 1'000'000) * kTicksPerSecond / 1'000'000;
}

inline DeviceInstant host_now() { return DeviceInstant::from_ticks(host_clock_ticks()); }

/**
 * Observable state of a virtual device: its flash image and its clock.
 *
 * The clock runs as an offset from a host time source, so SETT moves the
 * offset and GETT reads host time plus offset. All members are safe to call
 * from the serving thread and a test thread concurrently.
 */
class EmulatedDevice {
 public:
  using TimeSource = std::function<std::int64_t()>;

  explicit EmulatedDevice(std::size_t capacity = kDefaultFlashCapacity,
                          TimeSource source = host_clock_ticks)
      : capacity_(capacity), source_(std::move(source)) {}

  std::size_t capacity() const { return capacity_; }

  void load_flash(const std::vector<std::uint64_t>& records) {
    if (records.size() > capacity_) throw CapacityExceeded(records.size(), capacity_);
    std::lock_guard<std::mutex> lock(mu_);
    flash_ = records;
  }
  std::vector<std::uint64_t> dump_flash() const {
    std::lock_guard<std::mutex> lock(mu_);
    return flash_;
  }
  void erase() {
    std::lock_guard<std::mutex> lock(mu_);
    flash_.clear();
  }

  DeviceInstant now() const {
    std::lock_guard<std::mutex> lock(mu_);
    return DeviceInstant::from_ticks(std::max<std::int64_t>(0, source_() + offset_ticks_));
  }
  void set_time(DeviceInstant t) {
    std::lock_guard<std::mutex> lock(mu_);
    offset_ticks_ = t.total_ticks() - source_();
  }
  /// Clock offset relative to the host, in seconds.
  double clock_offset_s() const {
    std::lock_guard<std::mutex> lock(mu_);
    return static_cast<double>(offset_ticks_) / kTicksPerSecond;
  }

  /// Replies for one request line, in order.
  std::vector<std::string> handle(std::string_view line) {
    auto cmd = wire::parse_command(line);
    if (!cmd) {
      bool known_verb = line.starts_with("SETT");
      return {wire::format(wire::Err{known_verb ? wire::kErrBadArgument : wire::kErrUnknownCommand})};
    }
    if (std::holds_alternative<wire::Ping>(*cmd)) return {wire::format(wire::Pong{})};
    if (auto s = std::get_if<wire::SetTime>(&*cmd)) {
      set_time(s->instant);
      return {wire::format(wire::Ok{})};
    }
    if (std::holds_alternative<wire::GetTime>(*cmd)) return {wire::format(wire::Time{now()})};
    if (std::holds_alternative<wire::Erase>(*cmd)) {
      erase();
      return {wire::format(wire::Ok{})};
    }
    std::vector<std::string> out;
    auto records = dump_flash();
    out.reserve(records.size() + 1);
    for (auto w : records) out.push_back(wire::format(wire::Rec{w}));
    out.push_back(wire::format(wire::End{records.size()}));
    return out;
  }

 private:
  mutable std::mutex mu_;
  std::size_t capacity_;
  TimeSource source_;
  std::vector<std::uint64_t> flash_;
  std::int64_t offset_ticks_ = 0;
};

struct ServeOptions {
  /// Drop the connection after this many REC lines of a DATA reply.
  std::optional<std::size_t> truncate_data_after;
  /// Accept connections but never answer.
  bool mute = false;
  /// Advertise the endpoint here so list_ports() can see it.
  std::optional<std::filesystem::path> registry_dir;
  std::string name = "friends-emulator";
};

/**
 * Serves one EmulatedDevice over TCP or a pseudo-terminal, one connection
 * at a time, on a background thread. stop() (or destruction) shuts it down.
 */
class EmulatorServer {
 public:
  EmulatorServer(EmulatedDevice& device, ServeOptions options = {})
      : device_(device), options_(std::move(options)) {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC | O_NONBLOCK) != 0) throw std::runtime_error("pipe2 failed");
    wake_read_.reset(fds[0]);
    wake_write_.reset(fds[1]);
  }
  EmulatorServer(const EmulatorServer&) = delete;
  EmulatorServer& operator=(const EmulatorServer&) = delete;
  ~EmulatorServer() { stop(); }

  /// Listens on host:port (port 0 picks a free one). Returns the endpoint.
  std::string start_tcp(const std::string& host = "127.0.0.1", int port = 0) {
    UniqueFd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!fd) throw std::runtime_error("socket failed");
    int one = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      throw std::invalid_argument("listen host must be an IPv4 address: " + host);
    }
    if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      throw std::runtime_error("bind " + host + ":" + std::to_string(port) + ": " +
                               std::strerror(errno));
    }
    if (::listen(fd.get(), 4) != 0) throw std::runtime_error("listen failed");
    socklen_t len = sizeof(addr);
    ::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len);
    endpoint_ = host + ":" + std::to_string(ntohs(addr.sin_port));
    listen_ = std::move(fd);
    advertise();
    thread_ = std::thread([this] { tcp_loop(); });
    return endpoint_;
  }

  /// Opens a pseudo-terminal and serves on its master side. Returns the
  /// slave path; if `link_path` is given a symlink to it is created there.
  std::string start_pty(const std::optional<std::string>& link_path = std::nullopt) {
    UniqueFd master(::posix_openpt(O_RDWR | O_NOCTTY | O_CLOEXEC));
    if (!master || ::grantpt(master.get()) != 0 || ::unlockpt(master.get()) != 0) {
      throw std::runtime_error("cannot allocate a pseudo-terminal");
    }
    std::string slave = ::ptsname(master.get());
    // Holding the slave open keeps the master readable between clients.
    UniqueFd hold(::open(slave.c_str(), O_RDWR | O_NOCTTY | O_CLOEXEC));
    if (!hold) throw std::runtime_error("cannot open " + slave);
    detail::make_raw(hold.get(), SerialConfig{});
    endpoint_ = slave;
    if (link_path) {
      std::error_code ec;
      std::filesystem::remove(*link_path, ec);
      std::filesystem::create_symlink(slave, *link_path, ec);
      if (ec) throw std::runtime_error("cannot link " + *link_path + ": " + ec.message());
      link_path_ = *link_path;
      endpoint_ = *link_path;
    }
    pty_hold_ = std::move(hold);
    advertise();
    thread_ = std::thread([this, m = std::move(master)]() mutable {
      LineChannel ch(std::move(m));
      serve_connection(ch);
    });
    return endpoint_;
  }

  const std::string& endpoint() const { return endpoint_; }

  void stop() {
    if (stopping_.exchange(true)) return;
    char b = 1;
    [[maybe_unused]] auto n = ::write(wake_write_.get(), &b, 1);
    if (thread_.joinable()) thread_.join();
    listen_.reset();
    pty_hold_.reset();
    std::error_code ec;
    if (!registry_file_.empty()) std::filesystem::remove(registry_file_, ec);
    if (link_path_) std::filesystem::remove(*link_path_, ec);
  }

  std::size_t connections_served() const { return connections_.load(); }

 private:
  void advertise() {
    if (!options_.registry_dir) return;
    std::error_code ec;
    std::filesystem::create_directories(*options_.registry_dir, ec);
    auto stem = options_.name;
    for (auto& c : stem) {
      if (c == '/' || c == ':') c = '_';
    }
    registry_file_ = *options_.registry_dir / (stem + "-" + std::to_string(::getpid()) + "-" +
                                               std::to_string(reinterpret_cast<std::uintptr_t>(this)) +
                                               ".port");
    std::ofstream out(registry_file_);
    out << nlohmann::json{{"system_name", endpoint_}, {"label", options_.name}}.dump() << '\n';
  }

  void tcp_loop() {
    while (!stopping_.load()) {
      pollfd fds[2] = {{listen_.get(), POLLIN, 0}, {wake_read_.get(), POLLIN, 0}};
      int rc = ::poll(fds, 2, -1);
      if (rc < 0 && errno == EINTR) continue;
      if (rc < 0 || (fds[1].revents & POLLIN)) return;
      if (!(fds[0].revents & POLLIN)) continue;
      UniqueFd conn(::accept4(listen_.get(), nullptr, nullptr, SOCK_CLOEXEC));
      if (!conn) continue;
      int one = 1;
      ::setsockopt(conn.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      ++connections_;
      LineChannel ch(std::move(conn));
      serve_connection(ch);
    }
  }

  void serve_connection(LineChannel& ch) {
    try {
      while (!stopping_.load()) {
        auto line = ch.read_line(std::chrono::hours(24), wake_read_.get());
        if (!line) {
          if (stopping_.load()) return;
          continue;
        }
        if (options_.mute) continue;
        auto replies = device_.handle(*line);
        const bool data = (*line == "DATA");
        std::size_t recs = 0;
        for (const auto& r : replies) {
          if (data && options_.truncate_data_after && r.starts_with("REC ") &&
              recs++ == *options_.truncate_data_after) {
            return;  // closes the connection mid-transfer
          }
          ch.write_line(r);
        }
      }
    } catch (const ChannelError&) {
      // client went away
    }
  }

  EmulatedDevice& device_;
  ServeOptions options_;
  UniqueFd listen_;
  UniqueFd pty_hold_;
  UniqueFd wake_read_;
  UniqueFd wake_write_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> connections_{0};
  std::string endpoint_;
  std::filesystem::path registry_file_;
  std::optional<std::string> link_path_;
};

}  // namespace friends
