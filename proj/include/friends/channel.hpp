#pragma once

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <termios.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace friends {

class ChannelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the peer closed the stream.
class ChannelClosed : public ChannelError {
 public:
  ChannelClosed() : ChannelError("peer closed the connection") {}
};

/// Owning file descriptor.
class UniqueFd {
 public:
  UniqueFd() = default;
  explicit UniqueFd(int fd) : fd_(fd) {}
  UniqueFd(const UniqueFd&) = delete;
  UniqueFd& operator=(const UniqueFd&) = delete;
  UniqueFd(UniqueFd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  UniqueFd& operator=(UniqueFd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~UniqueFd() { reset(); }

  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }
  void reset(int fd = -1) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = fd;
  }

 private:
  int fd_ = -1;
};

/// Where a device (or emulator) can be reached.
struct Endpoint {
  enum class Type { Tcp, Serial };
  Type type = Type::Tcp;
  std::string host;
  int port = 0;
  std::string path;

  /// "tcp://host:port", "host:port", or a device path such as /dev/ttyUSB0.
  static Endpoint parse(std::string_view text) {
    std::string s(text);
    if (s.starts_with("tcp://")) s = s.substr(6);
    Endpoint ep;
    auto colon = s.rfind(':');
    if (!s.empty() && s.front() != '/' && colon != std::string::npos) {
      ep.type = Type::Tcp;
      ep.host = s.substr(0, colon);
      try {
        std::size_t used = 0;
        ep.port = std::stoi(s.substr(colon + 1), &used);
        if (used != s.size() - colon - 1) throw std::invalid_argument("port");
      } catch (const std::exception&) {
        throw std::invalid_argument("bad endpoint port: " + std::string(text));
      }
      if (ep.host.empty()) ep.host = "127.0.0.1";
      return ep;
    }
    if (s.empty()) throw std::invalid_argument("empty endpoint");
    ep.type = Type::Serial;
    ep.path = s;
    return ep;
  }

  std::string to_string() const {
    return type == Type::Tcp ? "tcp://" + host + ":" + std::to_string(port) : path;
  }
};

/// Serial line settings; 115200 8-N-1 by default.
struct SerialConfig {
  int baud = 115200;
  int data_bits = 8;
  char parity = 'N';
  int stop_bits = 1;
};

namespace detail {

inline speed_t baud_constant(int baud) {
  switch (baud) {
    case 9600: return B9600;
    case 19200: return B19200;
    case 38400: return B38400;
    case 57600: return B57600;
    case 115200: return B115200;
    case 230400: return B230400;
    case 460800: return B460800;
    case 921600: return B921600;
    default: throw std::invalid_argument("unsupported baud rate " + std::to_string(baud));
  }
}

inline void make_raw(int fd, const SerialConfig& cfg) {
  termios tio{};
  if (::tcgetattr(fd, &tio) != 0) throw ChannelError(std::string("tcgetattr: ") + std::strerror(errno));
  ::cfmakeraw(&tio);
  tio.c_cflag |= CLOCAL | CREAD;
  tio.c_cflag &= ~CSIZE;
  switch (cfg.data_bits) {
    case 7: tio.c_cflag |= CS7; break;
    default: tio.c_cflag |= CS8; break;
  }
  tio.c_cflag &= ~(PARENB | PARODD);
  if (cfg.parity == 'E') tio.c_cflag |= PARENB;
  if (cfg.parity == 'O') tio.c_cflag |= PARENB | PARODD;
  if (cfg.stop_bits == 2) {
    tio.c_cflag |= CSTOPB;
  } else {
    tio.c_cflag &= ~CSTOPB;
  }
  auto speed = baud_constant(cfg.baud);
  ::cfsetispeed(&tio, speed);
  ::cfsetospeed(&tio, speed);
  if (::tcsetattr(fd, TCSANOW, &tio) != 0) {
    throw ChannelError(std::string("tcsetattr: ") + std::strerror(errno));
  }
}

}  // namespace detail

/// LF-framed text lines over a byte stream (socket, tty or pty).
class LineChannel {
 public:
  LineChannel() = default;
  explicit LineChannel(UniqueFd fd) : fd_(std::move(fd)) {}

  bool is_open() const { return static_cast<bool>(fd_); }
  int fd() const { return fd_.get(); }
  void close() {
    fd_.reset();
    buffer_.clear();
  }

  void write_line(std::string_view line) {
    std::string out(line);
    out += '\n';
    std::size_t sent = 0;
    while (sent < out.size()) {
      ssize_t n = send_or_write(fd_.get(), out.data() + sent, out.size() - sent);
      if (n < 0) {
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
          pollfd p{fd_.get(), POLLOUT, 0};
          ::poll(&p, 1, 100);
          continue;
        }
        if (errno == EPIPE || errno == ECONNRESET || errno == EIO) throw ChannelClosed();
        throw ChannelError(std::string("write: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  /// Next line without its terminator (CR stripped), or nullopt on timeout.
  /// Throws ChannelClosed at end of stream.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout,
                                       int wake_fd = -1) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd fds[2] = {{fd_.get(), POLLIN, 0}, {wake_fd, POLLIN, 0}};
      int rc = ::poll(fds, wake_fd >= 0 ? 2 : 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ChannelError(std::string("poll: ") + std::strerror(errno));
      }
      if (rc == 0) return std::nullopt;
      if (wake_fd >= 0 && (fds[1].revents & POLLIN)) return std::nullopt;
      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
        char chunk[4096];
        ssize_t n = ::read(fd_.get(), chunk, sizeof(chunk));
        if (n == 0) throw ChannelClosed();
        if (n < 0) {
          if (errno == EINTR || errno == EAGAIN) continue;
          if (errno == ECONNRESET || errno == EIO) throw ChannelClosed();
          throw ChannelError(std::string("read: ") + std::strerror(errno));
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
      }
    }
  }

 private:
  static ssize_t send_or_write(int fd, const char* data, std::size_t len) {
    ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0 && errno == ENOTSOCK) n = ::write(fd, data, len);
    return n;
  }

  UniqueFd fd_;
  std::string buffer_;
};

/// Connects to host:port. Returns an invalid fd if nothing is listening.
inline UniqueFd connect_tcp(const std::string& host, int port, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) return {};
  UniqueFd result;
  for (auto* ai = res; ai; ai = ai->ai_next) {
    UniqueFd fd(::socket(ai->ai_family, ai->ai_socktype | SOCK_NONBLOCK, ai->ai_protocol));
    if (!fd) continue;
    int rc = ::connect(fd.get(), ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd p{fd.get(), POLLOUT, 0};
      if (::poll(&p, 1, static_cast<int>(timeout.count())) == 1) {
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
        rc = err == 0 ? 0 : -1;
      }
    }
    if (rc == 0) {
      int one = 1;
      ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      result = std::move(fd);
      break;
    }
  }
  ::freeaddrinfo(res);
  return result;
}

/// Opens and configures a serial device. Invalid fd if it cannot be opened.
inline UniqueFd open_serial(const std::string& path, const SerialConfig& cfg) {
  UniqueFd fd(::open(path.c_str(), O_RDWR | O_NOCTTY | O_NONBLOCK | O_CLOEXEC));
  if (!fd) return {};
  try {
    detail::make_raw(fd.get(), cfg);
  } catch (const ChannelError&) {
    return {};
  }
  return fd;
}

}  // namespace friends
