#pragma once

#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "friends/analysis.hpp"
#include "friends/app.hpp"
#include "friends/link.hpp"
#include "friends/plot.hpp"

namespace friends::api {

struct ServiceConfig {
  std::filesystem::path data_dir = ".";  // session logs live here as <id>.hex
  ZoneConfig zone = ZoneConfig::host();
  FilterConfig filter;                   // defaults for query parameters
  std::string default_port;              // device endpoint used when none was connected
  std::filesystem::path registry = default_port_registry();
  LinkOptions link;
};

class BadRequest : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no" || v.empty()) return false;
  throw BadRequest("bad boolean '" + v + "'");
}

inline double parse_nonneg(const std::string& name, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size() || !(d >= 0.0)) throw std::invalid_argument(name);
    return d;
  } catch (const std::exception&) {
    throw BadRequest("bad value for " + name + ": '" + v + "'");
  }
}

/// Filter settings for one request: service defaults overridden by query.
inline FilterConfig filter_from(const httplib::Request& req, const FilterConfig& defaults) {
  FilterConfig f = defaults;
  if (req.has_param("use_thermistor")) f.use_thermistor = parse_bool(req.get_param_value("use_thermistor"));
  if (req.has_param("min_puff_ms")) f.min_puff_ms = parse_nonneg("min_puff_ms", req.get_param_value("min_puff_ms"));
  if (req.has_param("temp_delta")) f.temp_delta_threshold = parse_nonneg("temp_delta", req.get_param_value("temp_delta"));
  if (req.has_param("min_puff_s")) {
    auto v = req.get_param_value("min_puff_s");
    if (v.empty()) {
      f.display_min_puff_s.reset();
    } else {
      f.display_min_puff_s = parse_nonneg("min_puff_s", v);
    }
  }
  return f;
}

inline std::set<EpisodeKind> kinds_from(const httplib::Request& req) {
  std::set<EpisodeKind> kinds;
  if (!req.has_param("kinds")) return {EpisodeKind::Puff, EpisodeKind::Touch};
  std::string all = req.get_param_value("kinds");
  std::size_t start = 0;
  while (start <= all.size()) {
    auto comma = all.find(',', start);
    auto tok = all.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (tok == "PUFF") {
      kinds.insert(EpisodeKind::Puff);
    } else if (tok == "TOUCH") {
      kinds.insert(EpisodeKind::Touch);
    } else if (!tok.empty()) {
      throw BadRequest("unknown kind '" + tok + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return kinds;
}

/**
 * JSON service over stored logs and one shared device session.
 *
 * Reads are independent and may run concurrently; every device endpoint
 * takes the device mutex, so device commands queue behind each other.
 */
class Service {
 public:
  explicit Service(ServiceConfig cfg) : cfg_(std::move(cfg)), link_(cfg_.link) { install(); }
  ~Service() { stop(); }

  httplib::Server& server() { return server_; }

  /// Binds and serves on a background thread. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    int bound = port;
    if (port == 0) {
      bound = server_.bind_to_any_port(host);
    } else if (!server_.bind_to_port(host, port)) {
      bound = -1;
    }
    if (bound <= 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::vector<std::string> session_ids() const {
    std::vector<std::string> ids;
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(cfg_.data_dir, ec)) {
      if (e.is_regular_file() && e.path().extension() == ".hex") ids.push_back(e.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

 private:
  static void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }
  static void send_error(httplib::Response& res, int status, const std::string& name,
                         const std::string& message) {
    send_json(res, {{"error", name}, {"message", message}}, status);
  }

  std::optional<std::filesystem::path> session_path(const std::string& id) const {
    if (id.empty() || id.find('/') != std::string::npos || id.find("..") != std::string::npos) {
      return std::nullopt;
    }
    auto p = cfg_.data_dir / (id + ".hex");
    std::error_code ec;
    if (!std::filesystem::is_regular_file(p, ec)) return std::nullopt;
    return p;
  }

  ZoneConfig zone_from(const httplib::Request& req) const {
    if (!req.has_param("zone")) return cfg_.zone;
    try {
      return ZoneConfig::parse(req.get_param_value("zone"));
    } catch (const std::invalid_argument& e) {
      throw BadRequest(e.what());
    }
  }

  /// Wraps a handler with the shared error mapping.
  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
      try {
        f(req, res);
      } catch (const BadRequest& e) {
        send_error(res, 400, "BadRequest", e.what());
      } catch (const LinkError& e) {
        send_error(res, 502, std::string(to_string(e.code())), e.what());
      } catch (const app::AppError& e) {
        send_error(res, 500, "AppError", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "InternalError", e.what());
      }
    };
  }

  template <typename F>
  void with_session(const httplib::Request& req, httplib::Response& res, F f) {
    auto id = req.path_params.at("id");
    auto path = session_path(id);
    if (!path) {
      send_error(res, 404, "NotFound", "no session '" + id + "'");
      return;
    }
    auto decoded = app::load_raw(*path);
    auto zone = zone_from(req);
    f(id, decoded, zone);
  }

  void ensure_connected(const std::optional<std::string>& port) {
    std::string target = port.value_or(link_.port().empty() ? cfg_.default_port : link_.port());
    if (link_.state() == LinkState::Connected && (!port || *port == link_.port())) return;
    if (target.empty()) throw LinkError(LinkErrc::NotConnected, "no device port configured");
    if (link_.state() == LinkState::Connected) link_.disconnect();
    link_.connect(target);
  }

  static std::optional<std::string> port_from(const httplib::Request& req) {
    if (req.has_param("port")) return req.get_param_value("port");
    if (!req.body.empty()) {
      auto j = nlohmann::json::parse(req.body, nullptr, false);
      if (!j.is_discarded() && j.is_object() && j.contains("port")) return j["port"].get<std::string>();
    }
    return std::nullopt;
  }

  static DeviceInstant instant_from(const httplib::Request& req) {
    if (!req.body.empty()) {
      auto j = nlohmann::json::parse(req.body, nullptr, false);
      if (j.is_discarded()) throw BadRequest("body is not JSON");
      if (j.is_object() && j.contains("posix_seconds")) {
        return DeviceInstant{j["posix_seconds"].get<std::uint32_t>(),
                             j.value("fraction_ticks", std::uint16_t{0})};
      }
    }
    return host_now();
  }

  void install() {
    server_.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", "*");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    server_.Get("/ports", guarded([this](const httplib::Request&, httplib::Response& res) {
      auto arr = nlohmann::json::array();
      for (const auto& p : list_ports(cfg_.registry)) {
        arr.push_back({{"system_name", p.system_name}, {"label", p.label}});
      }
      send_json(res, arr);
    }));

    server_.Post("/device/connect", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(device_mu_);
      auto port = port_from(req);
      if (link_.state() == LinkState::Connected) link_.disconnect();
      std::string target = port.value_or(cfg_.default_port);
      if (target.empty()) throw BadRequest("no port given");
      link_.connect(target);
      send_json(res, {{"state", to_string(link_.state())}, {"port", link_.port()}});
    }));

    server_.Post("/device/set-time", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(device_mu_);
      ensure_connected(port_from(req));
      auto t = instant_from(req);
      link_.set_time(t);
      send_json(res, {{"status", "OK"}, {"instant", to_json(t)}});
    }));

    auto read_time = guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(device_mu_);
      ensure_connected(port_from(req));
      auto t = link_.read_time();
      send_json(res, {{"instant", to_json(t)},
                      {"unix_seconds", to_unix_seconds(t)},
                      {"rendered", format_instant(t, zone_from(req))}});
    });
    server_.Post("/device/read-time", read_time);
    server_.Get("/device/time", read_time);

    server_.Post("/device/erase", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(device_mu_);
      ensure_connected(port_from(req));
      link_.erase_flash();
      send_json(res, {{"status", "OK"}});
    }));

    server_.Post("/device/start", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(device_mu_);
      ensure_connected(port_from(req));
      auto t = instant_from(req);
      link_.start_collection(t);
      send_json(res, {{"status", "OK"}, {"instant", to_json(t)}});
    }));

    server_.Post("/device/pull", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(device_mu_);
      ensure_connected(port_from(req));
      std::string raw;
      auto n = link_.read_data([&](std::string_view line) {
        raw += line;
        raw += '\n';
      });
      auto id = next_session_id();
      app::write_file(cfg_.data_dir / (id + ".hex"), raw);
      send_json(res, {{"session", id}, {"records", n}});
    }));

    server_.Get("/device/state", guarded([this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(device_mu_);
      send_json(res, {{"state", to_string(link_.state())}, {"port", link_.port()}});
    }));

    server_.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      auto arr = nlohmann::json::array();
      for (const auto& id : session_ids()) {
        auto decoded = app::load_raw(cfg_.data_dir / (id + ".hex"));
        std::set<std::string> dates;
        for (const auto& e : decoded.events) {
          if (auto t = e.instant()) dates.insert(format_date(cfg_.zone.date_of(t->posix_seconds)));
        }
        arr.push_back({{"id", id},
                       {"records", decoded.events.size()},
                       {"rejects", decoded.rejects.size()},
                       {"dates", std::vector<std::string>(dates.begin(), dates.end())}});
      }
      send_json(res, arr);
    }));

    server_.Get("/sessions/:id/episodes", guarded([this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](const std::string& id, const DecodedStream& d, const ZoneConfig& zone) {
        auto a = analyze(d.events, filter_from(req, cfg_.filter), zone);
        auto kinds = kinds_from(req);
        auto arr = nlohmann::json::array();
        for (const auto& p : a.kept) {
          if (kinds.count(p.episode.kind)) arr.push_back(to_json(p, zone));
        }
        send_json(res, {{"session", id},
                        {"episodes", arr},
                        {"orphans", a.pairing.orphans.size()},
                        {"unattached_temperatures", a.unattached.size()}});
      });
    }));

    server_.Get("/sessions/:id/table", guarded([this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](const std::string&, const DecodedStream& d, const ZoneConfig& zone) {
        auto a = analyze(d.events, filter_from(req, cfg_.filter), zone);
        res.set_content(export_episode_table(a.episodes, zone), "text/csv");
      });
    }));

    server_.Get("/sessions/:id/metrics", guarded([this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](const std::string&, const DecodedStream& d, const ZoneConfig& zone) {
        auto a = analyze(d.events, filter_from(req, cfg_.filter), zone);
        send_json(res, metrics_document(a.metrics));
      });
    }));

    server_.Get("/sessions/:id/timeline", guarded([this](const httplib::Request& req, httplib::Response& res) {
      with_session(req, res, [&](const std::string&, const DecodedStream& d, const ZoneConfig& zone) {
        auto a = analyze(d.events, filter_from(req, cfg_.filter), zone);
        auto plots = build_day_plots(a, zone);
        std::optional<Date> date;
        if (req.has_param("date")) {
          date = parse_date(req.get_param_value("date"));
          if (!date) throw BadRequest("bad date '" + req.get_param_value("date") + "'");
        } else if (!plots.empty()) {
          date = plots.front().date;
        }
        DayPlot chosen;
        if (date) chosen.date = *date;
        for (const auto& p : plots) {
          if (date && p.date == *date) chosen = p;
        }
        auto body = to_json(chosen);
        if (!date) body["date"] = nullptr;
        auto kinds = kinds_from(req);
        if (!kinds.count(EpisodeKind::Puff)) body["puffs"] = nlohmann::json::array();
        if (!kinds.count(EpisodeKind::Touch)) body["touches"] = nlohmann::json::array();
        send_json(res, body);
      });
    }));
  }

  std::string next_session_id() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "pull-%Y%m%d-%H%M%S", &tm);
    std::string base = buf;
    std::string id = base;
    for (int i = 2; session_path(id); ++i) id = base + "-" + std::to_string(i);
    return id;
  }

  ServiceConfig cfg_;
  httplib::Server server_;
  std::thread thread_;
  std::mutex device_mu_;
  DeviceLink link_;
};

}  // namespace friends::api
