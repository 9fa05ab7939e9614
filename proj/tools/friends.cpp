// friends: command-line front end for the puff/touch event logger.
//
//   friends decode <raw> [--out FILE]
//   friends analyze <raw> --out DIR
//   friends plot <raw> --out DIR
//   friends device {ports|set-time|read-time|erase|start|pull} --port EP
//   friends serve --listen HOST:PORT --data-dir DIR
//   friends emulate (--scenario FILE | --load RAW) [--listen HOST:PORT | --pty]
//   friends scenario [--seed N] --out FILE
//   friends generate --scenario FILE --out RAW

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "friends/api.hpp"
#include "friends/app.hpp"
#include "friends/emulator.hpp"
#include "friends/scenario.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

void wait_for_signal() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

struct Flags {
  std::string zone;
  double min_puff_ms = 200.0;
  double temp_delta = 10.0;
  std::optional<double> display_min_s;
  bool use_thermistor = false;
  std::string port;
  std::string out;
};

void add_filter_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--zone", f.zone, "Render zone: local, UTC, UTC-06:00, or an IANA name");
  cmd->add_option("--min-puff-ms", f.min_puff_ms, "Noise floor for puff duration (ms)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--temp-delta", f.temp_delta, "Thermistor swing needed to keep a short puff")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--display-min-s", f.display_min_s, "Hide puffs shorter than this (s)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_flag("--use-thermistor", f.use_thermistor, "Fuse thermistor readings into filtering");
}

friends::app::RunConfig run_config(const Flags& f, const std::string& input) {
  friends::app::RunConfig cfg;
  try {
    cfg.zone = friends::ZoneConfig::parse(f.zone);
  } catch (const std::invalid_argument& e) {
    throw friends::app::AppError(friends::app::kUsage, e.what());
  }
  cfg.filter.use_thermistor = f.use_thermistor;
  cfg.filter.min_puff_ms = f.min_puff_ms;
  cfg.filter.temp_delta_threshold = f.temp_delta;
  cfg.filter.display_min_puff_s = f.display_min_s;
  cfg.input = input;
  cfg.out = f.out.empty() ? std::filesystem::path(".") : std::filesystem::path(f.out);
  cfg.port = f.port;
  return cfg;
}

friends::Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw friends::app::AppError(friends::app::kIo, "cannot read " + path);
  try {
    return nlohmann::json::parse(in).get<friends::Scenario>();
  } catch (const nlohmann::json::exception& e) {
    throw friends::app::AppError(friends::app::kIo, "bad scenario " + path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decode, analyze and plot puff/touch logs; operate or emulate the logger"};
  app.require_subcommand(1);
  Flags flags;

  std::string input;
  auto* decode = app.add_subcommand("decode", "Raw record file -> converted timestamps");
  decode->add_option("raw", input, "Raw record file")->required();
  decode->add_option("--zone", flags.zone, "Render zone");
  decode->add_option("--out", flags.out, "Converted file (default: stdout)");

  auto* analyze = app.add_subcommand("analyze", "Episode table and daily metrics");
  analyze->add_option("raw", input, "Raw record file")->required();
  analyze->add_option("--out", flags.out, "Output directory");
  add_filter_flags(analyze, flags);

  auto* plot = app.add_subcommand("plot", "One SVG timeline per day");
  plot->add_option("raw", input, "Raw record file")->required();
  plot->add_option("--out", flags.out, "Output directory");
  add_filter_flags(plot, flags);

  friends::app::DeviceRequest dev;
  std::string dev_out;
  std::string registry;
  auto* device = app.add_subcommand("device", "Operate a logger over its serial link");
  device->add_option("action", dev.sub, "ports | set-time | read-time | erase | start | pull")
      ->required()
      ->check(CLI::IsMember({"ports", "set-time", "read-time", "erase", "start", "pull"}));
  device->add_option("--port", dev.port, "Serial device path or host:port");
  device->add_option("--time", dev.time, "Instant for set-time/start: <seconds>[.<ticks>] or now");
  device->add_option("--out", dev_out, "Raw file written by pull");
  device->add_flag("--convert", dev.convert, "Also write <out>.converted.txt after pull");
  device->add_option("--zone", flags.zone, "Render zone");
  device->add_option("--registry", registry, "Emulator port registry directory");

  std::string listen = "127.0.0.1:8080";
  std::string data_dir = ".";
  auto* serve = app.add_subcommand("serve", "JSON API over stored logs and the device");
  serve->add_option("--listen", listen, "host:port to bind");
  serve->add_option("--data-dir", data_dir, "Directory of <session>.hex logs");
  serve->add_option("--port", flags.port, "Default device endpoint");
  serve->add_option("--registry", registry, "Emulator port registry directory");
  add_filter_flags(serve, flags);

  std::string scenario_path;
  std::string load_path;
  std::string emu_listen = "127.0.0.1:0";
  bool use_pty = false;
  std::string pty_link;
  std::string emu_name = "friends-emulator";
  auto* emulate = app.add_subcommand("emulate", "Run a virtual logger");
  emulate->add_option("--scenario", scenario_path, "Scenario file used to fill flash");
  emulate->add_option("--load", load_path, "Raw record file used to fill flash");
  emulate->add_option("--listen", emu_listen, "TCP host:port");
  emulate->add_flag("--pty", use_pty, "Serve on a pseudo-terminal instead of TCP");
  emulate->add_option("--link", pty_link, "Symlink to create for the pseudo-terminal");
  emulate->add_option("--registry", registry, "Advertise in this port registry");
  emulate->add_option("--name", emu_name, "Label shown by device ports");

  std::uint64_t seed = 2024;
  std::string scenario_out;
  auto* scenario = app.add_subcommand("scenario", "Write the validation-day scenario file");
  scenario->add_option("--seed", seed, "Generator seed");
  scenario->add_option("--out", scenario_out, "Scenario file (default: stdout)");

  std::string gen_out;
  auto* generate = app.add_subcommand("generate", "Scenario -> raw record file");
  generate->add_option("--scenario", scenario_path, "Scenario file")->required();
  generate->add_option("--out", gen_out, "Raw record file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : friends::app::kUsage;
  }

  using namespace friends;
  try {
    if (decode->parsed()) {
      auto cfg = run_config(flags, input);
      std::optional<std::filesystem::path> out;
      if (!flags.out.empty()) out = flags.out;
      app::cmd_decode(cfg.input, out, cfg.zone, std::cout, std::cerr);
    } else if (analyze->parsed()) {
      auto cfg = run_config(flags, input);
      auto a = app::cmd_analyze(cfg, std::cerr);
      std::cout << a.episodes.size() << " episodes over " << a.days.size() << " day(s) -> "
                << (cfg.out / "episodes.csv").string() << ", " << (cfg.out / "metrics.json").string()
                << '\n';
    } else if (plot->parsed()) {
      auto cfg = run_config(flags, input);
      for (const auto& p : app::cmd_plot(cfg, std::cerr)) std::cout << p.string() << '\n';
    } else if (device->parsed()) {
      auto cfg = run_config(flags, "");
      if (!dev_out.empty()) dev.out = dev_out;
      if (!registry.empty()) dev.registry = registry;
      std::cout << app::cmd_device(dev, cfg.zone, std::cerr);
    } else if (serve->parsed()) {
      auto cfg = run_config(flags, "");
      api::ServiceConfig sc;
      sc.data_dir = data_dir;
      sc.zone = cfg.zone;
      sc.filter = cfg.filter;
      sc.default_port = flags.port;
      if (!registry.empty()) sc.registry = registry;
      Endpoint ep;
      try {
        ep = Endpoint::parse(listen);
      } catch (const std::invalid_argument& e) {
        throw app::AppError(app::kUsage, e.what());
      }
      api::Service service(sc);
      int port = service.start(ep.host, ep.port);
      std::cout << "serving on http://" << ep.host << ":" << port << std::endl;
      wait_for_signal();
    } else if (emulate->parsed()) {
      EmulatedDevice emu;
      if (!scenario_path.empty()) {
        emu.load_flash(generate_records(load_scenario(scenario_path)));
      } else if (!load_path.empty()) {
        std::vector<std::uint64_t> words;
        for (const auto& line : split_lines(app::read_file(load_path))) {
          if (detail::trim(line).empty()) continue;
          words.push_back(parse_raw(line).word);
        }
        emu.load_flash(words);
      }
      ServeOptions opts;
      opts.name = emu_name;
      if (!registry.empty()) opts.registry_dir = registry;
      EmulatorServer server(emu, opts);
      std::string where;
      if (use_pty) {
        where = server.start_pty(pty_link.empty() ? std::nullopt : std::optional<std::string>(pty_link));
      } else {
        auto ep = Endpoint::parse(emu_listen);
        where = server.start_tcp(ep.host, ep.port);
      }
      std::cout << "emulator on " << where << " with " << emu.dump_flash().size() << " records"
                << std::endl;
      wait_for_signal();
    } else if (scenario->parsed()) {
      auto text = nlohmann::json(validation_day_scenario(seed)).dump(2) + "\n";
      if (scenario_out.empty()) {
        std::cout << text;
      } else {
        app::write_file(scenario_out, text);
      }
    } else if (generate->parsed()) {
      std::string text;
      for (auto w : generate_records(load_scenario(scenario_path))) text += format_record(w) + "\n";
      if (gen_out.empty()) {
        std::cout << text;
      } else {
        app::write_file(gen_out, text);
      }
    }
  } catch (const app::AppError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const CodecError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return app::kIo;
  } catch (const CapacityExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return app::kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return app::kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return app::kIo;
  }
  return app::kOk;
}
