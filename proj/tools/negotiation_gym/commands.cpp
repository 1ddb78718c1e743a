#include "commands.hpp"

#include <charconv>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <ngym/engine.hpp>
#include <ngym/error.hpp>
#include <ngym/metrics.hpp>
#include <ngym/negotiation.hpp>
#include <ngym/remote_backend.hpp>
#include <ngym/scripted_negotiation.hpp>
#include <ngym/service.hpp>
#include <ngym/text.hpp>

namespace ngym::cli {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_shutdown{false};

extern "C" void on_shutdown_signal(int) { g_shutdown = true; }

std::optional<std::string> read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool write_text(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  return static_cast<bool>(out);
}

bool prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) std::cerr << "error: cannot create output directory " << dir << ": " << ec.message() << "\n";
  return !ec;
}

void print_violations(const std::vector<Violation>& violations) {
  for (const auto& v : violations) std::cerr << "  " << v.path << ": " << v.message << "\n";
}

void print_config_error(const ConfigError& e) {
  std::cerr << "error: " << e.what();
  if (e.offset() > 0) std::cerr << " (byte " << e.offset() << ")";
  std::cerr << "\n";
}

std::unique_ptr<ModelBackend> make_backend(const std::string& kind, const std::string& policy) {
  if (kind == "remote") return RemoteBackend::from_environment();
  return make_negotiation_backend(schedule_named(policy).value_or(ConcessionSchedule::standard()));
}

std::string config_policy(const ScenarioConfig& config) {
  const auto block = experiment_block_from(config);
  return block ? block->policy : "standard";
}

}  // namespace

bool split_address(const std::string& addr, std::string& host, int& port) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size()) return false;
  host = addr.substr(0, colon);
  const auto digits = std::string_view(addr).substr(colon + 1);
  int value = -1;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || value < 0 || value > 65535) return false;
  port = value;
  return true;
}

int cmd_validate(const fs::path& path) {
  const auto text = read_text(path);
  if (!text) {
    std::cerr << "error: cannot read " << path << "\n";
    return kExitUsage;
  }
  try {
    const auto config = parse_config_unchecked(*text);
    auto violations = validate(config);
    try {
      (void)engine_options_from(config);
      (void)experiment_block_from(config);
    } catch (const ConfigError& e) {
      violations.push_back({e.path(), e.what()});
    }
    if (!violations.empty()) {
      std::cerr << path.string() << ": " << violations.size() << " violation(s)\n";
      print_violations(violations);
      return kExitFailure;
    }
  } catch (const ConfigError& e) {
    print_config_error(e);
    return kExitFailure;
  }
  std::cout << path.string() << ": ok\n";
  return kExitOk;
}

int cmd_run(const RunArgs& args) {
  const auto text = read_text(args.config);
  if (!text) {
    std::cerr << "error: cannot read " << args.config << "\n";
    return kExitUsage;
  }

  ScenarioConfig config;
  EngineOptions options;
  std::unique_ptr<ModelBackend> backend;
  try {
    config = parse_config(*text);
    if (args.seed) config.rng_seed = *args.seed;
    options = engine_options_from(config);
    backend = make_backend(args.backend, config_policy(config));
  } catch (const ValidationError& e) {
    std::cerr << "error: invalid config " << args.config.string() << "\n";
    print_violations(e.violations());
    return kExitUsage;
  } catch (const ConfigError& e) {
    print_config_error(e);
    return kExitUsage;
  }
  if (!prepare_out_dir(args.out)) return kExitUsage;

  EventSink progress = [](const Event& event) {
    if (event.type == "episode") {
      std::cout << "episode " << event.data["index"].get<int>() + 1 << ": " << event.data["turns"] << " turns, "
                << event.data["termination"].get<std::string>();
      for (const auto& [name, u] : event.data["utilities"].items()) std::cout << ", " << name << "=" << u.dump();
      std::cout << "\n";
    } else if (event.type == "revision") {
      std::cout << "  " << event.data["agent"].get<std::string>()
                << " adds: " << event.data["sentence"].get<std::string>() << "\n";
    } else if (event.type == "warning") {
      std::cerr << "warning: " << event.data.value("message", std::string()) << "\n";
    }
  };

  try {
    auto agents = make_agents(config);
    const auto env = run_simulation(config, agents, *backend, options, progress);
    const bool timing = args.backend == "remote";
    const auto report = simulation_report(env);
    bool ok = write_text(args.out / "environment.json", serialize_environment(env, timing));
    ok = write_text(args.out / "report.json", report.dump(2)) && ok;
    if (!ok) {
      std::cerr << "error: cannot write to " << args.out << "\n";
      return kExitFailure;
    }
    std::cout << "wrote " << (args.out / "environment.json").string() << "\n";
    for (const auto& run : env.runs) {
      if (run.failed) return kExitFailure;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    print_config_error(e);
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_experiment(const ExperimentArgs& args) {
  std::vector<ReflectMode> modes;
  if (args.mode == "all") {
    modes.assign(kAllReflectModes.begin(), kAllReflectModes.end());
  } else if (auto mode = reflect_mode_from(args.mode)) {
    modes.push_back(*mode);
  } else {
    std::cerr << "error: unknown mode '" << args.mode << "'\n";
    return kExitUsage;
  }

  std::unique_ptr<ModelBackend> backend;
  try {
    backend = make_backend(args.backend, args.policy);
  } catch (const ConfigError& e) {
    print_config_error(e);
    return kExitUsage;
  }
  if (!prepare_out_dir(args.out)) return kExitUsage;

  std::map<ReflectMode, MetricsBundle> bundles;
  try {
    for (const auto mode : modes) {
      ExperimentSettings settings;
      settings.mode = mode;
      settings.n = args.n;
      settings.max_turns = args.max_turns;
      settings.seed = args.seed;
      settings.model_id = args.model;
      const auto result = run_experiment(settings, *backend);
      bundles[mode] = result.aggregates;
      const std::string name(to_string(mode));
      if (!write_text(args.out / (name + ".json"), to_json(result).dump(2)) ||
          !write_text(args.out / (name + ".csv"), experiment_csv(result))) {
        std::cerr << "error: cannot write to " << args.out << "\n";
        return kExitFailure;
      }
      const auto& m = result.aggregates;
      std::cout << name << ": buyer_ss=" << text::format_number(m.avg_buyer_ss)
                << " seller_ss=" << text::format_number(m.avg_seller_ss) << " no_deals=" << m.no_deal_count
                << " final_u_buyer=" << (m.cum_avg_buyer.empty() ? "n/a" : text::format_number(m.cum_avg_buyer.back()))
                << " final_u_seller="
                << (m.cum_avg_seller.empty() ? "n/a" : text::format_number(m.cum_avg_seller.back())) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }

  const auto report = render_report(bundles);
  if (!write_text(args.out / "report.json", report.json.dump(2)) || !write_text(args.out / "report.csv", report.csv)) {
    std::cerr << "error: cannot write to " << args.out << "\n";
    return kExitFailure;
  }
  std::cout << "wrote " << (args.out / "report.json").string() << "\n";
  return kExitOk;
}

int cmd_serve(const ServeArgs& args) {
  std::string host;
  int port = 0;
  if (!split_address(args.addr, host, port)) {
    std::cerr << "error: bad address '" << args.addr << "' (expected host:port)\n";
    return kExitUsage;
  }

  ServiceOptions options;
  options.workers = args.workers;
  options.lease = std::chrono::seconds(args.lease_seconds);
  std::shared_ptr<QueueStore> store;
  try {
    options.backend_factory = args.backend == "remote" ? remote_backend_factory() : scripted_backend_factory();
    store = std::make_shared<FileQueueStore>(args.store);
  } catch (const ConfigError& e) {
    print_config_error(e);
    return kExitUsage;
  } catch (const StoreError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  Orchestrator orchestrator(store, options);
  HttpService http(orchestrator);
  if (!http.bind(host, port)) {
    std::cerr << "error: cannot listen on " << args.addr << "\n";
    return kExitUsage;
  }

  std::signal(SIGPIPE, SIG_IGN);
  std::signal(SIGINT, on_shutdown_signal);
  std::signal(SIGTERM, on_shutdown_signal);

  orchestrator.start();
  std::thread server([&http] { http.listen(); });
  std::cout << "listening on " << host << ":" << http.port() << " with " << args.workers << " worker(s), store "
            << args.store.string() << std::endl;

  while (!g_shutdown) std::this_thread::sleep_for(std::chrono::milliseconds(50));

  std::cout << "draining: waiting for running jobs to finish" << std::endl;
  http.stop();
  server.join();
  orchestrator.stop();
  std::cout << "stopped" << std::endl;
  return kExitOk;
}

}  // namespace ngym::cli
