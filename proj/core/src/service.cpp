#include "ngym/service.hpp"

#include <httplib.h>

#include <charconv>

#include "ngym/assets.hpp"
#include "ngym/error.hpp"

namespace ngym {

namespace {

using ojson = nlohmann::ordered_json;

constexpr auto kSsePoll = std::chrono::milliseconds(50);
constexpr auto kSseKeepAlive = std::chrono::seconds(15);

void send_json(httplib::Response& res, int status, const ojson& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  ojson body;
  body["error"] = message;
  send_json(res, status, body);
}

std::optional<std::string> header(const httplib::Request& req, const char* name) {
  if (!req.has_header(name)) return std::nullopt;
  auto value = req.get_header_value(name);
  if (value.empty()) return std::nullopt;
  return value;
}

std::uint64_t parse_seq(const std::string& text) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return 0;
  return value;
}

std::string sse_frame(const StoredEvent& event) {
  return "id: " + std::to_string(event.seq) + "\nevent: " + event.type + "\ndata: " + event.data.dump() + "\n\n";
}

bool is_terminal_status_event(const StoredEvent& event) {
  if (event.type != "status") return false;
  const auto status = job_status_from(event.data.value("status", std::string()));
  return status && is_terminal(*status);
}

}  // namespace

struct HttpService::Impl {
  Orchestrator& orchestrator;
  httplib::Server server;
  int port = -1;
  std::atomic<bool> stopping{false};

  explicit Impl(Orchestrator& o) : orchestrator(o) { routes(); }

  QueueStore& store() { return orchestrator.store(); }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type, Idempotency-Key, Last-Event-ID, X-User");
      res.status = 204;
    });

    server.Get("/api/schema", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(std::string(assets::scenario_config_schema()), "application/schema+json");
    });

    server.Post("/api/jobs", [this](const httplib::Request& req, httplib::Response& res) { submit(req, res); });

    server.Get("/api/jobs", [this](const httplib::Request& req, httplib::Response& res) {
      JobFilter filter;
      if (req.has_param("status")) {
        filter.status = job_status_from(req.get_param_value("status"));
        if (!filter.status) return send_error(res, 400, "unknown status filter");
      }
      if (req.has_param("user")) filter.user = req.get_param_value("user");
      ojson jobs = ojson::array();
      try {
        for (const auto& job : store().list(filter)) jobs.push_back(to_json(job));
      } catch (const StoreError& e) {
        return send_error(res, 503, e.what());
      }
      ojson body;
      body["jobs"] = std::move(jobs);
      send_json(res, 200, body);
    });

    server.Get(R"(/api/jobs/([0-9a-fA-F-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      if (auto job = find(req, res)) send_json(res, 200, to_json(*job));
    });

    server.Get(R"(/api/jobs/([0-9a-fA-F-]+)/result)", [this](const httplib::Request& req, httplib::Response& res) {
      document(req, res, ".json", "application/json");
    });

    server.Get(R"(/api/jobs/([0-9a-fA-F-]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
      if (req.has_param("format") && req.get_param_value("format") == "csv") {
        document(req, res, ".report.csv", "text/csv");
      } else {
        document(req, res, ".report.json", "application/json");
      }
    });

    server.Get(R"(/api/jobs/([0-9a-fA-F-]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      events(req, res);
    });
  }

  std::optional<JobRecord> find(const httplib::Request& req, httplib::Response& res) {
    const auto id = req.matches[1].str();
    try {
      if (auto job = store().get(id)) return job;
    } catch (const StoreError& e) {
      send_error(res, 503, e.what());
      return std::nullopt;
    }
    send_error(res, 404, "unknown job " + id);
    return std::nullopt;
  }

  void submit(const httplib::Request& req, httplib::Response& res) {
    try {
      const auto outcome = orchestrator.submit(req.body, header(req, "Idempotency-Key"), header(req, "X-User"));
      res.set_header("Location", "/api/jobs/" + outcome.job.id);
      send_json(res, outcome.created ? 201 : 200, to_json(outcome.job));
    } catch (const ValidationError& e) {
      ojson body;
      body["error"] = "validation failed";
      ojson violations = ojson::array();
      for (const auto& v : e.violations()) violations.push_back(ojson{{"path", v.path}, {"message", v.message}});
      body["violations"] = std::move(violations);
      send_json(res, 422, body);
    } catch (const ConfigError& e) {
      ojson body;
      body["error"] = e.what();
      body["path"] = e.path();
      body["offset"] = e.offset();
      body["violations"] = ojson::array({ojson{{"path", e.path()}, {"message", e.what()}}});
      send_json(res, 422, body);
    } catch (const StoreError& e) {
      send_error(res, 503, e.what());
    }
  }

  void document(const httplib::Request& req, httplib::Response& res, const std::string& suffix,
                const char* content_type) {
    const auto job = find(req, res);
    if (!job) return;
    if (job->status != JobStatus::done) {
      ojson body;
      body["error"] = "job has no result yet";
      body["status"] = std::string(to_string(job->status));
      return send_json(res, 409, body);
    }
    const auto doc = store().get_result(job->id + suffix);
    if (!doc) return send_error(res, 404, "result document missing");
    res.set_content(*doc, content_type);
  }

  void events(const httplib::Request& req, httplib::Response& res) {
    const auto job = find(req, res);
    if (!job) return;
    std::uint64_t last = 0;
    if (const auto id = header(req, "Last-Event-ID")) {
      last = parse_seq(*id);
    } else if (req.has_param("last_event_id")) {
      last = parse_seq(req.get_param_value("last_event_id"));
    }

    res.set_header("Cache-Control", "no-cache");
    res.set_header("X-Accel-Buffering", "no");
    const std::string id = job->id;
    auto cursor = std::make_shared<std::uint64_t>(last);
    auto quiet_since = std::make_shared<std::chrono::steady_clock::time_point>(std::chrono::steady_clock::now());
    res.set_chunked_content_provider("text/event-stream", [this, id, cursor, quiet_since](std::size_t,
                                                                                         httplib::DataSink& sink) {
      if (stopping) {
        sink.done();
        return true;
      }
      std::vector<StoredEvent> batch;
      try {
        batch = store().events_since(id, *cursor);
      } catch (const StoreError&) {
        sink.done();
        return true;
      }
      for (const auto& event : batch) {
        const auto frame = sse_frame(event);
        if (!sink.write(frame.data(), frame.size())) return false;
        *cursor = event.seq;
        if (is_terminal_status_event(event)) {
          sink.done();
          return true;
        }
      }
      const auto now = std::chrono::steady_clock::now();
      if (!batch.empty()) {
        *quiet_since = now;
      } else if (now - *quiet_since > kSseKeepAlive) {
        static constexpr std::string_view kPing = ": keep-alive\n\n";
        if (!sink.write(kPing.data(), kPing.size())) return false;
        *quiet_since = now;
      }
      if (batch.empty()) std::this_thread::sleep_for(kSsePoll);
      return true;
    });
  }
};

HttpService::HttpService(Orchestrator& orchestrator) : impl_(std::make_unique<Impl>(orchestrator)) {}

HttpService::~HttpService() { stop(); }

bool HttpService::bind(const std::string& host, int port) {
  if (port < 0 || port > 65535) return false;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else {
    impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  return impl_->port > 0;
}

int HttpService::port() const noexcept { return impl_->port; }

void HttpService::listen() {
  if (impl_->port <= 0) throw PreconditionError("HttpService::listen: bind() first");
  impl_->server.listen_after_bind();
}

void HttpService::stop() {
  impl_->stopping = true;
  impl_->server.stop();
}

}  // namespace ngym
