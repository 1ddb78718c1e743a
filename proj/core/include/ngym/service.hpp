#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ngym/agent.hpp"
#include "ngym/events.hpp"
#include "ngym/job.hpp"
#include "ngym/model_backend.hpp"
#include "ngym/queue_store.hpp"

namespace ngym {

/// Builds the model backend a job runs against.
using BackendFactory = std::function<std::unique_ptr<ModelBackend>(const JobRecord&)>;

/// Scripted negotiation backend; the concession schedule follows the job's
/// experiment "policy" (standard unless set to slow).
BackendFactory scripted_backend_factory();
/// Remote backend configured from the environment; checked once up front so a
/// missing key fails at startup.
BackendFactory remote_backend_factory();

struct ServiceOptions {
  int workers = 2;
  std::chrono::milliseconds lease{std::chrono::minutes(30)};
  std::chrono::milliseconds poll_interval{100};
  BackendFactory backend_factory;
};

struct JobOutput {
  std::string result;
  std::string report;
  std::string report_csv;
};

/// Episodes a job will run: num_runs, or n per mode for experiments.
int expected_episodes(const ScenarioConfig& config);

/// Runs a job's simulation or experiment to completion. `on_event` receives
/// episode, revision and warning events as they happen.
JobOutput execute_job(const JobRecord& job, ModelBackend& backend, const EventSink& on_event);

/// Per-agent cumulative utility curves of a simulation run.
nlohmann::ordered_json simulation_report(const Environment& env);

struct SubmitOutcome {
  JobRecord job;
  /// False when an idempotency key matched an earlier submission.
  bool created = true;
};

/// Job intake plus the worker pool. Workers claim jobs from the store, run
/// them, and persist results; each episode renews the claim's lease.
class Orchestrator {
 public:
  Orchestrator(std::shared_ptr<QueueStore> store, ServiceOptions options);
  ~Orchestrator();

  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  /// Parses and validates `document` (ConfigError / ValidationError), then
  /// persists a queued job.
  SubmitOutcome submit(std::string_view document, const std::optional<std::string>& idempotency_key = std::nullopt,
                       const std::optional<std::string>& user = std::nullopt);

  void start();
  /// Stops claiming new jobs and waits for running ones to finish.
  void stop();
  bool running() const noexcept { return !workers_.empty(); }

  /// Claims and runs one job on the calling thread. Returns false when the
  /// queue is empty.
  bool run_next(const std::string& worker_id);
  /// Re-queues or fails jobs whose lease expired.
  std::vector<std::string> reap();

  QueueStore& store() noexcept { return *store_; }
  const ServiceOptions& options() const noexcept { return options_; }

 private:
  void worker_loop(int index);
  void run_job(JobRecord job);

  std::shared_ptr<QueueStore> store_;
  ServiceOptions options_;
  std::atomic<bool> stopping_{false};
  std::vector<std::thread> workers_;
};

/// HTTP/JSON API and server-sent event streams over an Orchestrator.
///   POST /api/jobs                 submit (Idempotency-Key, X-User headers)
///   GET  /api/jobs[?status=]       list
///   GET  /api/jobs/{id}            record
///   GET  /api/jobs/{id}/events     SSE; honours Last-Event-ID
///   GET  /api/jobs/{id}/result     result document
///   GET  /api/jobs/{id}/report     report document (?format=csv for the table)
///   GET  /api/schema               config JSON-Schema
class HttpService {
 public:
  explicit HttpService(Orchestrator& orchestrator);
  ~HttpService();

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Port 0 picks a free port. Returns false when the address cannot be bound.
  bool bind(const std::string& host, int port);
  int port() const noexcept;
  /// Serves until stop(); requires a successful bind().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ngym
