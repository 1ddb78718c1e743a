#include <map>

#include "ngym/engine.hpp"
#include "ngym/error.hpp"
#include "ngym/metrics.hpp"
#include "ngym/negotiation.hpp"
#include "ngym/remote_backend.hpp"
#include "ngym/scripted_negotiation.hpp"
#include "ngym/service.hpp"

namespace ngym {

namespace {

/// Thrown from the event callback when the store no longer lets this worker
/// write the job (its lease was taken over).
class LeaseLost : public StoreError {
 public:
  using StoreError::StoreError;
};

std::string job_policy(const JobRecord& job) {
  if (const auto it = job.config.find("experiment"); it != job.config.end() && it->is_object()) {
    if (const auto p = it->find("policy"); p != it->end() && p->is_string()) return p->get<std::string>();
  }
  return "standard";
}

}  // namespace

BackendFactory scripted_backend_factory() {
  return [](const JobRecord& job) -> std::unique_ptr<ModelBackend> {
    return make_negotiation_backend(schedule_named(job_policy(job)).value_or(ConcessionSchedule::standard()));
  };
}

BackendFactory remote_backend_factory() {
  (void)RemoteBackend::from_environment();
  return [](const JobRecord&) -> std::unique_ptr<ModelBackend> { return RemoteBackend::from_environment(); };
}

int expected_episodes(const ScenarioConfig& config) {
  if (const auto block = experiment_block_from(config)) return block->n * static_cast<int>(block->modes.size());
  return config.num_runs;
}

nlohmann::ordered_json simulation_report(const Environment& env) {
  using ojson = nlohmann::ordered_json;
  std::map<std::string, std::vector<double>> series;
  int failed = 0;
  for (const auto& run : env.runs) {
    if (run.failed) {
      ++failed;
      continue;
    }
    for (const auto& [name, u] : run.utilities) series[name].push_back(u);
  }
  ojson agents = ojson::object();
  for (const auto& [name, values] : series) {
    ojson entry;
    entry["cum_avg"] = cumulative_average(values);
    entry["mean"] = entry["cum_avg"].back();
    agents[name] = std::move(entry);
  }
  ojson out;
  out["kind"] = "simulation";
  out["episodes"] = env.runs.size();
  out["failed_episodes"] = failed;
  out["revisions"] = env.revisions.size();
  out["agents"] = std::move(agents);
  return out;
}

JobOutput execute_job(const JobRecord& job, ModelBackend& backend, const EventSink& on_event) {
  const auto config = parse_config(job.config.dump());
  const auto engine = engine_options_from(config);
  JobOutput out;

  if (const auto block = experiment_block_from(config)) {
    nlohmann::ordered_json results = nlohmann::ordered_json::array();
    std::map<ReflectMode, MetricsBundle> bundles;
    for (const auto mode : block->modes) {
      ExperimentSettings settings;
      settings.mode = mode;
      settings.n = block->n;
      settings.max_turns = block->max_turns;
      settings.seed = block->seed;
      settings.model_id = config.model_id;
      settings.params = engine.params;
      settings.coach_prompt = config.optimization_prompt;
      auto result = run_experiment(settings, backend, on_event);
      bundles[mode] = result.aggregates;
      results.push_back(to_json(result));
    }
    nlohmann::ordered_json doc;
    doc["kind"] = "experiment";
    doc["policy"] = job_policy(job);
    doc["results"] = std::move(results);
    const auto report = render_report(bundles);
    out.result = doc.dump(2);
    out.report = report.json.dump(2);
    out.report_csv = report.csv;
    return out;
  }

  auto agents = make_agents(config);
  const auto env = run_simulation(config, agents, backend, engine, on_event);
  out.result = serialize_environment(env);
  out.report = simulation_report(env).dump(2);
  out.report_csv = "agent,episodes,mean_utility\n";
  for (const auto& [name, entry] : simulation_report(env)["agents"].items()) {
    out.report_csv += name + "," + std::to_string(entry["cum_avg"].size()) + "," + entry["mean"].dump() + "\n";
  }
  return out;
}

Orchestrator::Orchestrator(std::shared_ptr<QueueStore> store, ServiceOptions options)
    : store_(std::move(store)), options_(std::move(options)) {
  if (!store_) throw PreconditionError("Orchestrator: store is required");
  if (options_.workers < 1) throw PreconditionError("Orchestrator: at least one worker is required");
  if (!options_.backend_factory) options_.backend_factory = scripted_backend_factory();
}

Orchestrator::~Orchestrator() { stop(); }

SubmitOutcome Orchestrator::submit(std::string_view document, const std::optional<std::string>& idempotency_key,
                                   const std::optional<std::string>& user) {
  const auto config = parse_config(document);
  (void)engine_options_from(config);
  const bool experiment = experiment_block_from(config).has_value();

  JobRecord job;
  job.id = new_job_id();
  if (idempotency_key) {
    const auto owner = store_->bind_idempotency_key(*idempotency_key, job.id);
    if (owner != job.id) {
      // The first submitter may still be writing its record.
      for (int i = 0; i < 200; ++i) {
        if (auto existing = store_->get(owner)) return SubmitOutcome{std::move(*existing), false};
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      throw StoreError("idempotency key is bound to job " + owner + " which was never stored");
    }
  }
  job.status = JobStatus::queued;
  job.kind = experiment ? JobKind::experiment : JobKind::simulation;
  job.submitted_at = iso_timestamp(std::chrono::system_clock::now());
  job.config = to_json(config);
  job.total = expected_episodes(config);
  job.idempotency_key = idempotency_key;
  job.user = user;
  store_->enqueue(job);
  return SubmitOutcome{std::move(job), true};
}

void Orchestrator::start() {
  if (!workers_.empty()) return;
  stopping_ = false;
  for (int i = 0; i < options_.workers; ++i) workers_.emplace_back([this, i] { worker_loop(i); });
}

void Orchestrator::stop() {
  stopping_ = true;
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
  workers_.clear();
}

std::vector<std::string> Orchestrator::reap() { return store_->reap_expired(std::chrono::system_clock::now()); }

bool Orchestrator::run_next(const std::string& worker_id) {
  auto job = store_->claim_next(worker_id, options_.lease);
  if (!job) return false;
  run_job(std::move(*job));
  return true;
}

void Orchestrator::worker_loop(int index) {
  const std::string worker_id = "worker-" + std::to_string(index) + "-" + new_job_id().substr(0, 8);
  while (!stopping_) {
    bool worked = false;
    try {
      if (index == 0) reap();
      worked = run_next(worker_id);
    } catch (const std::exception&) {
      // Store trouble; back off and retry on the next poll.
    }
    if (!worked) std::this_thread::sleep_for(options_.poll_interval);
  }
}

void Orchestrator::run_job(JobRecord job) {
  auto finish_failed = [&](const std::string& message) {
    job.status = JobStatus::failed;
    job.error = message;
    job.finished_at = iso_timestamp(std::chrono::system_clock::now());
    job.lease_expires_at.reset();
    try {
      store_->update(job);
    } catch (const StoreError&) {
      // Lease already moved on; the new owner decides the outcome.
    }
  };

  EventSink on_event = [&](const Event& event) {
    store_->append_event(job.id, event.type, event.data);
    if (event.type != "episode") return;
    const auto before = job;
    job.progress = std::min(job.total, job.progress + 1);
    job.lease_expires_at = epoch_millis(std::chrono::system_clock::now() + options_.lease);
    try {
      store_->update(job);
    } catch (const StoreError& e) {
      job = before;
      throw LeaseLost(e.what());
    }
  };

  try {
    auto backend = options_.backend_factory(job);
    const auto output = execute_job(job, *backend, on_event);
    store_->put_result(job.id + ".json", output.result);
    store_->put_result(job.id + ".report.json", output.report);
    store_->put_result(job.id + ".report.csv", output.report_csv);
    job.result_ref = job.id + ".json";
    job.status = JobStatus::done;
    job.finished_at = iso_timestamp(std::chrono::system_clock::now());
    job.lease_expires_at.reset();
    store_->update(job);
  } catch (const LeaseLost&) {
    return;
  } catch (const ValidationError& e) {
    std::string message = e.what();
    for (const auto& v : e.violations()) message += "; " + v.path + ": " + v.message;
    finish_failed(message);
  } catch (const std::exception& e) {
    finish_failed(e.what());
  }
}

}  // namespace ngym
