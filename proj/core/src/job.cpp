#include "ngym/job.hpp"

#include <cctype>
#include <cstdio>
#include <ctime>
#include <random>

#include "ngym/error.hpp"

namespace ngym {

std::string_view to_string(JobStatus status) {
  switch (status) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
  }
  return "queued";
}

std::optional<JobStatus> job_status_from(std::string_view name) {
  for (auto s : {JobStatus::queued, JobStatus::running, JobStatus::done, JobStatus::failed}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

bool is_terminal(JobStatus status) { return status == JobStatus::done || status == JobStatus::failed; }

bool is_forward_transition(JobStatus from, JobStatus to) {
  switch (from) {
    case JobStatus::queued: return to == JobStatus::running;
    case JobStatus::running: return to == JobStatus::done || to == JobStatus::failed;
    default: return false;
  }
}

bool is_lease_requeue(JobStatus from, JobStatus to) { return from == JobStatus::running && to == JobStatus::queued; }

std::string_view to_string(JobKind kind) { return kind == JobKind::experiment ? "experiment" : "simulation"; }

nlohmann::ordered_json to_json(const JobRecord& job) {
  using ojson = nlohmann::ordered_json;
  auto opt = [](const auto& v) { return v ? ojson(*v) : ojson(nullptr); };
  ojson out;
  out["id"] = job.id;
  out["status"] = std::string(to_string(job.status));
  out["kind"] = std::string(to_string(job.kind));
  out["submitted_at"] = job.submitted_at;
  out["started_at"] = opt(job.started_at);
  out["finished_at"] = opt(job.finished_at);
  out["progress"] = job.progress;
  out["total"] = job.total;
  out["result_ref"] = opt(job.result_ref);
  out["error"] = opt(job.error);
  out["idempotency_key"] = opt(job.idempotency_key);
  out["user"] = opt(job.user);
  out["attempts"] = job.attempts;
  out["worker"] = opt(job.worker);
  out["lease_expires_at"] = opt(job.lease_expires_at);
  out["config"] = job.config;
  return out;
}

JobRecord job_from_json(const nlohmann::json& doc) {
  try {
    JobRecord job;
    job.id = doc.at("id").get<std::string>();
    const auto status = job_status_from(doc.at("status").get<std::string>());
    if (!status) throw StoreError("job " + job.id + " has an unknown status");
    job.status = *status;
    job.kind = doc.at("kind").get<std::string>() == "experiment" ? JobKind::experiment : JobKind::simulation;
    job.submitted_at = doc.at("submitted_at").get<std::string>();
    auto opt_string = [&](const char* key, std::optional<std::string>& target) {
      if (const auto it = doc.find(key); it != doc.end() && !it->is_null()) target = it->get<std::string>();
    };
    opt_string("started_at", job.started_at);
    opt_string("finished_at", job.finished_at);
    opt_string("result_ref", job.result_ref);
    opt_string("error", job.error);
    opt_string("idempotency_key", job.idempotency_key);
    opt_string("user", job.user);
    opt_string("worker", job.worker);
    job.progress = doc.value("progress", 0);
    job.total = doc.value("total", 0);
    job.attempts = doc.value("attempts", 0);
    if (const auto it = doc.find("lease_expires_at"); it != doc.end() && !it->is_null()) {
      job.lease_expires_at = it->get<std::int64_t>();
    }
    job.config = doc.at("config");
    return job;
  } catch (const nlohmann::json::exception& e) {
    throw StoreError(std::string("malformed job record: ") + e.what());
  }
}

std::string new_job_id() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  const std::uint64_t hi = rng();
  const std::uint64_t lo = rng();
  unsigned char bytes[16];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<unsigned char>(hi >> (8 * (7 - i)));
    bytes[8 + i] = static_cast<unsigned char>(lo >> (8 * (7 - i)));
  }
  bytes[6] = static_cast<unsigned char>((bytes[6] & 0x0F) | 0x40);
  bytes[8] = static_cast<unsigned char>((bytes[8] & 0x3F) | 0x80);
  char out[37];
  std::snprintf(out, sizeof out, "%02x%02x%02x%02x-%02x%02x-%02x%02x-%02x%02x-%02x%02x%02x%02x%02x%02x", bytes[0],
                bytes[1], bytes[2], bytes[3], bytes[4], bytes[5], bytes[6], bytes[7], bytes[8], bytes[9], bytes[10],
                bytes[11], bytes[12], bytes[13], bytes[14], bytes[15]);
  return out;
}

bool is_job_id(std::string_view text) {
  if (text.size() != 36) return false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (i == 8 || i == 13 || i == 18 || i == 23) {
      if (text[i] != '-') return false;
    } else if (!std::isxdigit(static_cast<unsigned char>(text[i]))) {
      return false;
    }
  }
  return true;
}

std::string iso_timestamp(std::chrono::system_clock::time_point at) {
  const auto ms = epoch_millis(at);
  const std::time_t seconds = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&seconds, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms % 1000));
  return buf;
}

std::int64_t epoch_millis(std::chrono::system_clock::time_point at) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(at.time_since_epoch()).count();
}

}  // namespace ngym
