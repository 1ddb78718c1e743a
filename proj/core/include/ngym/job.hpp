#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace ngym {

enum class JobStatus { queued, running, done, failed };

std::string_view to_string(JobStatus status);
std::optional<JobStatus> job_status_from(std::string_view name);
bool is_terminal(JobStatus status);

/// queued -> running -> {done, failed}. The only backwards edge is
/// running -> queued, used once when a worker's lease expires.
bool is_forward_transition(JobStatus from, JobStatus to);
bool is_lease_requeue(JobStatus from, JobStatus to);

enum class JobKind { simulation, experiment };

std::string_view to_string(JobKind kind);

struct JobRecord {
  std::string id;
  JobStatus status = JobStatus::queued;
  JobKind kind = JobKind::simulation;
  std::string submitted_at;
  std::optional<std::string> started_at;
  std::optional<std::string> finished_at;
  /// Canonical config document, including any experiment block.
  nlohmann::ordered_json config;
  /// Episodes completed so far and the number expected.
  int progress = 0;
  int total = 0;
  std::optional<std::string> result_ref;
  std::optional<std::string> error;
  std::optional<std::string> idempotency_key;
  /// Honor-system submitter tag.
  std::optional<std::string> user;

  // Claim bookkeeping.
  int attempts = 0;
  std::optional<std::string> worker;
  /// Milliseconds since the Unix epoch.
  std::optional<std::int64_t> lease_expires_at;

  bool operator==(const JobRecord&) const = default;
};

nlohmann::ordered_json to_json(const JobRecord& job);
/// Throws StoreError on a malformed document.
JobRecord job_from_json(const nlohmann::json& document);

/// Random RFC 4122 version-4 identifier.
std::string new_job_id();
bool is_job_id(std::string_view text);

std::string iso_timestamp(std::chrono::system_clock::time_point at);
std::int64_t epoch_millis(std::chrono::system_clock::time_point at);

}  // namespace ngym
