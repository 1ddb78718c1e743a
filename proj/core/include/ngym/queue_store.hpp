#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ngym/job.hpp"

namespace ngym {

struct StoredEvent {
  std::uint64_t seq = 0;
  std::string type;
  nlohmann::ordered_json data;
};

struct JobFilter {
  std::optional<JobStatus> status;
  std::optional<std::string> user;
};

/// Persistent job queue. Every operation is atomic per job id, and status
/// changes are appended to the job's event log as "status" events.
class QueueStore {
 public:
  virtual ~QueueStore() = default;

  /// Persists a queued job and puts it at the back of the queue.
  virtual void enqueue(const JobRecord& job) = 0;
  /// Oldest queued job, moved to running under a lease held by `worker`. No
  /// two callers ever receive the same claim.
  virtual std::optional<JobRecord> claim_next(const std::string& worker, std::chrono::milliseconds lease) = 0;
  /// Replaces a record. Enforces the status machine, monotone progress,
  /// done => result_ref, and lease ownership for running jobs.
  virtual void update(const JobRecord& job) = 0;
  virtual std::optional<JobRecord> get(std::string_view id) const = 0;
  /// Records in submission order.
  virtual std::vector<JobRecord> list(const JobFilter& filter = {}) const = 0;

  /// Results are write-once: storing a different document under an existing
  /// key throws StoreError.
  virtual void put_result(std::string_view key, std::string_view document) = 0;
  virtual std::optional<std::string> get_result(std::string_view key) const = 0;

  /// Returns the new event's sequence number (1-based, per job).
  virtual std::uint64_t append_event(std::string_view id, std::string type, nlohmann::ordered_json data) = 0;
  virtual std::vector<StoredEvent> events_since(std::string_view id, std::uint64_t after_seq) const = 0;

  /// Binds `key` to `id` unless the key is already taken; returns the owner.
  virtual std::string bind_idempotency_key(std::string_view key, std::string_view id) = 0;

  /// Running jobs whose lease lapsed are re-queued on their first expiry and
  /// failed on the second. Returns the affected ids.
  virtual std::vector<std::string> reap_expired(std::chrono::system_clock::time_point now) = 0;
};

/// Directory-backed store. Layout under the root:
///   jobs/<id>.json           records, replaced by write-then-rename
///   queue/<seq>_<id>         queued markers, claimed by renaming into claimed/
///   claimed/<seq>_<id>
///   results/<key>            write-once documents (hard link if absent)
///   events/<id>.jsonl        append-only event log
///   idempotency/<sha256>     key -> job id
class FileQueueStore : public QueueStore {
 public:
  explicit FileQueueStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  void enqueue(const JobRecord& job) override;
  std::optional<JobRecord> claim_next(const std::string& worker, std::chrono::milliseconds lease) override;
  void update(const JobRecord& job) override;
  std::optional<JobRecord> get(std::string_view id) const override;
  std::vector<JobRecord> list(const JobFilter& filter = {}) const override;
  void put_result(std::string_view key, std::string_view document) override;
  std::optional<std::string> get_result(std::string_view key) const override;
  std::uint64_t append_event(std::string_view id, std::string type, nlohmann::ordered_json data) override;
  std::vector<StoredEvent> events_since(std::string_view id, std::uint64_t after_seq) const override;
  std::string bind_idempotency_key(std::string_view key, std::string_view id) override;
  std::vector<std::string> reap_expired(std::chrono::system_clock::time_point now) override;

 private:
  std::filesystem::path job_path(std::string_view id) const;
  std::optional<JobRecord> load(std::string_view id) const;
  void store(const JobRecord& job);
  std::optional<std::filesystem::path> claimed_marker(std::string_view id) const;
  std::uint64_t append_event_locked(std::string_view id, std::string type, nlohmann::ordered_json data);
  void append_status_event(const JobRecord& job, std::optional<std::string> reason = std::nullopt);

  std::filesystem::path root_;
  mutable std::mutex jobs_mutex_;
  mutable std::mutex events_mutex_;
  std::map<std::string, std::uint64_t, std::less<>> last_seq_;
  std::uint64_t marker_counter_ = 0;
};

std::string sha256_hex(std::string_view data);

}  // namespace ngym
