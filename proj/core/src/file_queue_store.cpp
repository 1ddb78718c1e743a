#include "ngym/queue_store.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <tuple>

#include <openssl/evp.h>

#include "ngym/error.hpp"

namespace ngym {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_temp(const fs::path& dir, std::string_view content) {
  static std::atomic<std::uint64_t> counter{0};
  const auto path = dir / ("." + std::to_string(::getpid()) + "." + std::to_string(counter++) + ".tmp");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw StoreError("short write to " + path.string());
  return path;
}

void write_atomic(const fs::path& target, std::string_view content) {
  const auto tmp = write_temp(target.parent_path(), content);
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw StoreError("cannot replace " + target.string());
  }
}

/// Creates `target` with `content` only if it does not exist yet. Returns
/// false when another writer got there first.
bool write_if_absent(const fs::path& target, std::string_view content) {
  const auto tmp = write_temp(target.parent_path(), content);
  const int rc = ::link(tmp.c_str(), target.c_str());
  const int err = errno;
  std::error_code ec;
  fs::remove(tmp, ec);
  if (rc == 0) return true;
  if (err == EEXIST) return false;
  throw StoreError("cannot create " + target.string() + ": " + std::strerror(err));
}

bool safe_key(std::string_view key) {
  if (key.empty() || key.size() > 200 || key.front() == '.') return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
  });
}

std::int64_t now_millis() { return epoch_millis(std::chrono::system_clock::now()); }

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw StoreError("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0x0F];
  }
  return out;
}

FileQueueStore::FileQueueStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  for (const char* dir : {"jobs", "queue", "claimed", "results", "events", "idempotency"}) {
    fs::create_directories(root_ / dir, ec);
    if (ec) throw StoreError("cannot create store directory " + (root_ / dir).string() + ": " + ec.message());
  }
}

fs::path FileQueueStore::job_path(std::string_view id) const {
  if (!is_job_id(id)) throw StoreError("invalid job id '" + std::string(id) + "'");
  return root_ / "jobs" / (std::string(id) + ".json");
}

std::optional<JobRecord> FileQueueStore::load(std::string_view id) const {
  if (!is_job_id(id)) return std::nullopt;
  const auto path = job_path(id);
  std::error_code ec;
  if (!fs::exists(path, ec)) return std::nullopt;
  const auto text = read_file(path);
  const auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw StoreError("corrupt job record " + path.string());
  return job_from_json(doc);
}

void FileQueueStore::store(const JobRecord& job) { write_atomic(job_path(job.id), to_json(job).dump()); }

std::optional<fs::path> FileQueueStore::claimed_marker(std::string_view id) const {
  const std::string suffix = "_" + std::string(id);
  for (const auto& entry : fs::directory_iterator(root_ / "claimed")) {
    if (entry.path().filename().string().ends_with(suffix)) return entry.path();
  }
  return std::nullopt;
}

void FileQueueStore::append_status_event(const JobRecord& job, std::optional<std::string> reason) {
  nlohmann::ordered_json data;
  data["status"] = std::string(to_string(job.status));
  data["attempts"] = job.attempts;
  if (job.error) data["error"] = *job.error;
  if (reason) data["reason"] = *reason;
  append_event_locked(job.id, "status", std::move(data));
}

void FileQueueStore::enqueue(const JobRecord& job) {
  if (job.status != JobStatus::queued) throw StoreError("enqueue: job " + job.id + " is not queued");
  std::lock_guard lock(jobs_mutex_);
  if (load(job.id)) throw StoreError("enqueue: job " + job.id + " already exists");
  store(job);
  char seq[48];
  std::snprintf(seq, sizeof seq, "%020lld_%08llu", static_cast<long long>(now_millis()),
                static_cast<unsigned long long>(marker_counter_++));
  if (!write_if_absent(root_ / "queue" / (std::string(seq) + "_" + job.id), job.id)) {
    throw StoreError("enqueue: duplicate queue marker for " + job.id);
  }
  append_status_event(job);
}

std::optional<JobRecord> FileQueueStore::claim_next(const std::string& worker, std::chrono::milliseconds lease) {
  std::lock_guard lock(jobs_mutex_);
  std::vector<fs::path> markers;
  for (const auto& entry : fs::directory_iterator(root_ / "queue")) markers.push_back(entry.path());
  std::sort(markers.begin(), markers.end());

  for (const auto& marker : markers) {
    const auto claimed = root_ / "claimed" / marker.filename();
    std::error_code ec;
    fs::rename(marker, claimed, ec);
    if (ec) continue;  // another process won this marker

    const auto name = marker.filename().string();
    const auto id = name.substr(name.rfind('_') + 1);
    auto job = load(id);
    if (!job || job->status != JobStatus::queued) {
      fs::remove(claimed, ec);
      continue;
    }
    const auto now = std::chrono::system_clock::now();
    job->status = JobStatus::running;
    job->attempts += 1;
    job->worker = worker;
    job->started_at = iso_timestamp(now);
    job->lease_expires_at = epoch_millis(now + lease);
    store(*job);
    append_status_event(*job);
    return job;
  }
  return std::nullopt;
}

void FileQueueStore::update(const JobRecord& job) {
  std::lock_guard lock(jobs_mutex_);
  const auto current = load(job.id);
  if (!current) throw StoreError("update: unknown job " + job.id);
  if (current->status != job.status && !is_forward_transition(current->status, job.status)) {
    throw StoreError("update: illegal transition " + std::string(to_string(current->status)) + " -> " +
                     std::string(to_string(job.status)) + " for job " + job.id);
  }
  if (current->status == JobStatus::queued && job.status != JobStatus::queued) {
    throw StoreError("update: job " + job.id + " is queued; only a claim can start it");
  }
  if (current->status == JobStatus::running &&
      (current->worker != job.worker || current->attempts != job.attempts)) {
    throw StoreError("update: job " + job.id + " is no longer leased to " + job.worker.value_or("?"));
  }
  if (is_terminal(current->status) && *current != job) {
    throw StoreError("update: job " + job.id + " is already " + std::string(to_string(current->status)));
  }
  if (job.progress < current->progress) throw StoreError("update: progress of job " + job.id + " went backwards");
  if (job.status == JobStatus::done && !job.result_ref) throw StoreError("update: done job " + job.id + " has no result");

  store(job);
  if (is_terminal(job.status) && current->status != job.status) {
    std::error_code ec;
    if (auto marker = claimed_marker(job.id)) fs::remove(*marker, ec);
  }
  if (current->status != job.status) append_status_event(job);
}

std::optional<JobRecord> FileQueueStore::get(std::string_view id) const {
  std::lock_guard lock(jobs_mutex_);
  return load(id);
}

std::vector<JobRecord> FileQueueStore::list(const JobFilter& filter) const {
  std::lock_guard lock(jobs_mutex_);
  std::vector<JobRecord> out;
  for (const auto& entry : fs::directory_iterator(root_ / "jobs")) {
    const auto name = entry.path().filename().string();
    if (!name.ends_with(".json") || name.front() == '.') continue;
    auto job = load(name.substr(0, name.size() - 5));
    if (!job) continue;
    if (filter.status && job->status != *filter.status) continue;
    if (filter.user && job->user != filter.user) continue;
    out.push_back(std::move(*job));
  }
  std::sort(out.begin(), out.end(), [](const JobRecord& a, const JobRecord& b) {
    return std::tie(a.submitted_at, a.id) < std::tie(b.submitted_at, b.id);
  });
  return out;
}

void FileQueueStore::put_result(std::string_view key, std::string_view document) {
  if (!safe_key(key)) throw StoreError("invalid result key '" + std::string(key) + "'");
  const auto path = root_ / "results" / std::string(key);
  if (write_if_absent(path, document)) return;
  if (read_file(path) != document) throw StoreError("result '" + std::string(key) + "' is immutable");
}

std::optional<std::string> FileQueueStore::get_result(std::string_view key) const {
  if (!safe_key(key)) return std::nullopt;
  const auto path = root_ / "results" / std::string(key);
  std::error_code ec;
  if (!fs::exists(path, ec)) return std::nullopt;
  return read_file(path);
}

std::uint64_t FileQueueStore::append_event(std::string_view id, std::string type, nlohmann::ordered_json data) {
  return append_event_locked(id, std::move(type), std::move(data));
}

std::uint64_t FileQueueStore::append_event_locked(std::string_view id, std::string type,
                                                  nlohmann::ordered_json data) {
  if (!is_job_id(id)) throw StoreError("invalid job id '" + std::string(id) + "'");
  std::lock_guard lock(events_mutex_);
  const auto path = root_ / "events" / (std::string(id) + ".jsonl");
  auto it = last_seq_.find(id);
  if (it == last_seq_.end()) {
    std::uint64_t count = 0;
    if (std::ifstream in(path); in) {
      for (std::string line; std::getline(in, line);) {
        if (!line.empty()) ++count;
      }
    }
    it = last_seq_.emplace(std::string(id), count).first;
  }
  const std::uint64_t seq = it->second + 1;
  nlohmann::ordered_json line;
  line["seq"] = seq;
  line["type"] = std::move(type);
  line["at"] = iso_timestamp(std::chrono::system_clock::now());
  line["data"] = std::move(data);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  out << line.dump() << '\n';
  out.flush();
  if (!out) throw StoreError("cannot append to " + path.string());
  it->second = seq;
  return seq;
}

std::vector<StoredEvent> FileQueueStore::events_since(std::string_view id, std::uint64_t after_seq) const {
  if (!is_job_id(id)) return {};
  std::lock_guard lock(events_mutex_);
  std::vector<StoredEvent> out;
  std::ifstream in(root_ / "events" / (std::string(id) + ".jsonl"), std::ios::binary);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    auto doc = nlohmann::ordered_json::parse(line, nullptr, false);
    if (doc.is_discarded()) continue;
    const auto seq = doc.value("seq", std::uint64_t{0});
    if (seq <= after_seq) continue;
    out.push_back(StoredEvent{seq, doc.value("type", std::string()), doc["data"]});
  }
  return out;
}

std::string FileQueueStore::bind_idempotency_key(std::string_view key, std::string_view id) {
  const auto path = root_ / "idempotency" / sha256_hex(key);
  if (write_if_absent(path, id)) return std::string(id);
  return read_file(path);
}

std::vector<std::string> FileQueueStore::reap_expired(std::chrono::system_clock::time_point now) {
  std::lock_guard lock(jobs_mutex_);
  std::vector<std::string> affected;
  const auto now_ms = epoch_millis(now);
  for (const auto& entry : fs::directory_iterator(root_ / "jobs")) {
    const auto name = entry.path().filename().string();
    if (!name.ends_with(".json") || name.front() == '.') continue;
    auto job = load(name.substr(0, name.size() - 5));
    if (!job || job->status != JobStatus::running || !job->lease_expires_at || *job->lease_expires_at > now_ms) {
      continue;
    }
    const auto marker = claimed_marker(job->id);
    std::error_code ec;
    if (job->attempts < 2 && marker) {
      fs::rename(*marker, root_ / "queue" / marker->filename(), ec);
      if (ec) continue;
      job->status = JobStatus::queued;
      job->worker.reset();
      job->lease_expires_at.reset();
      store(*job);
      append_status_event(*job, "lease expired; re-queued");
    } else {
      if (marker) fs::remove(*marker, ec);
      job->status = JobStatus::failed;
      job->error = "worker lease expired twice";
      job->finished_at = iso_timestamp(now);
      job->lease_expires_at.reset();
      store(*job);
      append_status_event(*job, "lease expired");
    }
    affected.push_back(job->id);
  }
  return affected;
}

}  // namespace ngym
