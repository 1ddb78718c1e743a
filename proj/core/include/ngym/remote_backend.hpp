#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ngym/model_backend.hpp"

namespace ngym {

inline constexpr std::string_view kApiKeyEnv = "NEGOTIATION_GYM_API_KEY";
inline constexpr std::string_view kBaseUrlEnv = "NEGOTIATION_GYM_BASE_URL";
inline constexpr std::string_view kDefaultBaseUrl = "https://api.openai.com/v1";

struct RetryPolicy {
  /// Total attempts, including the first one.
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{4000};

  /// Delay before attempt `attempt + 1` (attempt counts from 1).
  std::chrono::milliseconds backoff_after(int attempt) const;
};

/// True for statuses worth retrying: 429 and 5xx.
bool is_retryable_status(int status);

/// Request body for POST {base_url}/chat/completions. Messages authored by a
/// named participant on the user side are rendered as "Name: content".
nlohmann::ordered_json build_chat_request(std::span<const ChatMessage> history, const CompletionParams& params);

/// Extracts choices[0].message.content; throws MalformedResponseError.
ChatMessage parse_chat_response(std::string_view body);

/// OpenAI-compatible chat-completions client.
class RemoteBackend : public ModelBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  RemoteBackend(std::string base_url, std::string api_key, RetryPolicy retry = {});
  ~RemoteBackend() override;

  /// Reads the key and base URL from NEGOTIATION_GYM_API_KEY and
  /// NEGOTIATION_GYM_BASE_URL. Throws ConfigError when the key is unset.
  static std::unique_ptr<RemoteBackend> from_environment(RetryPolicy retry = {});

  /// Replaces std::this_thread::sleep_for between retries (tests).
  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

  const std::string& base_url() const noexcept { return base_url_; }
  std::string name() const override { return "remote"; }

 protected:
  ChatMessage do_complete(std::span<const ChatMessage> history, const CompletionParams& params) override;

 private:
  std::string base_url_;
  std::string origin_;
  std::string path_prefix_;
  std::string api_key_;
  RetryPolicy retry_;
  Sleeper sleeper_;
};

}  // namespace ngym
