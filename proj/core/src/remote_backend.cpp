#include "ngym/remote_backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "ngym/error.hpp"

namespace ngym {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // "" or "/v1"
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url", "expected scheme://host[:port][/path], got '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.origin = url;
  } else {
    out.origin = url.substr(0, path_start);
    out.path = url.substr(path_start);
  }
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

std::string env_or(std::string_view name, std::string fallback) {
  const char* value = std::getenv(std::string(name).c_str());
  return (value != nullptr && *value != '\0') ? std::string(value) : std::move(fallback);
}

}  // namespace

std::chrono::milliseconds RetryPolicy::backoff_after(int attempt) const {
  const double scaled = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, attempt - 1);
  const auto capped = std::min(scaled, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<long long>(capped));
}

bool is_retryable_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

nlohmann::ordered_json build_chat_request(std::span<const ChatMessage> history, const CompletionParams& params) {
  nlohmann::ordered_json messages = nlohmann::ordered_json::array();
  for (const auto& message : history) {
    nlohmann::ordered_json m;
    m["role"] = std::string(to_string(message.role));
    if (message.role == Role::user && message.author_name) {
      m["content"] = *message.author_name + ": " + message.content;
    } else {
      m["content"] = message.content;
    }
    messages.push_back(std::move(m));
  }
  nlohmann::ordered_json body;
  body["model"] = params.model_id;
  body["messages"] = std::move(messages);
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_output_tokens;
  return body;
}

ChatMessage parse_chat_response(std::string_view body) {
  const auto doc = nlohmann::json::parse(body.begin(), body.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw MalformedResponseError("response body is not a JSON object");
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    throw MalformedResponseError("response has no choices");
  }
  const auto& first = (*choices)[0];
  const auto message = first.find("message");
  if (message == first.end() || !message->is_object()) throw MalformedResponseError("choice has no message");
  const auto content = message->find("content");
  if (content == message->end() || !content->is_string()) {
    throw MalformedResponseError("message has no string content");
  }
  return ChatMessage::assistant(content->get<std::string>());
}

RemoteBackend::RemoteBackend(std::string base_url, std::string api_key, RetryPolicy retry)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), retry_(retry) {
  if (retry_.max_attempts < 1) throw PreconditionError("retry policy needs at least one attempt");
  auto parsed = split_url(base_url_);
  origin_ = std::move(parsed.origin);
  path_prefix_ = std::move(parsed.path);
  sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

RemoteBackend::~RemoteBackend() = default;

std::unique_ptr<RemoteBackend> RemoteBackend::from_environment(RetryPolicy retry) {
  const std::string key = env_or(kApiKeyEnv, "");
  if (key.empty()) {
    throw ConfigError(std::string(kApiKeyEnv), "environment variable is not set; the remote backend needs an API key");
  }
  return std::make_unique<RemoteBackend>(env_or(kBaseUrlEnv, std::string(kDefaultBaseUrl)), key, retry);
}

ChatMessage RemoteBackend::do_complete(std::span<const ChatMessage> history, const CompletionParams& params) {
  const std::string body = build_chat_request(history, params).dump();
  const std::string path = path_prefix_ + "/chat/completions";
  const httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};

  const auto timeout = params.timeout;
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);

  int last_status = 0;
  std::string last_body;
  std::string last_error;
  bool timed_out = false;

  for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
    httplib::Client client(origin_);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path, headers, body, "application/json");
    if (res) {
      last_status = res->status;
      last_body = res->body;
      if (res->status >= 200 && res->status < 300) return parse_chat_response(res->body);
      if (!is_retryable_status(res->status)) {
        throw TransportError("chat completion failed with HTTP " + std::to_string(res->status), res->status,
                             res->body);
      }
      last_error = "HTTP " + std::to_string(res->status);
      timed_out = false;
    } else {
      last_error = httplib::to_string(res.error());
      timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                  std::chrono::steady_clock::now() - started >= timeout;
    }
    if (attempt < retry_.max_attempts) sleeper_(retry_.backoff_after(attempt));
  }

  const std::string message = "chat completion failed after " + std::to_string(retry_.max_attempts) +
                              " attempts: " + last_error;
  if (timed_out) throw TimeoutError(message, last_status, last_body);
  throw TransportError(message, last_status, last_body);
}

}  // namespace ngym
