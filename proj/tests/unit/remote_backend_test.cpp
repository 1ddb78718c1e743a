#include <gtest/gtest.h>

#include <httplib.h>

#include <cstdlib>
#include <mutex>
#include <thread>

#include <ngym/remote_backend.hpp>

#include "test_support.hpp"

namespace ngym {
namespace {

using nlohmann::json;

/// Chat-completions endpoint on a loopback port that answers with a queue of
/// canned (status, body) pairs and records every request.
class FakeProvider {
 public:
  FakeProvider() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      requests_.push_back(req.body);
      authorizations_.push_back(req.get_header_value("Authorization"));
      const auto& [status, body] = replies_[std::min(requests_.size() - 1, replies_.size() - 1)];
      res.status = status;
      res.set_content(body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeProvider() {
    server_.stop();
    thread_.join();
  }

  void reply_with(std::vector<std::pair<int, std::string>> replies) { replies_ = std::move(replies); }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  std::vector<std::string> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }
  std::vector<std::string> authorizations() const {
    std::lock_guard lock(mutex_);
    return authorizations_;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::vector<std::pair<int, std::string>> replies_{{200, "{}"}};
  std::vector<std::string> requests_;
  std::vector<std::string> authorizations_;
};

std::vector<ChatMessage> buyer_history() {
  return {ChatMessage::system("You are the buyer."), ChatMessage::user("Asking 1200.", "Seller"),
          ChatMessage::assistant("I offer 1000.", "Buyer"), ChatMessage::user("I can do 1150.", "Seller")};
}

CompletionParams gpt4o() {
  CompletionParams p;
  p.model_id = "gpt-4o";
  p.timeout = std::chrono::milliseconds(5000);
  return p;
}

std::string ok_body() { return testing::read_file(testing::fixture_path("wire/chat_response.json")); }

RemoteBackend backend_for(const FakeProvider& provider, std::vector<std::chrono::milliseconds>* sleeps = nullptr) {
  RemoteBackend backend(provider.base_url(), "test-key");
  backend.set_sleeper([sleeps](std::chrono::milliseconds d) {
    if (sleeps != nullptr) sleeps->push_back(d);
  });
  return backend;
}

TEST(RemoteBackend, RequestMatchesGoldenWireFormat) {
  const auto golden = json::parse(testing::read_file(testing::fixture_path("wire/chat_request.json")));
  EXPECT_EQ(json(build_chat_request(buyer_history(), gpt4o())), golden);
}

TEST(RemoteBackend, ReplyComesFromRecordedFixture) {
  FakeProvider provider;
  provider.reply_with({{200, ok_body()}});
  auto backend = backend_for(provider);
  const auto history = buyer_history();
  const auto reply = backend.complete(history, gpt4o());
  EXPECT_EQ(reply.role, Role::assistant);
  EXPECT_EQ(reply.content, "I offer 1050.");

  ASSERT_EQ(provider.requests().size(), 1u);
  EXPECT_EQ(json::parse(provider.requests()[0]),
            json::parse(testing::read_file(testing::fixture_path("wire/chat_request.json"))));
  EXPECT_EQ(provider.authorizations()[0], "Bearer test-key");
}

TEST(RemoteBackend, ServerErrorThreeTimesCarriesLastStatus) {
  FakeProvider provider;
  provider.reply_with({{500, R"({"error":"a"})"}, {502, R"({"error":"b"})"}, {500, R"({"error":"c"})"}});
  std::vector<std::chrono::milliseconds> sleeps;
  auto backend = backend_for(provider, &sleeps);
  const auto history = buyer_history();
  try {
    backend.complete(history, gpt4o());
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 500);
    EXPECT_EQ(e.body(), R"({"error":"c"})");
  }
  EXPECT_EQ(provider.requests().size(), 3u);
  EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1000),
                                                            std::chrono::milliseconds(2000)}));
}

TEST(RemoteBackend, RateLimitIsRetried) {
  FakeProvider provider;
  provider.reply_with({{429, "{}"}, {200, ok_body()}});
  auto backend = backend_for(provider);
  const auto history = buyer_history();
  EXPECT_EQ(backend.complete(history, gpt4o()).content, "I offer 1050.");
  EXPECT_EQ(provider.requests().size(), 2u);
}

TEST(RemoteBackend, ClientErrorFailsFast) {
  FakeProvider provider;
  provider.reply_with({{401, R"({"error":"bad key"})"}, {200, ok_body()}});
  auto backend = backend_for(provider);
  const auto history = buyer_history();
  try {
    backend.complete(history, gpt4o());
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 401);
  }
  EXPECT_EQ(provider.requests().size(), 1u);
}

TEST(RemoteBackend, MalformedBodyIsReported) {
  FakeProvider provider;
  provider.reply_with({{200, R"({"choices": []})"}});
  auto backend = backend_for(provider);
  const auto history = buyer_history();
  EXPECT_THROW(backend.complete(history, gpt4o()), MalformedResponseError);
}

TEST(RemoteBackend, UnreachableHostIsATransportErrorWithoutStatus) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  RemoteBackend backend("http://127.0.0.1:" + std::to_string(port) + "/v1", "k", RetryPolicy{2});
  backend.set_sleeper([](std::chrono::milliseconds) {});
  const auto history = buyer_history();
  try {
    backend.complete(history, gpt4o());
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.status(), 0);
  }
}

TEST(RemoteBackend, BackoffDoublesUpToTheCap) {
  RetryPolicy retry;
  retry.max_attempts = 5;
  EXPECT_EQ(retry.backoff_after(1), std::chrono::milliseconds(1000));
  EXPECT_EQ(retry.backoff_after(2), std::chrono::milliseconds(2000));
  EXPECT_EQ(retry.backoff_after(3), std::chrono::milliseconds(4000));
  EXPECT_EQ(retry.backoff_after(4), std::chrono::milliseconds(4000));
  EXPECT_TRUE(is_retryable_status(503));
  EXPECT_TRUE(is_retryable_status(429));
  EXPECT_FALSE(is_retryable_status(404));
}

TEST(RemoteBackend, MissingKeyIsAConfigError) {
  const char* saved = std::getenv(std::string(kApiKeyEnv).c_str());
  const std::string restore = saved ? saved : "";
  ::unsetenv(std::string(kApiKeyEnv).c_str());
  EXPECT_THROW(RemoteBackend::from_environment(), ConfigError);
  if (saved) ::setenv(std::string(kApiKeyEnv).c_str(), restore.c_str(), 1);
}

TEST(RemoteBackend, BaseUrlNeedsAScheme) { EXPECT_THROW(RemoteBackend("localhost:8080", "k"), ConfigError); }

}  // namespace
}  // namespace ngym
