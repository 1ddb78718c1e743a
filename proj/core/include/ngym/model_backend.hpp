#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ngym/config.hpp"

namespace ngym {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
std::optional<Role> role_from(std::string_view name);

struct ChatMessage {
  Role role = Role::user;
  std::optional<std::string> author_name;
  std::string content;

  static ChatMessage system(std::string content) { return {Role::system, std::nullopt, std::move(content)}; }
  static ChatMessage user(std::string content, std::optional<std::string> author = std::nullopt) {
    return {Role::user, std::move(author), std::move(content)};
  }
  static ChatMessage assistant(std::string content, std::optional<std::string> author = std::nullopt) {
    return {Role::assistant, std::move(author), std::move(content)};
  }

  bool operator==(const ChatMessage&) const = default;
};

inline constexpr double kDefaultTemperature = 0.7;

struct CompletionParams {
  std::string model_id;
  double temperature = kDefaultTemperature;
  int max_output_tokens = 1024;
  std::chrono::milliseconds timeout{60'000};
  std::optional<std::uint64_t> seed;

  bool operator==(const CompletionParams&) const = default;
};

/// Throws PreconditionError when temperature is outside [0, 2], timeout is not
/// positive or max_output_tokens < 1.
void check(const CompletionParams& params);

nlohmann::ordered_json to_json(const CompletionParams& params);

/// Flat map of variable name to the raw reply string. Variables the model
/// reported as null are absent.
using StructuredReply = std::map<std::string, std::string, std::less<>>;

/// Uniform chat-completion interface. Implementations must be safe to call
/// from several jobs at once.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  /// Returns one assistant message. Requires a non-empty history whose first
  /// message has the system role.
  ChatMessage complete(std::span<const ChatMessage> history, const CompletionParams& params);

  /// Asks for a flat JSON object with one key per schema entry and returns
  /// the raw values. An unparseable reply gets one repair retry. Keys of
  /// non-optional specs must be present and non-null.
  StructuredReply complete_structured(std::span<const ChatMessage> history, const CompletionParams& params,
                                      std::span<const OutputVariableSpec> schema);

  virtual std::string name() const = 0;

 protected:
  virtual ChatMessage do_complete(std::span<const ChatMessage> history, const CompletionParams& params) = 0;
};

/// Text appended (as a user message) to request strict JSON.
std::string structured_instruction(std::span<const OutputVariableSpec> schema);
inline constexpr std::string_view kRepairInstruction =
    "Your previous reply was not a valid JSON object. Reply again with ONLY the JSON object, "
    "no prose and no code fences.";

/// Parses a reply as a flat JSON object. Code fences and surrounding prose
/// are tolerated; returns nullopt when no flat object can be recovered.
std::optional<StructuredReply> parse_structured_reply(std::string_view reply);

/// Read-only view of the conversation handed to scripted rules.
struct ScriptContext {
  std::span<const ChatMessage> history;
  const CompletionParams& params;

  const ChatMessage& last() const { return history.back(); }
  const ChatMessage& system() const { return history.front(); }
  /// Number of assistant messages already in the history.
  std::size_t assistant_turns() const;
  /// Most recent message with the user role, if any.
  const ChatMessage* last_user() const;
};

/// Deterministic rule-table backend. Rules are tried in order; the first
/// matching rule produces the reply, otherwise the default response is used.
class ScriptedBackend : public ModelBackend {
 public:
  using Matcher = std::function<bool(const ScriptContext&)>;
  using Responder = std::function<std::string(const ScriptContext&)>;

  struct Rule {
    std::string label;
    Matcher matcher;
    Responder response;
  };

  ScriptedBackend() = default;
  explicit ScriptedBackend(std::vector<Rule> rules, Responder default_response = {});

  ScriptedBackend& add_rule(Rule rule);
  /// Reply with `response` whenever the last message ends with `suffix`.
  ScriptedBackend& when_last_ends_with(std::string suffix, std::string response);
  ScriptedBackend& otherwise(Responder response);

  std::string name() const override { return "scripted"; }

 protected:
  ChatMessage do_complete(std::span<const ChatMessage> history, const CompletionParams& params) override;

 private:
  std::vector<Rule> rules_;
  Responder default_response_;
};

}  // namespace ngym
