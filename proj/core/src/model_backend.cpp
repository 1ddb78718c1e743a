#include "ngym/model_backend.hpp"

#include <vector>

#include "ngym/error.hpp"
#include "ngym/text.hpp"

namespace ngym {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system:
      return "system";
    case Role::user:
      return "user";
    case Role::assistant:
      return "assistant";
  }
  return "user";
}

std::optional<Role> role_from(std::string_view name) {
  if (name == "system") return Role::system;
  if (name == "user") return Role::user;
  if (name == "assistant") return Role::assistant;
  return std::nullopt;
}

void check(const CompletionParams& params) {
  if (!(params.temperature >= 0.0 && params.temperature <= 2.0)) {
    throw PreconditionError("temperature must lie in [0, 2]");
  }
  if (params.timeout.count() <= 0) throw PreconditionError("timeout must be positive");
  if (params.max_output_tokens < 1) throw PreconditionError("max_output_tokens must be positive");
}

nlohmann::ordered_json to_json(const CompletionParams& params) {
  nlohmann::ordered_json out;
  out["model_id"] = params.model_id;
  out["temperature"] = params.temperature;
  out["max_output_tokens"] = params.max_output_tokens;
  out["timeout_ms"] = params.timeout.count();
  out["seed"] = params.seed ? nlohmann::ordered_json(*params.seed) : nlohmann::ordered_json(nullptr);
  return out;
}

ChatMessage ModelBackend::complete(std::span<const ChatMessage> history, const CompletionParams& params) {
  if (history.empty()) throw PreconditionError("complete: history must be non-empty");
  if (history.front().role != Role::system) {
    throw PreconditionError("complete: first message must have the system role");
  }
  check(params);
  ChatMessage reply = do_complete(history, params);
  reply.role = Role::assistant;
  return reply;
}

std::string structured_instruction(std::span<const OutputVariableSpec> schema) {
  std::string out =
      "Respond with ONLY a JSON object (no prose, no code fences) containing exactly these keys:\n";
  for (const auto& spec : schema) {
    out += "- \"" + spec.name + "\" (" + spec.type + ")";
    if (!spec.description.empty()) out += ": " + spec.description;
    out += "\n";
  }
  out += "Use JSON null for any value the transcript does not determine.";
  return out;
}

std::optional<StructuredReply> parse_structured_reply(std::string_view reply) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    return std::nullopt;
  }
  const auto body = reply.substr(open, close - open + 1);
  nlohmann::json doc = nlohmann::json::parse(body.begin(), body.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;

  StructuredReply out;
  for (const auto& [key, value] : doc.items()) {
    if (value.is_null()) continue;
    if (value.is_string()) {
      out.emplace(key, value.get<std::string>());
    } else if (value.is_boolean()) {
      out.emplace(key, value.get<bool>() ? "true" : "false");
    } else if (value.is_number_integer()) {
      out.emplace(key, value.dump());
    } else if (value.is_number()) {
      out.emplace(key, text::format_number(value.get<double>()));
    } else {
      return std::nullopt;
    }
  }
  return out;
}

StructuredReply ModelBackend::complete_structured(std::span<const ChatMessage> history,
                                                  const CompletionParams& params,
                                                  std::span<const OutputVariableSpec> schema) {
  if (schema.empty()) throw PreconditionError("complete_structured: schema must be non-empty");

  std::vector<ChatMessage> messages(history.begin(), history.end());
  messages.push_back(ChatMessage::user(structured_instruction(schema)));

  ChatMessage reply = complete(messages, params);
  auto parsed = parse_structured_reply(reply.content);
  if (!parsed) {
    messages.push_back(ChatMessage::assistant(reply.content));
    messages.push_back(ChatMessage::user(std::string(kRepairInstruction)));
    reply = complete(messages, params);
    parsed = parse_structured_reply(reply.content);
    if (!parsed) {
      throw MalformedResponseError("structured reply is not a JSON object after one repair retry: " +
                                   reply.content.substr(0, 200));
    }
  }

  StructuredReply out;
  for (const auto& spec : schema) {
    auto it = parsed->find(spec.name);
    if (it == parsed->end()) {
      if (!spec.optional) throw MissingKeyError(spec.name);
      continue;
    }
    out.emplace(it->first, it->second);
  }
  return out;
}

std::size_t ScriptContext::assistant_turns() const {
  std::size_t n = 0;
  for (const auto& m : history) {
    if (m.role == Role::assistant) ++n;
  }
  return n;
}

const ChatMessage* ScriptContext::last_user() const {
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->role == Role::user) return &*it;
  }
  return nullptr;
}

ScriptedBackend::ScriptedBackend(std::vector<Rule> rules, Responder default_response)
    : rules_(std::move(rules)), default_response_(std::move(default_response)) {}

ScriptedBackend& ScriptedBackend::add_rule(Rule rule) {
  rules_.push_back(std::move(rule));
  return *this;
}

ScriptedBackend& ScriptedBackend::when_last_ends_with(std::string suffix, std::string response) {
  Rule rule;
  rule.label = "ends-with:" + suffix;
  rule.matcher = [suffix](const ScriptContext& ctx) {
    return std::string_view(ctx.last().content).ends_with(suffix);
  };
  rule.response = [response = std::move(response)](const ScriptContext&) { return response; };
  return add_rule(std::move(rule));
}

ScriptedBackend& ScriptedBackend::otherwise(Responder response) {
  default_response_ = std::move(response);
  return *this;
}

ChatMessage ScriptedBackend::do_complete(std::span<const ChatMessage> history, const CompletionParams& params) {
  const ScriptContext ctx{history, params};
  for (const auto& rule : rules_) {
    if (rule.matcher(ctx)) return ChatMessage::assistant(rule.response(ctx));
  }
  if (!default_response_) throw BackendError("scripted backend: no rule matched the conversation");
  return ChatMessage::assistant(default_response_(ctx));
}

}  // namespace ngym
