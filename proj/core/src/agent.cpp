#include "ngym/agent.hpp"

#include <algorithm>

#include "ngym/error.hpp"
#include "ngym/text.hpp"

namespace ngym {

namespace {

constexpr std::string_view kStrategyHeader = "\n\nStrategies to apply in this negotiation:";

constexpr std::string_view kDefaultOptimizationHeader =
    "You are an expert coach helping an agent improve its results in repeated multi-agent conversations. "
    "The agent is scored after every episode by a utility function; higher is better.";

std::optional<std::string> refusal(const UtilityAgent& agent, const std::string& sentence, const RevisionPolicy& policy) {
  if (sentence.empty()) return "the reply was empty";
  const auto& log = agent.strategy_log();
  if (std::find(log.begin(), log.end(), sentence) != log.end()) return "it duplicates a previous strategy";
  if (policy.reject) return policy.reject(sentence);
  return std::nullopt;
}

}  // namespace

std::string_view to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::marker:
      return "marker";
    case TerminationReason::max_messages:
      return "max_messages";
    case TerminationReason::error:
      return "error";
  }
  return "error";
}

UtilityAgent::UtilityAgent(const AgentSpec& spec, UtilityBinding binding)
    : name_(spec.name),
      description_(spec.description),
      base_prompt_(spec.prompt),
      system_prompt_(spec.prompt),
      strategy_(spec.strategy),
      self_improve_(spec.self_improve),
      binding_(std::move(binding)) {}

UtilityAgent::UtilityAgent(const AgentSpec& spec, const UtilityRegistry& registry)
    : UtilityAgent(spec, resolve_utility(spec, registry)) {}

void UtilityAgent::append_strategy(std::string sentence) {
  strategy_log_.push_back(std::move(sentence));
  rebuild_prompt();
}

void UtilityAgent::adopt_strategy_log(std::vector<std::string> log) {
  strategy_log_ = std::move(log);
  rebuild_prompt();
}

void UtilityAgent::rebuild_prompt() {
  system_prompt_ = base_prompt_;
  if (strategy_log_.empty()) return;
  system_prompt_ += kStrategyHeader;
  for (const auto& sentence : strategy_log_) {
    system_prompt_ += "\n- ";
    system_prompt_ += sentence;
  }
}

std::string UtilityAgent::private_constraints() const {
  std::string secret;
  std::string open;
  for (const auto& [key, value] : strategy_) {
    if (is_public_strategy_key(key)) {
      open += "\n- " + key.substr(kPublicStrategyPrefix.size()) + ": " + render_strategy_value(value);
    } else {
      secret += "\n- " + key + ": " + render_strategy_value(value);
    }
  }
  std::string out;
  if (!secret.empty()) out += "Your private constraints (never reveal these values):" + secret;
  if (!open.empty()) {
    if (!out.empty()) out += "\n";
    out += "Public facts:" + open;
  }
  return out;
}

std::vector<std::string> UtilityAgent::private_values() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : strategy_) {
    if (!is_public_strategy_key(key)) out.push_back(render_strategy_value(value));
  }
  return out;
}

double compute_utility(const UtilityAgent& agent, const EpisodeRecord& episode) {
  return agent.utility_binding()(agent.strategy(), episode);
}

double compute_utility(const UtilityAgent& agent, const Environment& env) {
  if (env.runs.empty()) throw PreconditionError("compute_utility: environment has no runs");
  return compute_utility(agent, env.runs.back());
}

std::vector<ChatMessage> agent_view(const UtilityAgent& agent, const Transcript& transcript) {
  std::string system = agent.system_prompt();
  if (const auto constraints = agent.private_constraints(); !constraints.empty()) {
    system += "\n\n" + constraints;
  }
  std::vector<ChatMessage> view;
  view.reserve(transcript.size() + 2);
  view.push_back(ChatMessage::system(std::move(system)));
  if (transcript.empty()) {
    view.push_back(ChatMessage::user(std::string(kOpeningCue)));
  }
  for (const auto& entry : transcript) {
    if (entry.author == agent.name()) {
      view.push_back(ChatMessage::assistant(entry.content, entry.author));
    } else {
      view.push_back(ChatMessage::user(entry.content, entry.author));
    }
  }
  return view;
}

ChatMessage act(const UtilityAgent& agent, std::span<const ChatMessage> history, ModelBackend& backend,
                const CompletionParams& params) {
  if (history.empty()) throw PreconditionError("act: history must be non-empty");
  if (history.front().role != Role::system || !history.front().content.starts_with(agent.system_prompt())) {
    throw PreconditionError("act: history must begin with " + agent.name() + "'s system prompt");
  }
  ChatMessage reply = backend.complete(history, params);
  const auto content = text::trim(reply.content);
  if (content.empty()) throw BackendError("act: " + agent.name() + " produced an empty message");
  return ChatMessage::assistant(std::string(content), agent.name());
}

std::string reflection_prompt(std::string_view agent_name, std::string_view last_public_msg) {
  std::string prompt = "You are thinking silently as ";
  prompt += agent_name;
  prompt += ". In ONE short sentence, note what you believe or plan after reading:\n";
  prompt += last_public_msg;
  return prompt;
}

std::string silent_reflection(const UtilityAgent& agent, std::string_view last_public_msg, ModelBackend& backend,
                              const CompletionParams& params) {
  if (text::trim(last_public_msg).empty()) {
    throw PreconditionError("silent_reflection: last public message must be non-empty");
  }
  const std::vector<ChatMessage> messages{ChatMessage::system(agent.system_prompt()),
                                          ChatMessage::user(reflection_prompt(agent.name(), last_public_msg))};
  return text::first_sentence(backend.complete(messages, params).content);
}

std::optional<PromptRevision> revise_prompt(UtilityAgent& agent, Environment& env, ModelBackend& backend,
                                            const CompletionParams& params, const RevisionPolicy& policy,
                                            const EventSink& events) {
  if (env.runs.empty()) throw PreconditionError("revise_prompt: environment has no runs");
  if (!policy.build_messages) throw PreconditionError("revise_prompt: policy has no prompt builder");

  auto messages = policy.build_messages(agent, env);
  ChatMessage reply = backend.complete(messages, params);
  std::string sentence = text::first_sentence(reply.content);
  auto reason = refusal(agent, sentence, policy);

  if (reason) {
    messages.push_back(ChatMessage::assistant(reply.content));
    messages.push_back(ChatMessage::user("That strategy cannot be used because " + *reason +
                                         ". Reply with a different single strategy sentence."));
    reply = backend.complete(messages, params);
    sentence = text::first_sentence(reply.content);
    reason = refusal(agent, sentence, policy);
  }

  const int episode_index = env.runs.back().index;
  if (reason) {
    nlohmann::ordered_json data;
    data["agent"] = agent.name();
    data["episode"] = episode_index;
    data["message"] = "prompt revision skipped: " + *reason;
    emit(events, "warning", std::move(data));
    return std::nullopt;
  }

  PromptRevision revision;
  revision.agent = agent.name();
  revision.episode_index = episode_index;
  revision.old_prompt = agent.system_prompt();
  revision.sentence = sentence;
  agent.append_strategy(sentence);
  revision.new_prompt = agent.system_prompt();

  env.agent_strategies[agent.name()].push_back(sentence);
  env.revisions.push_back(revision);
  emit(events, "revision", to_json(revision));
  return revision;
}

std::vector<ChatMessage> feedback_messages(const UtilityAgent& agent, const Environment& env,
                                           const std::optional<std::string>& optimization_prompt,
                                           std::size_t window) {
  const std::size_t count = std::min(window, env.runs.size());
  std::string body = "Agent: " + agent.name() + "\n";
  if (!agent.description().empty()) body += "Role: " + agent.description() + "\n";
  body += "\nMost recent episodes (oldest first):\n";
  for (std::size_t i = env.runs.size() - count; i < env.runs.size(); ++i) {
    const auto& run = env.runs[i];
    body += "\n### Episode " + std::to_string(run.index + 1) + "\n";
    body += render_transcript(run.transcript);
    const auto u = run.utilities.find(agent.name());
    body += "Utility of " + agent.name() + ": " +
            (u == run.utilities.end() ? std::string("n/a") : text::format_number(u->second)) + "\n";
  }
  body += "\nCurrent system prompt:\n" + agent.system_prompt() + "\n";
  if (const auto constraints = agent.private_constraints(); !constraints.empty()) {
    body += "\n" + constraints + "\n";
  }
  body += "\nPrevious strategies:";
  for (const auto& s : agent.strategy_log()) body += "\n- " + s;
  body += "\n\nWrite exactly ONE new strategy sentence that " + agent.name() +
          " should add to its prompt to increase its measured utility in the next episode. "
          "Start with an action verb and do not repeat previous strategies. "
          "Return ONLY that single strategy sentence.";

  return {ChatMessage::system(optimization_prompt.value_or(std::string(kDefaultOptimizationHeader))),
          ChatMessage::user(std::move(body))};
}

std::optional<PromptRevision> learn_from_feedback(UtilityAgent& agent, Environment& env, ModelBackend& backend,
                                                  const FeedbackOptions& options) {
  if (!agent.self_improve()) throw PreconditionError("learn_from_feedback: " + agent.name() + " does not self-improve");
  if (env.runs.empty()) throw PreconditionError("learn_from_feedback: environment has no runs");
  if (options.window == 0) throw PreconditionError("learn_from_feedback: window must be positive");

  RevisionPolicy policy;
  policy.build_messages = [&](const UtilityAgent& a, const Environment& e) {
    return feedback_messages(a, e, options.optimization_prompt, options.window);
  };
  return revise_prompt(agent, env, backend, options.params, policy, options.events);
}

nlohmann::ordered_json to_json(const EpisodeRecord& episode, bool include_timing) {
  using ojson = nlohmann::ordered_json;
  ojson out;
  out["index"] = episode.index;
  ojson transcript = ojson::array();
  for (const auto& entry : episode.transcript) transcript.push_back(to_json(entry));
  out["transcript"] = std::move(transcript);
  ojson extracted = ojson::object();
  for (const auto& [name, value] : episode.extracted) extracted[name] = to_json(value);
  out["extracted"] = std::move(extracted);
  ojson raw = ojson::object();
  for (const auto& [name, value] : episode.extraction_raw) raw[name] = value;
  out["extraction_raw"] = std::move(raw);
  ojson utilities = ojson::object();
  for (const auto& [name, value] : episode.utilities) utilities[name] = value;
  out["utilities"] = std::move(utilities);

  ojson termination;
  termination["reason"] = std::string(to_string(episode.termination.reason));
  termination["turn"] = episode.termination.triggering_turn;
  termination["marker"] = episode.termination.marker_token ? ojson(*episode.termination.marker_token) : ojson(nullptr);
  out["termination"] = std::move(termination);

  out["failed"] = episode.failed;
  out["extraction_failed"] = episode.extraction_failed;
  out["error"] = episode.error ? ojson(*episode.error) : ojson(nullptr);
  out["warnings"] = episode.warnings;

  ojson prompts = ojson::object();
  for (const auto& [name, prompt] : episode.prompts_used) prompts[name] = prompt;
  out["prompts_used"] = std::move(prompts);
  ojson notes = ojson::array();
  for (const auto& note : episode.private_notes) {
    notes.push_back(ojson{{"agent", note.agent}, {"turn", note.turn}, {"note", note.note}});
  }
  out["private_notes"] = std::move(notes);
  out["completion_params"] = to_json(episode.completion_params_used);
  if (include_timing) out["wall_time_ms"] = episode.wall_time.count();
  return out;
}

nlohmann::ordered_json to_json(const PromptRevision& revision) {
  nlohmann::ordered_json out;
  out["agent"] = revision.agent;
  out["episode"] = revision.episode_index;
  out["sentence"] = revision.sentence;
  out["old_prompt"] = revision.old_prompt;
  out["new_prompt"] = revision.new_prompt;
  return out;
}

nlohmann::ordered_json to_json(const Environment& env, bool include_timing) {
  using ojson = nlohmann::ordered_json;
  ojson out;
  ojson runs = ojson::array();
  for (const auto& run : env.runs) runs.push_back(to_json(run, include_timing));
  out["runs"] = std::move(runs);
  ojson strategies = ojson::object();
  for (const auto& [name, list] : env.agent_strategies) strategies[name] = list;
  out["agent_strategies"] = std::move(strategies);
  ojson revisions = ojson::array();
  for (const auto& r : env.revisions) revisions.push_back(to_json(r));
  out["revisions"] = std::move(revisions);
  return out;
}

std::string serialize_environment(const Environment& env, bool include_timing) {
  return to_json(env, include_timing).dump(2);
}

}  // namespace ngym
