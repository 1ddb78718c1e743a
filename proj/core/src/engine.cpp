#include "ngym/engine.hpp"

#include <algorithm>
#include <chrono>

#include "ngym/error.hpp"
#include "ngym/extraction.hpp"
#include "ngym/text.hpp"

namespace ngym {

namespace {

constexpr std::string_view kDefaultSelectorPrompt =
    "You decide which participant speaks next in a conversation. Read the conversation so far and reply with "
    "only the name of the participant who should speak next.";

const UtilityAgent& agent_named(std::span<const UtilityAgent> agents, const std::string& name) {
  for (const auto& agent : agents) {
    if (agent.name() == name) return agent;
  }
  throw PreconditionError("no agent named '" + name + "'");
}

std::optional<std::string> match_name(std::string_view reply, std::span<const std::string> names) {
  auto candidate = text::trim(reply);
  while (!candidate.empty() && std::string_view(".!\"'`*:").find(candidate.back()) != std::string_view::npos) {
    candidate.remove_suffix(1);
  }
  while (!candidate.empty() && std::string_view("\"'`*").find(candidate.front()) != std::string_view::npos) {
    candidate.remove_prefix(1);
  }
  for (const auto& name : names) {
    if (candidate == name) return name;
  }
  const auto lowered = text::to_lower(candidate);
  for (const auto& name : names) {
    if (lowered == text::to_lower(name)) return name;
  }
  return std::nullopt;
}

void warn(EpisodeRecord& record, const EventSink& events, std::string message) {
  nlohmann::ordered_json data;
  data["episode"] = record.index;
  data["message"] = message;
  emit(events, "warning", std::move(data));
  record.warnings.push_back(std::move(message));
}

nlohmann::ordered_json episode_event(const EpisodeRecord& record) {
  nlohmann::ordered_json data;
  data["index"] = record.index;
  data["turns"] = record.transcript.size();
  data["termination"] = std::string(to_string(record.termination.reason));
  data["failed"] = record.failed;
  data["extraction_failed"] = record.extraction_failed;
  nlohmann::ordered_json utilities = nlohmann::ordered_json::object();
  for (const auto& [name, value] : record.utilities) utilities[name] = value;
  data["utilities"] = std::move(utilities);
  return data;
}

}  // namespace

EngineOptions engine_options_from(const ScenarioConfig& config) {
  EngineOptions options;
  options.params.model_id = config.model_id;
  const auto it = config.metadata.find("engine");
  if (it == config.metadata.end()) return options;
  const auto& block = *it;
  if (!block.is_object()) throw ConfigError("engine", "expected object");

  auto get_bool = [&](const char* key, bool& target) {
    if (const auto v = block.find(key); v != block.end()) {
      if (!v->is_boolean()) throw ConfigError(std::string("engine.") + key, "expected boolean");
      target = v->get<bool>();
    }
  };
  get_bool("silent_reflection", options.silent_reflection);
  get_bool("abort_job_on_episode_failure", options.abort_job_on_episode_failure);

  if (const auto v = block.find("selector"); v != block.end()) {
    if (*v == "round_robin") {
      options.selector.kind = SelectorKind::round_robin;
    } else if (*v == "model_based") {
      options.selector.kind = SelectorKind::model_based;
    } else {
      throw ConfigError("engine.selector", "expected \"round_robin\" or \"model_based\"");
    }
  }
  if (const auto v = block.find("selector_order"); v != block.end()) {
    if (!v->is_array()) throw ConfigError("engine.selector_order", "expected array of agent names");
    std::vector<std::string> order;
    for (const auto& name : *v) {
      if (!name.is_string()) throw ConfigError("engine.selector_order", "expected array of agent names");
      order.push_back(name.get<std::string>());
    }
    std::vector<std::string> configured;
    for (const auto& agent : config.agents) configured.push_back(agent.name);
    if (!std::is_permutation(order.begin(), order.end(), configured.begin(), configured.end())) {
      throw ConfigError("engine.selector_order", "must be a permutation of the agent names");
    }
    options.selector.order = std::move(order);
  }
  if (const auto v = block.find("selector_prompt"); v != block.end()) {
    if (!v->is_string()) throw ConfigError("engine.selector_prompt", "expected string");
    options.selector.selector_prompt = v->get<std::string>();
  }
  if (const auto v = block.find("revision_window"); v != block.end()) {
    if (!is_non_negative_integer(*v) || v->get<std::uint64_t>() == 0) {
      throw ConfigError("engine.revision_window", "expected positive integer");
    }
    options.revision_window = v->get<std::size_t>();
  }
  if (const auto v = block.find("temperature"); v != block.end()) {
    if (!v->is_number()) throw ConfigError("engine.temperature", "expected number");
    options.params.temperature = v->get<double>();
    if (options.params.temperature < 0.0 || options.params.temperature > 2.0) {
      throw ConfigError("engine.temperature", "must lie in [0, 2]");
    }
  }
  return options;
}

std::vector<UtilityAgent> make_agents(const ScenarioConfig& config, const UtilityRegistry& registry) {
  std::vector<UtilityAgent> agents;
  agents.reserve(config.agents.size());
  for (const auto& spec : config.agents) agents.emplace_back(spec, registry);
  return agents;
}

std::string select_next(const SelectorPolicy& policy, const Transcript& transcript,
                        std::span<const std::string> agent_names) {
  if (agent_names.empty()) throw PreconditionError("select_next: no agents");
  const std::span<const std::string> order =
      policy.order.empty() ? agent_names : std::span<const std::string>(policy.order);
  return order[transcript.size() % order.size()];
}

std::string select_next(const SelectorPolicy& policy, const Transcript& transcript,
                        std::span<const std::string> agent_names, ModelBackend& backend,
                        const CompletionParams& params, const EventSink& events) {
  if (agent_names.empty()) throw PreconditionError("select_next: no agents");
  if (policy.kind == SelectorKind::round_robin) return select_next(policy, transcript, agent_names);

  std::string system(policy.selector_prompt.value_or(std::string(kDefaultSelectorPrompt)));
  system += "\nParticipants: " + text::join(std::vector<std::string>(agent_names.begin(), agent_names.end()), ", ");
  std::vector<ChatMessage> messages{
      ChatMessage::system(std::move(system)),
      ChatMessage::user(transcript.empty() ? std::string("(no messages yet)") : render_transcript(transcript))};

  auto reply = backend.complete(messages, params);
  if (auto name = match_name(reply.content, agent_names)) return *name;

  messages.push_back(ChatMessage::assistant(reply.content));
  messages.push_back(ChatMessage::user("That is not a participant. Reply with exactly one of: " +
                                       text::join(std::vector<std::string>(agent_names.begin(), agent_names.end()), ", ")));
  reply = backend.complete(messages, params);
  if (auto name = match_name(reply.content, agent_names)) return *name;

  nlohmann::ordered_json data;
  data["message"] = "selector named an unknown agent twice; falling back to round-robin";
  data["reply"] = reply.content;
  emit(events, "warning", std::move(data));
  return select_next(policy, transcript, agent_names);
}

std::optional<TerminationOutcome> check_termination(const ScenarioConfig& config, const Transcript& transcript) {
  if (transcript.empty()) return std::nullopt;
  const auto& last = transcript.back();
  if (!config.termination_condition.empty() && last.content.find(config.termination_condition) != std::string::npos) {
    return TerminationOutcome{TerminationReason::marker, last.turn, config.termination_condition};
  }
  if (static_cast<long long>(transcript.size()) >= config.max_messages) {
    return TerminationOutcome{TerminationReason::max_messages, last.turn, std::nullopt};
  }
  return std::nullopt;
}

std::uint64_t episode_seed(std::uint64_t base_seed, int index) {
  return base_seed + static_cast<std::uint64_t>(index);
}

EpisodeRecord run_episode(const ScenarioConfig& config, std::span<const UtilityAgent> agents, ModelBackend& backend,
                          std::uint64_t seed, const EngineOptions& options, int index, const EventSink& events) {
  if (agents.empty()) throw PreconditionError("run_episode: no agents");
  if (config.max_messages < 1) throw PreconditionError("run_episode: max_messages must be positive");

  std::vector<std::string> names;
  for (const auto& agent : agents) names.push_back(agent.name());

  EpisodeRecord record;
  record.index = index;
  record.completion_params_used = options.params;
  if (record.completion_params_used.model_id.empty()) record.completion_params_used.model_id = config.model_id;
  record.completion_params_used.seed = seed;
  const CompletionParams& params = record.completion_params_used;
  for (const auto& agent : agents) record.prompts_used.emplace(agent.name(), agent.system_prompt());

  const auto started = std::chrono::steady_clock::now();
  try {
    while (true) {
      const auto speaker_name = select_next(options.selector, record.transcript, names, backend, params, events);
      const auto& speaker = agent_named(agents, speaker_name);
      const auto view = agent_view(speaker, record.transcript);
      const auto message = act(speaker, view, backend, params);
      const int turn = static_cast<int>(record.transcript.size()) + 1;
      record.transcript.push_back(TranscriptEntry{turn, speaker.name(), message.content});

      if (options.silent_reflection) {
        for (const auto& listener : agents) {
          if (listener.name() == speaker.name()) continue;
          try {
            record.private_notes.push_back(
                PrivateNote{listener.name(), turn, silent_reflection(listener, message.content, backend, params)});
          } catch (const BackendError& e) {
            warn(record, events, "silent reflection skipped for " + listener.name() + ": " + e.what());
          }
        }
      }

      if (auto outcome = check_termination(config, record.transcript)) {
        record.termination = *outcome;
        break;
      }
    }
  } catch (const BackendError& e) {
    record.failed = true;
    record.error = e.what();
    record.termination = TerminationOutcome{TerminationReason::error,
                                            static_cast<int>(record.transcript.size()), std::nullopt};
  }

  if (!record.failed && !config.output_variables.empty() && !record.transcript.empty()) {
    try {
      auto extraction = extract_variables(record.transcript, config.output_variables, backend, params);
      record.extracted = std::move(extraction.values);
      record.extraction_raw = std::move(extraction.raw);
    } catch (const ExtractionError& e) {
      record.extraction_failed = true;
      warn(record, events, e.what());
    }
  }

  for (const auto& agent : agents) {
    double utility = 0.0;
    if (!record.failed && !record.extraction_failed) {
      try {
        utility = compute_utility(agent, record);
      } catch (const UtilityError& e) {
        warn(record, events, "utility of " + agent.name() + " set to 0: " + e.what());
      }
    }
    record.utilities[agent.name()] = utility;
  }

  record.wall_time =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
  return record;
}

FeedbackHook default_feedback(const ScenarioConfig& config, const EngineOptions& options, EventSink events) {
  FeedbackOptions feedback;
  feedback.optimization_prompt = config.optimization_prompt;
  feedback.window = options.revision_window;
  feedback.params = options.params;
  if (feedback.params.model_id.empty()) feedback.params.model_id = config.model_id;
  feedback.events = std::move(events);
  return [feedback](UtilityAgent& agent, Environment& env, ModelBackend& backend) {
    return learn_from_feedback(agent, env, backend, feedback);
  };
}

Environment run_simulation(const ScenarioConfig& config, std::vector<UtilityAgent>& agents, ModelBackend& backend,
                           const EngineOptions& options, const EventSink& events, FeedbackHook feedback) {
  if (auto violations = validate(config); !violations.empty()) throw ValidationError(std::move(violations));
  if (!feedback) feedback = default_feedback(config, options, events);

  const std::uint64_t base_seed = config.rng_seed.value_or(0);
  Environment env;
  for (int i = 0; i < config.num_runs; ++i) {
    env.runs.push_back(run_episode(config, agents, backend, episode_seed(base_seed, i), options, i, events));
    const auto& record = env.runs.back();
    emit(events, "episode", episode_event(record));
    if (record.failed && options.abort_job_on_episode_failure) {
      throw BackendError("episode " + std::to_string(i) + " failed: " + record.error.value_or("unknown error"));
    }

    for (auto& agent : agents) {
      if (!agent.self_improve()) continue;
      try {
        feedback(agent, env, backend);
      } catch (const BackendError& e) {
        nlohmann::ordered_json data;
        data["agent"] = agent.name();
        data["episode"] = i;
        data["message"] = std::string("prompt revision failed: ") + e.what();
        emit(events, "warning", std::move(data));
      }
    }
  }
  return env;
}

}  // namespace ngym
