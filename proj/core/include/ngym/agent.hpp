#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ngym/config.hpp"
#include "ngym/events.hpp"
#include "ngym/extraction.hpp"
#include "ngym/model_backend.hpp"
#include "ngym/transcript.hpp"
#include "ngym/utility.hpp"

namespace ngym {

enum class TerminationReason { marker, max_messages, error };

std::string_view to_string(TerminationReason reason);

struct TerminationOutcome {
  TerminationReason reason = TerminationReason::max_messages;
  int triggering_turn = 0;
  std::optional<std::string> marker_token;

  bool operator==(const TerminationOutcome&) const = default;
};

/// A silent-reflection note. Never part of the public transcript.
struct PrivateNote {
  std::string agent;
  int turn = 0;
  std::string note;

  bool operator==(const PrivateNote&) const = default;
};

/// One finished run.
struct EpisodeRecord {
  int index = 0;
  Transcript transcript;
  ExtractedValues extracted;
  std::map<std::string, std::string, std::less<>> extraction_raw;
  std::map<std::string, double, std::less<>> utilities;
  TerminationOutcome termination;
  std::chrono::milliseconds wall_time{0};
  CompletionParams completion_params_used;
  /// System prompt each agent acted with during this episode.
  std::map<std::string, std::string, std::less<>> prompts_used;
  std::vector<PrivateNote> private_notes;
  /// Backend failure mid-episode; the partial transcript is kept and the
  /// episode is excluded from utility aggregation.
  bool failed = false;
  /// Extraction failed; every utility is zero.
  bool extraction_failed = false;
  std::optional<std::string> error;
  std::vector<std::string> warnings;

  bool operator==(const EpisodeRecord&) const = default;
};

struct PromptRevision {
  std::string agent;
  int episode_index = 0;
  std::string old_prompt;
  std::string new_prompt;
  std::string sentence;

  bool operator==(const PromptRevision&) const = default;
};

/// Cross-episode record threaded to agents. Runs are append-only and
/// chronological.
struct Environment {
  std::vector<EpisodeRecord> runs;
  std::map<std::string, std::vector<std::string>, std::less<>> agent_strategies;
  std::vector<PromptRevision> revisions;

  bool operator==(const Environment&) const = default;
};

/// A configured participant. The system prompt is always the base prompt
/// followed by the strategy sentences appended so far.
class UtilityAgent {
 public:
  UtilityAgent(const AgentSpec& spec, UtilityBinding binding);
  /// Resolves the utility binding through `registry`.
  UtilityAgent(const AgentSpec& spec, const UtilityRegistry& registry);

  const std::string& name() const noexcept { return name_; }
  const std::string& description() const noexcept { return description_; }
  const std::string& base_prompt() const noexcept { return base_prompt_; }
  const std::string& system_prompt() const noexcept { return system_prompt_; }
  const Strategy& strategy() const noexcept { return strategy_; }
  bool self_improve() const noexcept { return self_improve_; }
  void set_self_improve(bool value) noexcept { self_improve_ = value; }
  const UtilityBinding& utility_binding() const noexcept { return binding_; }
  const std::vector<std::string>& strategy_log() const noexcept { return strategy_log_; }

  void append_strategy(std::string sentence);
  /// Replaces the strategy log wholesale (used when an agent is rebuilt for a
  /// new negotiation but keeps its coaching history).
  void adopt_strategy_log(std::vector<std::string> log);

  /// Private constraints block shown only to this agent and to its coach.
  std::string private_constraints() const;
  /// Non-public strategy values as they would be rendered in text.
  std::vector<std::string> private_values() const;

 private:
  void rebuild_prompt();

  std::string name_;
  std::string description_;
  std::string base_prompt_;
  std::string system_prompt_;
  Strategy strategy_;
  bool self_improve_ = false;
  UtilityBinding binding_;
  std::vector<std::string> strategy_log_;
};

/// Utility of `agent` for the latest run in `env`.
double compute_utility(const UtilityAgent& agent, const Environment& env);
double compute_utility(const UtilityAgent& agent, const EpisodeRecord& episode);

/// Cue shown to the first speaker when the transcript is still empty.
inline constexpr std::string_view kOpeningCue = "The conversation starts now. You speak first.";

/// The conversation as `agent` sees it: its system prompt plus private
/// constraints, its own messages as assistant turns and everyone else's as
/// named user turns.
std::vector<ChatMessage> agent_view(const UtilityAgent& agent, const Transcript& transcript);

/// One public message from `agent`. The history must start with the agent's
/// system prompt.
ChatMessage act(const UtilityAgent& agent, std::span<const ChatMessage> history, ModelBackend& backend,
                const CompletionParams& params);

/// One private sentence noting what the agent believes or plans after
/// reading `last_public_msg`.
std::string silent_reflection(const UtilityAgent& agent, std::string_view last_public_msg, ModelBackend& backend,
                              const CompletionParams& params);
std::string reflection_prompt(std::string_view agent_name, std::string_view last_public_msg);

/// How a revision prompt is built and which sentences are refused.
struct RevisionPolicy {
  std::function<std::vector<ChatMessage>(const UtilityAgent&, const Environment&)> build_messages;
  /// Returns a reason when the candidate sentence must be refused.
  std::function<std::optional<std::string>(std::string_view)> reject;
};

/// Asks the backend for one new strategy sentence and appends it. Refused
/// sentences (empty, duplicate, or rejected by the policy) get one re-ask;
/// after that the revision is skipped with a warning event. Backend errors
/// propagate and leave the agent untouched.
std::optional<PromptRevision> revise_prompt(UtilityAgent& agent, Environment& env, ModelBackend& backend,
                                            const CompletionParams& params, const RevisionPolicy& policy,
                                            const EventSink& events = {});

inline constexpr std::size_t kDefaultRevisionWindow = 10;

struct FeedbackOptions {
  std::optional<std::string> optimization_prompt;
  std::size_t window = kDefaultRevisionWindow;
  CompletionParams params;
  EventSink events;
};

/// Default optimizer: reflection over the last `window` episodes.
std::vector<ChatMessage> feedback_messages(const UtilityAgent& agent, const Environment& env,
                                           const std::optional<std::string>& optimization_prompt,
                                           std::size_t window);

std::optional<PromptRevision> learn_from_feedback(UtilityAgent& agent, Environment& env, ModelBackend& backend,
                                                  const FeedbackOptions& options);

nlohmann::ordered_json to_json(const EpisodeRecord& episode, bool include_timing = false);
nlohmann::ordered_json to_json(const PromptRevision& revision);
nlohmann::ordered_json to_json(const Environment& env, bool include_timing = false);
std::string serialize_environment(const Environment& env, bool include_timing = false);

}  // namespace ngym
