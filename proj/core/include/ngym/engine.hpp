#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ngym/agent.hpp"
#include "ngym/config.hpp"
#include "ngym/events.hpp"
#include "ngym/model_backend.hpp"
#include "ngym/transcript.hpp"

namespace ngym {

enum class SelectorKind { round_robin, model_based };

struct SelectorPolicy {
  SelectorKind kind = SelectorKind::round_robin;
  /// Round-robin order; empty means configuration order.
  std::vector<std::string> order;
  std::optional<std::string> selector_prompt;
};

struct EngineOptions {
  SelectorPolicy selector;
  bool silent_reflection = false;
  bool abort_job_on_episode_failure = false;
  std::size_t revision_window = kDefaultRevisionWindow;
  CompletionParams params;
};

/// Reads the optional "engine" block of a config (selector, silent_reflection,
/// abort_job_on_episode_failure, revision_window, temperature). Throws
/// ConfigError on malformed values.
EngineOptions engine_options_from(const ScenarioConfig& config);

std::vector<UtilityAgent> make_agents(const ScenarioConfig& config,
                                      const UtilityRegistry& registry = UtilityRegistry::defaults());

/// Round-robin choice: the agent at position len(transcript) mod n.
std::string select_next(const SelectorPolicy& policy, const Transcript& transcript,
                        std::span<const std::string> agent_names);

/// Full selector. A model-based reply naming an unknown agent is re-asked
/// once, then round-robin is used with a warning event.
std::string select_next(const SelectorPolicy& policy, const Transcript& transcript,
                        std::span<const std::string> agent_names, ModelBackend& backend,
                        const CompletionParams& params, const EventSink& events = {});

/// Marker (case-sensitive substring of the latest message) wins over the
/// message cap.
std::optional<TerminationOutcome> check_termination(const ScenarioConfig& config, const Transcript& transcript);

/// Plays one episode to termination, then extracts the output variables and
/// scores every agent.
EpisodeRecord run_episode(const ScenarioConfig& config, std::span<const UtilityAgent> agents, ModelBackend& backend,
                          std::uint64_t seed, const EngineOptions& options = {}, int index = 0,
                          const EventSink& events = {});

/// Revises one self-improving agent between episodes.
using FeedbackHook = std::function<std::optional<PromptRevision>(UtilityAgent&, Environment&, ModelBackend&)>;

/// learn_from_feedback with the config's optimization prompt and the
/// engine's revision window.
FeedbackHook default_feedback(const ScenarioConfig& config, const EngineOptions& options, EventSink events = {});

/// Runs config.num_runs episodes. After each one the record is appended to
/// the environment and every self-improving agent revises its prompt before
/// the next episode starts.
Environment run_simulation(const ScenarioConfig& config, std::vector<UtilityAgent>& agents, ModelBackend& backend,
                           const EngineOptions& options = {}, const EventSink& events = {},
                           FeedbackHook feedback = {});

/// Seed used for episode `index` given the base seed.
std::uint64_t episode_seed(std::uint64_t base_seed, int index);

}  // namespace ngym
