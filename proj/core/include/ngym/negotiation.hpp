#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ngym/agent.hpp"
#include "ngym/config.hpp"
#include "ngym/events.hpp"
#include "ngym/metrics.hpp"
#include "ngym/model_backend.hpp"

namespace ngym {

// ---------------------------------------------------------------------------
// Instances and scoring

/// One laptop sale. `ask` is public; `floor` is private to the seller and
/// `budget` private to the buyer. Prices are whole USD.
struct NegotiationInstance {
  double ask = 0.0;
  double floor = 0.0;
  double budget = 0.0;
  std::uint64_t seed = 0;

  /// 900 <= ask <= 1400, ask-300 <= floor <= ask-100, floor+50 <= budget <= ask-50.
  bool within_bounds() const;

  bool operator==(const NegotiationInstance&) const = default;
};

using NegotiationRng = std::mt19937_64;

NegotiationInstance sample_instance(NegotiationRng& rng);
/// Seeds a fresh generator and records the seed on the instance.
NegotiationInstance sample_instance(std::uint64_t seed);

struct DealOutcome {
  bool deal_reached = false;
  std::optional<double> price;
  int turns_used = 0;
  NegotiationInstance instance;
  /// The engine could not finish the episode (backend failure).
  bool failed = false;

  /// floor <= price <= budget. Model agents can violate this; it is flagged,
  /// never rejected.
  bool rational() const;

  bool operator==(const DealOutcome&) const = default;
};

double buyer_utility_at(double budget, double price);
double seller_utility_at(double floor, double ask, double price);

/// (budget - p) / budget on a deal, 0 otherwise.
double buyer_utility(const NegotiationInstance& instance, const DealOutcome& outcome);
/// (p - floor) / (ask - floor) on a deal, 0 otherwise.
double seller_utility(const NegotiationInstance& instance, const DealOutcome& outcome);

struct SurplusShares {
  double buyer = 0.0;
  double seller = 0.0;

  bool operator==(const SurplusShares&) const = default;
};

/// Split of the ask-floor surplus. On a deal the shares sum to 1; a no-deal
/// leaves (0, 0).
SurplusShares surplus_shares(const NegotiationInstance& instance, const DealOutcome& outcome);

enum class UtilityTag { loss, poor, fair, great };

/// u <= 0 loss, (0, 0.3) poor, [0.3, 0.7) fair, >= 0.7 great.
UtilityTag utility_tag(double utility);
std::string_view to_string(UtilityTag tag);

// ---------------------------------------------------------------------------
// Reflect modes

enum class ReflectMode : std::uint8_t { no_reflect, buyer_reflect, seller_reflect, both_reflect };

inline constexpr std::array<ReflectMode, 4> kAllReflectModes{ReflectMode::no_reflect, ReflectMode::buyer_reflect,
                                                             ReflectMode::seller_reflect, ReflectMode::both_reflect};

std::string_view to_string(ReflectMode mode);
std::optional<ReflectMode> reflect_mode_from(std::string_view name);
bool coaches_buyer(ReflectMode mode);
bool coaches_seller(ReflectMode mode);

// ---------------------------------------------------------------------------
// Case-study scenario

inline constexpr std::string_view kBuyerName = "Buyer";
inline constexpr std::string_view kSellerName = "Seller";
inline constexpr std::string_view kDealPhrase = "Yes, deal!";
inline constexpr std::string_view kStopMarker = "STOP_NEGOTIATION";

std::string buyer_prompt(const NegotiationInstance& instance);
std::string seller_prompt(const NegotiationInstance& instance);

/// Two-agent config for one instance: the buyer holds {budget}, the seller
/// {floor, public_ask}; extraction reports deal_reached and final_price.
/// Agents are never told `max_turns`.
ScenarioConfig negotiation_scenario(const NegotiationInstance& instance, const std::string& model_id, int max_turns);

/// Reads deal_reached / final_price off a finished episode. The price is
/// rounded to whole USD.
DealOutcome deal_outcome(const NegotiationInstance& instance, const EpisodeRecord& episode);

// ---------------------------------------------------------------------------
// Negotiation coach

struct CoachOptions {
  /// Replaces the built-in coach prompt.
  std::optional<std::string> prompt_override;
  CompletionParams params;
  EventSink events;
};

/// The coach's instructions for `agent`, rendered with its prior strategies,
/// private constraints, and its utility and tag for the latest episode.
std::string render_coach_prompt(const UtilityAgent& agent, const Environment& env, double utility);

/// [system: coach prompt, user: latest transcript].
std::vector<ChatMessage> coach_messages(const UtilityAgent& agent, const Environment& env, const CoachOptions& options);

/// Reason to refuse a strategy sentence that names a price: any number with
/// three or more digits, or a digit next to a currency marker.
std::optional<std::string> price_mention(std::string_view sentence);

/// Asks the coach for one new strategy for `agent` based on the latest
/// episode in `env` and appends it to the agent's prompt.
std::optional<PromptRevision> coach_strategy(UtilityAgent& agent, Environment& env, ModelBackend& backend,
                                             const CoachOptions& options);

// ---------------------------------------------------------------------------
// Experiment harness

struct ExperimentSettings {
  ReflectMode mode = ReflectMode::no_reflect;
  int n = 20;
  int max_turns = 20;
  std::uint64_t seed = 0;
  std::string model_id = "gpt-4o";
  CompletionParams params;
  std::optional<std::string> coach_prompt;
};

struct ExperimentResult {
  ReflectMode mode = ReflectMode::no_reflect;
  int max_turns = 0;
  std::uint64_t seed = 0;
  std::vector<DealOutcome> outcomes;
  std::vector<double> buyer_utils;
  std::vector<double> seller_utils;
  std::vector<SurplusShares> shares;
  int no_deal_count = 0;
  MetricsBundle aggregates;
  /// Transcripts, strategies and prompt revisions of the whole run.
  Environment environment;
};

/// Seed of negotiation `index` within an experiment seeded with `seed`.
std::uint64_t instance_seed(std::uint64_t seed, int index);

ExperimentResult run_experiment(const ExperimentSettings& settings, ModelBackend& backend,
                                const EventSink& events = {});

nlohmann::ordered_json to_json(const ExperimentResult& result);
/// Columns: idx, ask, floor, budget, deal, price, turns, u_buyer, u_seller,
/// buyer_ss, seller_ss.
std::string experiment_csv(const ExperimentResult& result);

/// Optional "experiment" block of a config: {mode, n, max_turns, seed, policy}.
struct ExperimentBlock {
  std::vector<ReflectMode> modes;
  int n = 20;
  int max_turns = 20;
  std::uint64_t seed = 0;
  std::string policy = "standard";
};

/// Throws ConfigError when the block is malformed.
std::optional<ExperimentBlock> experiment_block_from(const ScenarioConfig& config);

}  // namespace ngym
