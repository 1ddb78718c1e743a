#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ngym/error.hpp"

namespace ngym {

/// A private strategy parameter: a finite number or a non-empty string.
using StrategyValue = std::variant<double, std::string>;
using Strategy = std::map<std::string, StrategyValue, std::less<>>;

std::optional<double> strategy_number(const Strategy& strategy, std::string_view key);
std::string render_strategy_value(const StrategyValue& value);

/// Strategy keys starting with this prefix carry public scenario facts (for
/// example the seller's advertised asking price). They feed utilities but are
/// exempt from the privacy boundary.
inline constexpr std::string_view kPublicStrategyPrefix = "public_";
bool is_public_strategy_key(std::string_view key);

enum class VariableKind { Number, Boolean, String };

std::optional<VariableKind> variable_kind_from(std::string_view name);
std::string_view to_string(VariableKind kind);

struct OutputVariableSpec {
  std::string name;
  /// Kept as written so that unknown type names surface as violations.
  std::string type;
  std::string description;
  bool optional = false;

  std::optional<VariableKind> kind() const { return variable_kind_from(type); }

  bool operator==(const OutputVariableSpec&) const = default;
};

struct AgentSpec {
  std::string name;
  std::string description;
  std::string prompt;
  std::optional<std::string> utility_class;
  Strategy strategy;
  bool self_improve = false;
  std::optional<bool> optimization_target;
  nlohmann::json extras = nlohmann::json::object();

  bool operator==(const AgentSpec&) const = default;
};

/// Free-form metadata. The engine never interprets it.
struct SimulationContext {
  std::string type;
  std::string domain;
  std::vector<std::string> objectives;
  std::vector<std::string> constraints;
  std::vector<std::string> tags;
  nlohmann::json extras = nlohmann::json::object();

  bool operator==(const SimulationContext&) const = default;
};

inline constexpr int kDefaultMaxMessages = 20;

struct ScenarioConfig {
  std::string model_id;
  std::string name;
  std::vector<AgentSpec> agents;
  std::string termination_condition;
  std::vector<OutputVariableSpec> output_variables;
  int num_runs = 1;
  std::optional<std::string> optimization_prompt;
  SimulationContext simulation_context;
  int max_messages = kDefaultMaxMessages;
  std::optional<std::uint64_t> rng_seed;
  /// Unknown top-level keys (e.g. "engine", "experiment"), passed through.
  nlohmann::json metadata = nlohmann::json::object();
  /// Unknown keys inside the "config" object, passed through.
  nlohmann::json config_extras = nlohmann::json::object();

  const AgentSpec* find_agent(std::string_view agent_name) const;

  bool operator==(const ScenarioConfig&) const = default;
};

class UtilityRegistry;

/// Parses the canonical JSON config layout and checks every invariant.
/// Throws ConfigError for syntax/shape problems and ValidationError when the
/// document is well-formed but invalid.
ScenarioConfig parse_config(std::string_view text);
ScenarioConfig parse_config(std::string_view text, const UtilityRegistry& registry);

/// Shape-only parse; invariants are left to validate().
ScenarioConfig parse_config_unchecked(std::string_view text);
ScenarioConfig config_from_json(const nlohmann::json& document);

std::vector<Violation> validate(const ScenarioConfig& config);
std::vector<Violation> validate(const ScenarioConfig& config, const UtilityRegistry& registry);

nlohmann::ordered_json to_json(const ScenarioConfig& config);
std::string serialize_config(const ScenarioConfig& config);

bool is_identifier(std::string_view text);
/// Integer >= 0, whether it was parsed from text or built in code.
bool is_non_negative_integer(const nlohmann::json& value);

}  // namespace ngym
