#include "ngym/config.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "ngym/text.hpp"
#include "ngym/utility.hpp"

namespace ngym {

using nlohmann::json;

namespace {

std::string describe(const std::vector<Violation>& violations) {
  std::string out = "configuration is invalid:";
  for (const auto& v : violations) {
    out += "\n  " + v.path + ": " + v.message;
  }
  return out;
}

std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

std::string type_name(const json& value) {
  if (value.is_number()) return "number";
  return value.type_name();
}

[[noreturn]] void wrong_type(const std::string& path, std::string_view expected, const json& value) {
  throw ConfigError(path, "expected " + std::string(expected) + ", found " + type_name(value));
}

const json* find(const json& object, const char* key) {
  const auto it = object.find(key);
  return it == object.end() ? nullptr : &*it;
}

const json& require(const json& object, const char* key, const std::string& parent,
                    const std::string& hint = {}) {
  const json* value = find(object, key);
  if (value == nullptr) {
    throw ConfigError(join_path(parent, key), "missing required field" + hint);
  }
  return *value;
}

std::string as_string(const json& value, const std::string& path) {
  if (!value.is_string()) wrong_type(path, "string", value);
  return value.get<std::string>();
}

bool as_bool(const json& value, const std::string& path) {
  if (!value.is_boolean()) wrong_type(path, "boolean", value);
  return value.get<bool>();
}

int as_int(const json& value, const std::string& path) {
  if (!value.is_number_integer()) wrong_type(path, "integer", value);
  const auto n = value.get<std::int64_t>();
  if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max()) {
    throw ConfigError(path, "integer out of range");
  }
  return static_cast<int>(n);
}

std::vector<std::string> as_string_list(const json& value, const std::string& path) {
  if (!value.is_array()) wrong_type(path, "array of strings", value);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    out.push_back(as_string(value[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json unknown_keys(const json& object, std::initializer_list<std::string_view> known) {
  json extras = json::object();
  for (const auto& [key, value] : object.items()) {
    bool is_known = false;
    for (auto k : known) {
      if (key == k) {
        is_known = true;
        break;
      }
    }
    if (!is_known) extras[key] = value;
  }
  return extras;
}

Strategy parse_strategy(const json& value, const std::string& path) {
  if (!value.is_object()) wrong_type(path, "object", value);
  Strategy strategy;
  for (const auto& [key, item] : value.items()) {
    const auto item_path = path + "." + key;
    if (item.is_number()) {
      strategy.emplace(key, item.get<double>());
    } else if (item.is_string()) {
      strategy.emplace(key, item.get<std::string>());
    } else {
      throw ConfigError(item_path, "strategy values must be numbers or strings, found " + type_name(item));
    }
  }
  return strategy;
}

AgentSpec parse_agent(const json& value, const std::string& path) {
  if (!value.is_object()) wrong_type(path, "object", value);
  AgentSpec agent;
  agent.name = as_string(require(value, "name", path), path + ".name");
  agent.prompt = as_string(require(value, "prompt", path), path + ".prompt");
  if (const json* v = find(value, "description")) agent.description = as_string(*v, path + ".description");
  if (const json* v = find(value, "utility_class"); v && !v->is_null()) {
    agent.utility_class = as_string(*v, path + ".utility_class");
  }
  if (const json* v = find(value, "strategy")) agent.strategy = parse_strategy(*v, path + ".strategy");
  if (const json* v = find(value, "self_improve")) agent.self_improve = as_bool(*v, path + ".self_improve");
  if (const json* v = find(value, "optimization_target")) {
    agent.optimization_target = as_bool(*v, path + ".optimization_target");
  }
  agent.extras = unknown_keys(value, {"name", "description", "prompt", "utility_class", "strategy",
                                      "self_improve", "optimization_target"});
  return agent;
}

OutputVariableSpec parse_variable(const json& value, const std::string& path) {
  if (!value.is_object()) wrong_type(path, "object", value);
  OutputVariableSpec spec;
  spec.name = as_string(require(value, "name", path), path + ".name");
  spec.type = as_string(require(value, "type", path), path + ".type");
  if (const json* v = find(value, "description")) spec.description = as_string(*v, path + ".description");
  if (const json* v = find(value, "optional")) spec.optional = as_bool(*v, path + ".optional");
  return spec;
}

SimulationContext parse_context(const json& value, const std::string& path) {
  if (!value.is_object()) wrong_type(path, "object", value);
  SimulationContext ctx;
  if (const json* v = find(value, "type")) ctx.type = as_string(*v, path + ".type");
  if (const json* v = find(value, "domain")) ctx.domain = as_string(*v, path + ".domain");
  if (const json* v = find(value, "objectives")) ctx.objectives = as_string_list(*v, path + ".objectives");
  if (const json* v = find(value, "constraints")) ctx.constraints = as_string_list(*v, path + ".constraints");
  if (const json* v = find(value, "tags")) ctx.tags = as_string_list(*v, path + ".tags");
  ctx.extras = unknown_keys(value, {"type", "domain", "objectives", "constraints", "tags"});
  return ctx;
}

json strategy_value_json(const StrategyValue& value) {
  if (const double* d = std::get_if<double>(&value)) {
    if (std::isfinite(*d) && *d == std::floor(*d) && std::fabs(*d) < 9e15) {
      return static_cast<std::int64_t>(*d);
    }
    return *d;
  }
  return std::get<std::string>(value);
}

template <typename Target>
void merge_extras(Target& target, const json& extras) {
  for (const auto& [key, value] : extras.items()) {
    target[key] = value;
  }
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(describe(violations)), violations_(std::move(violations)) {}

std::optional<double> strategy_number(const Strategy& strategy, std::string_view key) {
  const auto it = strategy.find(key);
  if (it == strategy.end()) return std::nullopt;
  if (const double* d = std::get_if<double>(&it->second)) return *d;
  return std::nullopt;
}

std::string render_strategy_value(const StrategyValue& value) {
  if (const double* d = std::get_if<double>(&value)) return text::format_number(*d);
  return std::get<std::string>(value);
}

bool is_public_strategy_key(std::string_view key) { return key.starts_with(kPublicStrategyPrefix); }

std::optional<VariableKind> variable_kind_from(std::string_view name) {
  if (name == "Number") return VariableKind::Number;
  if (name == "Boolean") return VariableKind::Boolean;
  if (name == "String") return VariableKind::String;
  return std::nullopt;
}

std::string_view to_string(VariableKind kind) {
  switch (kind) {
    case VariableKind::Number:
      return "Number";
    case VariableKind::Boolean:
      return "Boolean";
    case VariableKind::String:
      return "String";
  }
  return "?";
}

const AgentSpec* ScenarioConfig::find_agent(std::string_view agent_name) const {
  for (const auto& agent : agents) {
    if (agent.name == agent_name) return &agent;
  }
  return nullptr;
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!alpha(s.front())) return false;
  for (char c : s) {
    if (!alpha(c) && !(c >= '0' && c <= '9')) return false;
  }
  return true;
}

bool is_non_negative_integer(const json& value) {
  return value.is_number_unsigned() || (value.is_number_integer() && value.get<long long>() >= 0);
}

ScenarioConfig config_from_json(const json& doc) {
  if (!doc.is_object()) wrong_type("", "object", doc);

  ScenarioConfig config;
  config.model_id = as_string(require(doc, "model", ""), "model");

  std::string config_hint;
  if (find(doc, "agents") != nullptr) config_hint = " (found \"agents\" at top level; it belongs under \"config\")";
  const json& body = require(doc, "config", "", config_hint);
  if (!body.is_object()) wrong_type("config", "object", body);

  config.name = as_string(require(body, "name", "config"), "config.name");

  const json& agents = require(body, "agents", "config");
  if (!agents.is_array()) wrong_type("config.agents", "array", agents);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    config.agents.push_back(parse_agent(agents[i], "config.agents[" + std::to_string(i) + "]"));
  }

  config.termination_condition =
      as_string(require(body, "termination_condition", "config"), "config.termination_condition");

  if (const json* vars = find(body, "output_variables")) {
    if (!vars->is_array()) wrong_type("config.output_variables", "array", *vars);
    for (std::size_t i = 0; i < vars->size(); ++i) {
      config.output_variables.push_back(
          parse_variable((*vars)[i], "config.output_variables[" + std::to_string(i) + "]"));
    }
  }
  if (const json* v = find(body, "max_messages")) config.max_messages = as_int(*v, "config.max_messages");
  config.config_extras =
      unknown_keys(body, {"name", "agents", "termination_condition", "output_variables", "max_messages"});

  std::string runs_hint;
  if (find(body, "num_runs") != nullptr) runs_hint = " (found under \"config\"; it belongs at top level)";
  config.num_runs = as_int(require(doc, "num_runs", "", runs_hint), "num_runs");

  if (const json* v = find(doc, "optimization_prompt"); v && !v->is_null()) {
    config.optimization_prompt = as_string(*v, "optimization_prompt");
  }
  if (const json* v = find(doc, "simulation_context")) {
    config.simulation_context = parse_context(*v, "simulation_context");
  }
  if (const json* v = find(doc, "rng_seed"); v && !v->is_null()) {
    if (!is_non_negative_integer(*v)) wrong_type("rng_seed", "unsigned integer", *v);
    config.rng_seed = v->get<std::uint64_t>();
  }
  config.metadata = unknown_keys(
      doc, {"model", "config", "num_runs", "optimization_prompt", "simulation_context", "rng_seed"});
  return config;
}

ScenarioConfig parse_config_unchecked(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("", "syntax error at byte " + std::to_string(e.byte) + ": " + e.what(), e.byte);
  }
  return config_from_json(doc);
}

ScenarioConfig parse_config(std::string_view text, const UtilityRegistry& registry) {
  ScenarioConfig config = parse_config_unchecked(text);
  auto violations = validate(config, registry);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return config;
}

ScenarioConfig parse_config(std::string_view text) { return parse_config(text, UtilityRegistry::defaults()); }

std::vector<Violation> validate(const ScenarioConfig& config) {
  return validate(config, UtilityRegistry::defaults());
}

std::vector<Violation> validate(const ScenarioConfig& config, const UtilityRegistry& registry) {
  std::vector<Violation> out;
  if (config.model_id.empty()) out.push_back({"model", "model identifier must be non-empty"});
  if (config.agents.size() < 2) out.push_back({"agents", "agents list length < 2"});

  std::set<std::string, std::less<>> seen;
  for (std::size_t i = 0; i < config.agents.size(); ++i) {
    const auto& agent = config.agents[i];
    const auto path = "agents[" + std::to_string(i) + "]";
    if (agent.name.empty()) {
      out.push_back({path + ".name", "agent name must be non-empty"});
    } else if (!seen.insert(agent.name).second) {
      out.push_back({path + ".name", "duplicate agent name '" + agent.name + "'"});
    }
    if (agent.utility_class && !registry.contains(*agent.utility_class)) {
      out.push_back({path + ".utility_class", "unknown utility_class '" + *agent.utility_class + "' (known: " +
                                                  text::join(registry.names(), ", ") + ")"});
    }
    for (const auto& [key, value] : agent.strategy) {
      if (const double* d = std::get_if<double>(&value); d && !std::isfinite(*d)) {
        out.push_back({path + ".strategy." + key, "strategy number must be finite"});
      } else if (const auto* s = std::get_if<std::string>(&value); s && s->empty()) {
        out.push_back({path + ".strategy." + key, "strategy string must be non-empty"});
      }
    }
  }

  if (config.termination_condition.empty()) {
    out.push_back({"termination_condition", "termination marker must be non-empty"});
  }
  if (config.num_runs < 1) out.push_back({"num_runs", "num_runs must be >= 1"});
  if (config.max_messages < 2) out.push_back({"max_messages", "max_messages must be >= 2"});

  std::set<std::string, std::less<>> var_names;
  for (std::size_t i = 0; i < config.output_variables.size(); ++i) {
    const auto& var = config.output_variables[i];
    const auto path = "output_variables[" + std::to_string(i) + "]";
    if (!is_identifier(var.name)) {
      out.push_back({path + ".name", "name must be an identifier (letters, digits, underscore; no leading digit)"});
    } else if (!var_names.insert(var.name).second) {
      out.push_back({path + ".name", "duplicate output variable '" + var.name + "'"});
    }
    if (!var.kind()) out.push_back({path + ".type", "type must be Number|Boolean|String"});
  }
  return out;
}

nlohmann::ordered_json to_json(const ScenarioConfig& config) {
  using ojson = nlohmann::ordered_json;
  ojson agents = ojson::array();
  for (const auto& agent : config.agents) {
    ojson a;
    a["name"] = agent.name;
    a["description"] = agent.description;
    a["prompt"] = agent.prompt;
    if (agent.utility_class) a["utility_class"] = *agent.utility_class;
    ojson strategy = ojson::object();
    for (const auto& [key, value] : agent.strategy) strategy[key] = strategy_value_json(value);
    a["strategy"] = strategy;
    a["self_improve"] = agent.self_improve;
    if (agent.optimization_target) a["optimization_target"] = *agent.optimization_target;
    merge_extras(a, agent.extras);
    agents.push_back(std::move(a));
  }

  ojson vars = ojson::array();
  for (const auto& var : config.output_variables) {
    ojson v;
    v["name"] = var.name;
    v["type"] = var.type;
    v["description"] = var.description;
    if (var.optional) v["optional"] = true;
    vars.push_back(std::move(v));
  }

  ojson body;
  body["name"] = config.name;
  body["agents"] = std::move(agents);
  body["termination_condition"] = config.termination_condition;
  body["output_variables"] = std::move(vars);
  body["max_messages"] = config.max_messages;
  merge_extras(body, config.config_extras);

  ojson ctx;
  ctx["type"] = config.simulation_context.type;
  ctx["domain"] = config.simulation_context.domain;
  ctx["objectives"] = config.simulation_context.objectives;
  ctx["constraints"] = config.simulation_context.constraints;
  ctx["tags"] = config.simulation_context.tags;
  merge_extras(ctx, config.simulation_context.extras);

  ojson doc;
  doc["model"] = config.model_id;
  doc["config"] = std::move(body);
  doc["num_runs"] = config.num_runs;
  if (config.optimization_prompt) doc["optimization_prompt"] = *config.optimization_prompt;
  doc["simulation_context"] = std::move(ctx);
  if (config.rng_seed) doc["rng_seed"] = *config.rng_seed;
  merge_extras(doc, config.metadata);
  return doc;
}

std::string serialize_config(const ScenarioConfig& config) { return to_json(config).dump(2); }

}  // namespace ngym
