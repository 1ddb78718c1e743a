#include "ngym/extraction.hpp"

#include <charconv>
#include <cmath>

#include "ngym/assets.hpp"
#include "ngym/error.hpp"
#include "ngym/text.hpp"

namespace ngym {

std::string render_transcript(const Transcript& transcript) {
  std::string out;
  for (const auto& entry : transcript) {
    out += "[" + std::to_string(entry.turn) + "] " + entry.author + ": " + entry.content + "\n";
  }
  return out;
}

nlohmann::ordered_json to_json(const TranscriptEntry& entry) {
  nlohmann::ordered_json out;
  out["turn"] = entry.turn;
  out["author"] = entry.author;
  out["content"] = entry.content;
  return out;
}

VariableKind TypedValue::kind() const {
  switch (payload_.index()) {
    case 0:
      return VariableKind::Number;
    case 1:
      return VariableKind::Boolean;
    default:
      return VariableKind::String;
  }
}

std::optional<double> TypedValue::as_number() const {
  if (const double* v = std::get_if<double>(&payload_)) return *v;
  return std::nullopt;
}

std::optional<bool> TypedValue::as_boolean() const {
  if (const bool* v = std::get_if<bool>(&payload_)) return *v;
  return std::nullopt;
}

std::optional<std::string> TypedValue::as_string() const {
  if (const auto* v = std::get_if<std::string>(&payload_)) return *v;
  return std::nullopt;
}

TypedValue parse_typed(std::string_view raw, VariableKind kind) {
  if (raw.empty()) throw PreconditionError("parse_typed: raw value must be non-empty");
  const auto trimmed = text::trim(raw);
  const std::string kind_name(to_string(kind));

  switch (kind) {
    case VariableKind::Number: {
      std::string digits;
      digits.reserve(trimmed.size());
      for (char c : trimmed) {
        if (c != ',') digits.push_back(c);
      }
      const char* first = digits.data();
      const char* last = digits.data() + digits.size();
      if (first != last && *first == '+') ++first;
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(first, last, value);
      if (digits.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        throw TypedParseError(std::string(raw), kind_name);
      }
      return TypedValue::number(value);
    }
    case VariableKind::Boolean: {
      const auto lowered = text::to_lower(trimmed);
      if (lowered == "true" || lowered == "yes") return TypedValue::boolean(true);
      if (lowered == "false" || lowered == "no") return TypedValue::boolean(false);
      throw TypedParseError(std::string(raw), kind_name);
    }
    case VariableKind::String:
      return TypedValue::string(std::string(trimmed));
  }
  throw TypedParseError(std::string(raw), kind_name);
}

std::string format_typed(const TypedValue& value) {
  switch (value.kind()) {
    case VariableKind::Number:
      return text::format_number(*value.as_number());
    case VariableKind::Boolean:
      return *value.as_boolean() ? "true" : "false";
    case VariableKind::String:
      return *value.as_string();
  }
  return {};
}

nlohmann::ordered_json to_json(const TypedValue& value) {
  switch (value.kind()) {
    case VariableKind::Number:
      return *value.as_number();
    case VariableKind::Boolean:
      return *value.as_boolean();
    case VariableKind::String:
      return *value.as_string();
  }
  return nullptr;
}

std::vector<ChatMessage> extraction_messages(std::span<const TranscriptEntry> transcript,
                                             std::span<const OutputVariableSpec> specs) {
  std::string request = "Transcript:\n";
  for (const auto& entry : transcript) {
    request += "[" + std::to_string(entry.turn) + "] " + entry.author + ": " + entry.content + "\n";
  }
  request += "\nVariables to report:\n";
  for (const auto& spec : specs) {
    request += "- " + spec.name + " (" + spec.type + ")";
    if (!spec.description.empty()) request += ": " + spec.description;
    request += "\n";
  }
  return {ChatMessage::system(std::string(assets::extractor_prompt())), ChatMessage::user(std::move(request))};
}

Extraction extract_variables(std::span<const TranscriptEntry> transcript, std::span<const OutputVariableSpec> specs,
                             ModelBackend& backend, const CompletionParams& params) {
  if (transcript.empty()) throw PreconditionError("extract_variables: transcript must be non-empty");
  if (specs.empty()) throw PreconditionError("extract_variables: specs must be non-empty");

  const auto messages = extraction_messages(transcript, specs);
  StructuredReply reply;
  try {
    reply = backend.complete_structured(messages, params, specs);
  } catch (const BackendError& e) {
    throw ExtractionError(std::string("extraction failed: ") + e.what());
  }

  Extraction out;
  for (const auto& spec : specs) {
    const auto it = reply.find(spec.name);
    if (it == reply.end()) continue;
    out.raw.emplace(spec.name, it->second);
    const auto kind = spec.kind();
    if (!kind) throw ExtractionError("variable '" + spec.name + "' has unknown type '" + spec.type + "'");
    try {
      out.values.emplace(spec.name, parse_typed(it->second, *kind));
    } catch (const Error& e) {
      throw ExtractionError("variable '" + spec.name + "': " + e.what());
    }
  }

  for (const auto& spec : specs) {
    if (spec.optional || out.values.contains(spec.name)) continue;
    throw ExtractionError("variable '" + spec.name + "' is missing from the extractor reply");
  }
  return out;
}

}  // namespace ngym
