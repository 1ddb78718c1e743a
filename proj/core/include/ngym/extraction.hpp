#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ngym/config.hpp"
#include "ngym/model_backend.hpp"
#include "ngym/transcript.hpp"

namespace ngym {

/// A value extracted from a transcript. Exactly one payload is present and it
/// matches kind().
class TypedValue {
 public:
  static TypedValue number(double value) { return TypedValue(value); }
  static TypedValue boolean(bool value) { return TypedValue(value); }
  static TypedValue string(std::string value) { return TypedValue(std::move(value)); }

  VariableKind kind() const;
  std::optional<double> as_number() const;
  std::optional<bool> as_boolean() const;
  std::optional<std::string> as_string() const;

  bool operator==(const TypedValue&) const = default;

 private:
  explicit TypedValue(double v) : payload_(v) {}
  explicit TypedValue(bool v) : payload_(v) {}
  explicit TypedValue(std::string v) : payload_(std::move(v)) {}

  std::variant<double, bool, std::string> payload_;
};

using ExtractedValues = std::map<std::string, TypedValue, std::less<>>;

/// Number: decimal, thousands separators stripped. Boolean: true/false/yes/no,
/// case-insensitive. String: trimmed. Throws TypedParseError otherwise.
TypedValue parse_typed(std::string_view raw, VariableKind kind);
std::string format_typed(const TypedValue& value);
nlohmann::ordered_json to_json(const TypedValue& value);

struct Extraction {
  ExtractedValues values;
  /// Raw reply strings per variable, persisted for audit.
  std::map<std::string, std::string, std::less<>> raw;
};

/// Extracts every spec from the finished transcript with one structured
/// backend call. A value the extractor leaves out is an error unless its spec
/// is optional. Throws ExtractionError.
Extraction extract_variables(std::span<const TranscriptEntry> transcript, std::span<const OutputVariableSpec> specs,
                             ModelBackend& backend, const CompletionParams& params);

/// Messages sent to the extractor (before the JSON instruction suffix).
std::vector<ChatMessage> extraction_messages(std::span<const TranscriptEntry> transcript,
                                             std::span<const OutputVariableSpec> specs);

inline constexpr std::string_view kDealReachedVariable = "deal_reached";
inline constexpr std::string_view kFinalPriceVariable = "final_price";

}  // namespace ngym
