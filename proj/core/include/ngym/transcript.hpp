#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ngym {

/// One public message. Turn indices start at 1 and strictly increase.
struct TranscriptEntry {
  int turn = 0;
  std::string author;
  std::string content;

  bool operator==(const TranscriptEntry&) const = default;
};

using Transcript = std::vector<TranscriptEntry>;

/// "[turn] author: content" lines.
std::string render_transcript(const Transcript& transcript);
nlohmann::ordered_json to_json(const TranscriptEntry& entry);

}  // namespace ngym
