#pragma once

#include <string_view>

namespace ngym::assets {

/// JSON-Schema (draft 2020-12) for scenario configuration documents.
std::string_view scenario_config_schema();

/// System prompt used by the post-episode variable extractor.
std::string_view extractor_prompt();

inline constexpr std::string_view kExtractorPromptVersion = "extractor-v1";

}  // namespace ngym::assets
