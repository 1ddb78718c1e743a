#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ngym::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);

/// First sentence of `s`: everything up to and including the first '.', '!'
/// or '?' that ends the text or is followed by whitespace. Leading list
/// markers and wrapping quotes are stripped.
std::string first_sentence(std::string_view s);

/// Numeric tokens in `s`, with thousands separators removed
/// ("1,100.50" -> 1100.5).
std::vector<double> numbers_in(std::string_view s);
std::optional<double> last_number_in(std::string_view s);

/// Integer-valued numbers render without a decimal point ("1100"), others in
/// shortest round-trip form.
std::string format_number(double value);

/// True when a numeric token in `s` equals `value`.
bool mentions_number(std::string_view s, double value);

std::string join(const std::vector<std::string>& parts, std::string_view separator);

}  // namespace ngym::text
