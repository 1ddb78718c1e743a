#include "ngym/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

namespace ngym::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && to_lower(s.substr(0, prefix.size())) == to_lower(prefix);
}

std::string first_sentence(std::string_view s) {
  s = trim(s);
  while (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '"')) {
    s.remove_prefix(1);
    s = trim(s);
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '\n') {
      s = s.substr(0, i);
      break;
    }
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == s.size() || is_space(s[i + 1]) || s[i + 1] == '"')) {
      s = s.substr(0, i + 1);
      break;
    }
  }
  s = trim(s);
  while (!s.empty() && s.back() == '"') {
    s.remove_suffix(1);
  }
  return std::string(trim(s));
}

std::vector<double> numbers_in(std::string_view s) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_digit(s[i])) {
      ++i;
      continue;
    }
    std::string token;
    while (i < s.size()) {
      const char c = s[i];
      if (is_digit(c)) {
        token.push_back(c);
      } else if (c == ',' && i + 1 < s.size() && is_digit(s[i + 1]) && !token.empty()) {
        // thousands separator
      } else if (c == '.' && i + 1 < s.size() && is_digit(s[i + 1]) &&
                 token.find('.') == std::string::npos) {
        token.push_back(c);
      } else {
        break;
      }
      ++i;
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec == std::errc{} && ptr == token.data() + token.size()) {
      out.push_back(value);
    }
  }
  return out;
}

std::optional<double> last_number_in(std::string_view s) {
  auto numbers = numbers_in(s);
  if (numbers.empty()) return std::nullopt;
  return numbers.back();
}

std::string format_number(double value) {
  if (std::isfinite(value) && value == std::floor(value) && std::fabs(value) < 1e15) {
    return std::to_string(static_cast<long long>(value));
  }
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  (void)ec;
  return std::string(buffer, ptr);
}

bool mentions_number(std::string_view s, double value) {
  const auto numbers = numbers_in(s);
  return std::find(numbers.begin(), numbers.end(), value) != numbers.end();
}

std::string join(const std::vector<std::string>& parts, std::string_view separator) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i != 0) out.append(separator);
    out.append(parts[i]);
  }
  return out;
}

}  // namespace ngym::text
