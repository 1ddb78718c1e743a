#include "ngym/scripted_negotiation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "ngym/agent.hpp"
#include "ngym/assets.hpp"
#include "ngym/negotiation.hpp"
#include "ngym/text.hpp"

namespace ngym {

namespace {

constexpr std::string_view kReflectionLead = "You are thinking silently as ";
constexpr std::string_view kParticipantsLead = "\nParticipants: ";

std::vector<std::string_view> lines_of(std::string_view s) {
  std::vector<std::string_view> out;
  while (!s.empty()) {
    const auto nl = s.find('\n');
    out.push_back(s.substr(0, nl));
    if (nl == std::string_view::npos) break;
    s.remove_prefix(nl + 1);
  }
  return out;
}

/// "- key: 123" lines of the constraints / public facts blocks.
std::map<std::string, double, std::less<>> numeric_facts(std::string_view system) {
  std::map<std::string, double, std::less<>> out;
  for (auto line : lines_of(system)) {
    if (!line.starts_with("- ")) continue;
    line.remove_prefix(2);
    const auto colon = line.find(": ");
    if (colon == std::string_view::npos) continue;
    const auto key = line.substr(0, colon);
    if (key.empty() || key.find(' ') != std::string_view::npos) continue;
    const auto value = text::trim(line.substr(colon + 2));
    const auto numbers = text::numbers_in(value);
    if (numbers.size() != 1 || text::format_number(numbers.front()) != value) continue;
    out[std::string(key)] = numbers.front();
  }
  return out;
}

std::optional<double> fact(const std::map<std::string, double, std::less<>>& facts,
                           std::initializer_list<std::string_view> keys) {
  for (auto key : keys) {
    if (const auto it = facts.find(key); it != facts.end()) return it->second;
  }
  return std::nullopt;
}

struct TranscriptLine {
  std::string author;
  std::string content;
};

std::vector<TranscriptLine> transcript_lines(std::string_view request) {
  std::vector<TranscriptLine> out;
  for (auto line : lines_of(request)) {
    if (!line.starts_with("[")) continue;
    const auto close = line.find("] ");
    const auto colon = line.find(": ", close == std::string_view::npos ? 0 : close);
    if (close == std::string_view::npos || colon == std::string_view::npos) continue;
    out.push_back({std::string(line.substr(close + 2, colon - close - 2)), std::string(line.substr(colon + 2))});
  }
  return out;
}

bool author_is(const TranscriptLine& line, std::string_view role) {
  return text::to_lower(line.author).find(role) != std::string::npos;
}

std::optional<double> last_number_by(const std::vector<TranscriptLine>& lines, std::string_view role) {
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (!author_is(*it, role)) continue;
    if (auto n = text::last_number_in(it->content)) return n;
  }
  return std::nullopt;
}

std::string extraction_reply(const ScriptContext& ctx) {
  const std::string_view request = ctx.history.size() > 1 ? std::string_view(ctx.history[1].content) : "";
  const auto lines = transcript_lines(request.substr(0, request.find("\nVariables to report:")));

  const TranscriptLine* deal_line = nullptr;
  for (const auto& line : lines) {
    if (line.content.find(kDealPhrase) != std::string::npos) {
      deal_line = &line;
      break;
    }
  }

  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  const auto vars_at = request.find("\nVariables to report:");
  if (vars_at == std::string_view::npos) return out.dump();
  for (auto line : lines_of(request.substr(vars_at + 1))) {
    if (!line.starts_with("- ")) continue;
    line.remove_prefix(2);
    const auto paren = line.find(" (");
    const auto close = line.find(')', paren);
    if (paren == std::string_view::npos || close == std::string_view::npos) continue;
    const std::string name(line.substr(0, paren));
    const auto type = line.substr(paren + 2, close - paren - 2);

    if (name == kDealReachedVariable) {
      out[name] = deal_line != nullptr;
    } else if (name == kFinalPriceVariable) {
      const auto numbers = deal_line ? text::numbers_in(deal_line->content) : std::vector<double>{};
      out[name] = numbers.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(numbers.front());
    } else if (name == "negotiation_rounds") {
      out[name] = (lines.size() + 1) / 2;
    } else if (name == "last_offer_made") {
      const auto n = last_number_by(lines, "buyer");
      out[name] = n ? nlohmann::ordered_json(*n) : nlohmann::ordered_json(nullptr);
    } else if (name == "last_offer_received") {
      const auto n = last_number_by(lines, "seller");
      out[name] = n ? nlohmann::ordered_json(*n) : nlohmann::ordered_json(nullptr);
    } else if (type == "Number") {
      out[name] = 0;
    } else if (type == "Boolean") {
      out[name] = false;
    } else {
      out[name] = "unknown";
    }
  }
  return out.dump();
}

std::string reflection_reply(const ScriptContext& ctx) {
  const auto who = text::to_lower(std::string_view(ctx.last().content).substr(kReflectionLead.size(), 16));
  if (who.starts_with("buyer")) return "I believe the seller will concede soon.";
  if (who.starts_with("seller")) return "I believe the buyer will raise the offer soon.";
  return "I believe the other side will concede soon.";
}

std::string selector_reply(const ScriptContext& ctx) {
  const std::string_view system = ctx.system().content;
  const auto at = system.find(kParticipantsLead);
  auto list = system.substr(at + kParticipantsLead.size());
  list = list.substr(0, list.find('\n'));
  std::vector<std::string> names;
  while (!list.empty()) {
    const auto comma = list.find(", ");
    names.emplace_back(list.substr(0, comma));
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 2);
  }
  const auto spoken = transcript_lines(ctx.history.size() > 1 ? std::string_view(ctx.history[1].content) : "");
  return names.empty() ? std::string() : names[spoken.size() % names.size()];
}

std::size_t prior_strategy_count(std::span<const ChatMessage> history) {
  std::size_t count = 0;
  for (const auto& message : history) {
    bool in_list = false;
    for (auto line : lines_of(message.content)) {
      if (line == "Previous strategies:") {
        in_list = true;
        continue;
      }
      if (!in_list) continue;
      if (!line.starts_with("- ")) {
        in_list = false;
        continue;
      }
      if (!text::trim(line.substr(2)).empty()) ++count;
    }
  }
  return count;
}

std::string revision_reply(const ScriptContext& ctx) {
  return scripted_strategy_sentence(prior_strategy_count(ctx.history) + ctx.assistant_turns());
}

bool is_agent_turn(const ScriptContext& ctx) {
  return std::any_of(ctx.history.begin(), ctx.history.end(), [](const ChatMessage& m) {
    return m.author_name.has_value() || m.content == kOpeningCue;
  });
}

const ChatMessage* last_from_other(std::span<const ChatMessage> history) {
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->role == Role::user && it->author_name) return &*it;
  }
  return nullptr;
}

std::string agent_reply(const ScriptContext& ctx, const ConcessionSchedule& schedule) {
  const auto facts = numeric_facts(ctx.system().content);
  const int turn = static_cast<int>(ctx.assistant_turns()) + 1;
  const ChatMessage* other = last_from_other(ctx.history);

  if (const auto budget = fact(facts, {"budget", "max_price"})) {
    return "I offer " + text::format_number(scripted_buyer_offer(schedule, *budget, turn)) + ".";
  }

  auto ask = fact(facts, {"ask", "public_ask"});
  auto floor = fact(facts, {"floor", "min_price"});
  if (!ask) {
    // A seller that only knows its target price opens above it and will go
    // some way below it.
    if (const auto target = fact(facts, {"target_price"})) {
      ask = std::round(*target * 1.15);
      if (!floor) floor = std::round(*target * 0.85);
    }
  }
  if (ask) {
    const double lowest = floor.value_or(std::round(*ask * 0.75));
    const double demand = scripted_seller_demand(schedule, *ask, lowest, turn);
    if (other != nullptr) {
      if (const auto offer = text::last_number_in(other->content); offer && std::round(*offer) >= demand) {
        return text::format_number(std::round(*offer)) + " then. Yes, deal! STOP_NEGOTIATION";
      }
    }
    if (turn == 1) return "Asking " + text::format_number(*ask) + ".";
    return "I can do " + text::format_number(demand) + ".";
  }
  return "I have nothing to add.";
}

}  // namespace

std::optional<ConcessionSchedule> schedule_named(std::string_view name) {
  if (name == "standard") return ConcessionSchedule::standard();
  if (name == "slow") return ConcessionSchedule::slow();
  return std::nullopt;
}

double scripted_buyer_offer(const ConcessionSchedule& schedule, double budget, int turn) {
  const int c = std::max(0, turn - 1 - schedule.buyer_hold);
  return std::min(budget - 1.0, std::round(budget * (schedule.buyer_open + c * schedule.buyer_step)));
}

double scripted_seller_demand(const ConcessionSchedule& schedule, double ask, double floor, int turn) {
  const int c = std::max(0, turn - 1 - schedule.seller_hold);
  return std::max(floor + 1.0, std::round(ask - c * schedule.seller_step * (ask - floor)));
}

std::string scripted_strategy_sentence(std::size_t index) {
  static constexpr std::array<std::string_view, 8> kTactics{
      "Anchor the discussion with a confident opening position",
      "Mirror the counterpart's last words to draw out more information",
      "Apply gentle time-pressure by signalling other options",
      "Concede in shrinking steps to signal you are nearing your limit",
      "Ask an open question about the counterpart's constraints",
      "Bundle each small concession with a request for a reciprocal move",
      "Reframe the value of the item before discussing numbers",
      "Summarise the points already agreed to build momentum",
  };
  static constexpr std::array<std::string_view, 4> kTimings{
      "before making any concession",
      "early in the conversation",
      "whenever the counterpart stalls",
      "once the gap between positions narrows",
  };
  std::string sentence(kTactics[index % kTactics.size()]);
  sentence += " ";
  sentence += kTimings[(index / kTactics.size()) % kTimings.size()];
  const std::size_t cycle = index / (kTactics.size() * kTimings.size());
  if (cycle > 0) sentence += ", round " + std::to_string(cycle + 1);
  sentence += ".";
  return sentence;
}

std::unique_ptr<ScriptedBackend> make_negotiation_backend(ConcessionSchedule schedule) {
  auto backend = std::make_unique<ScriptedBackend>();
  backend->add_rule({"extraction",
                     [](const ScriptContext& ctx) { return ctx.system().content == assets::extractor_prompt(); },
                     extraction_reply});
  backend->add_rule({"reflection",
                     [](const ScriptContext& ctx) {
                       return ctx.last().role == Role::user && ctx.last().content.starts_with(kReflectionLead);
                     },
                     reflection_reply});
  backend->add_rule({"selector",
                     [](const ScriptContext& ctx) {
                       return ctx.system().content.find(kParticipantsLead) != std::string::npos;
                     },
                     selector_reply});
  backend->add_rule({"agent", is_agent_turn,
                     [schedule](const ScriptContext& ctx) { return agent_reply(ctx, schedule); }});
  backend->otherwise(revision_reply);
  return backend;
}

}  // namespace ngym
