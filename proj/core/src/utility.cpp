#include "ngym/utility.hpp"

#include <cmath>

#include "ngym/agent.hpp"
#include "ngym/negotiation.hpp"
#include "ngym/text.hpp"

namespace ngym {

namespace {

std::optional<double> first_number(const Strategy& strategy, std::initializer_list<std::string_view> keys) {
  for (auto key : keys) {
    if (auto v = strategy_number(strategy, key)) return v;
  }
  return std::nullopt;
}

/// nullopt means no deal; otherwise the rounded agreed price.
std::optional<double> agreed_price(const EpisodeRecord& episode) {
  const auto deal = episode.extracted.find(kDealReachedVariable);
  if (deal == episode.extracted.end() || !deal->second.as_boolean()) {
    throw UtilityError(std::string(kDealReachedVariable),
                       "episode " + std::to_string(episode.index) + " has no Boolean deal_reached variable");
  }
  if (!*deal->second.as_boolean()) return std::nullopt;
  const auto price = episode.extracted.find(kFinalPriceVariable);
  if (price == episode.extracted.end() || !price->second.as_number()) {
    throw UtilityError(std::string(kFinalPriceVariable),
                       "episode " + std::to_string(episode.index) + " reached a deal but has no Number final_price");
  }
  return std::round(*price->second.as_number());
}

double buyer_binding(const Strategy& strategy, const EpisodeRecord& episode) {
  const auto budget = first_number(strategy, {"budget", "max_price"});
  if (!budget || *budget <= 0.0) {
    throw UtilityError("budget", "BuyerAgent needs a positive numeric strategy entry 'budget' (or 'max_price')");
  }
  const auto price = agreed_price(episode);
  if (!price) return 0.0;
  return buyer_utility_at(*budget, *price);
}

double seller_binding(const Strategy& strategy, const EpisodeRecord& episode) {
  const auto ask = first_number(strategy, {"public_ask", "ask", "target_price"});
  if (!ask) {
    throw UtilityError("ask", "SellerAgent needs a numeric strategy entry 'public_ask' (or 'ask', 'target_price')");
  }
  // A seller configured with only a target price has an implicit floor of 0.
  const double floor = first_number(strategy, {"floor", "min_price"}).value_or(0.0);
  if (!(*ask > floor)) throw UtilityError("floor", "SellerAgent needs ask > floor");
  const auto price = agreed_price(episode);
  if (!price) return 0.0;
  return seller_utility_at(floor, *ask, *price);
}

}  // namespace

UtilityRegistry::UtilityRegistry() {
  bindings_.emplace(std::string(kDefaultUtilityName), [](const Strategy&, const EpisodeRecord&) { return 0.0; });
}

const UtilityRegistry& UtilityRegistry::defaults() {
  static const UtilityRegistry registry = [] {
    UtilityRegistry r;
    r.add("BuyerAgent", buyer_binding);
    r.add("SellerAgent", seller_binding);
    return r;
  }();
  return registry;
}

void UtilityRegistry::add(std::string name, UtilityFn fn) { bindings_[std::move(name)] = std::move(fn); }

bool UtilityRegistry::contains(std::string_view name) const { return bindings_.find(name) != bindings_.end(); }

std::vector<std::string> UtilityRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, fn] : bindings_) out.push_back(name);
  return out;
}

UtilityBinding UtilityRegistry::get(std::string_view name) const {
  const auto it = bindings_.find(name);
  if (it == bindings_.end()) {
    throw ResolutionError("unknown utility_class '" + std::string(name) + "'; known: " + text::join(names(), ", "));
  }
  return UtilityBinding{it->first, it->second};
}

UtilityBinding resolve_utility(const AgentSpec& spec, const UtilityRegistry& registry) {
  return registry.get(spec.utility_class ? std::string_view(*spec.utility_class) : kDefaultUtilityName);
}

}  // namespace ngym
