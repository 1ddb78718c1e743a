#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ngym/config.hpp"

namespace ngym {

struct EpisodeRecord;

/// Maps an agent's private strategy and a finished episode to a scalar.
using UtilityFn = std::function<double(const Strategy&, const EpisodeRecord&)>;

struct UtilityBinding {
  std::string name;
  UtilityFn fn;

  double operator()(const Strategy& strategy, const EpisodeRecord& episode) const {
    return fn(strategy, episode);
  }
};

inline constexpr std::string_view kDefaultUtilityName = "Default";

/// Registry of named utility functions. `utility_class` keys in configs are
/// looked up here.
class UtilityRegistry {
 public:
  UtilityRegistry();

  /// A registry holding Default, BuyerAgent and SellerAgent.
  static const UtilityRegistry& defaults();

  void add(std::string name, UtilityFn fn);
  bool contains(std::string_view name) const;
  std::vector<std::string> names() const;

  /// Throws ResolutionError listing the known keys when `name` is unknown.
  UtilityBinding get(std::string_view name) const;

 private:
  std::map<std::string, UtilityFn, std::less<>> bindings_;
};

/// Binding for spec.utility_class, or Default (constant 0) when it is absent.
UtilityBinding resolve_utility(const AgentSpec& spec, const UtilityRegistry& registry);

}  // namespace ngym
