#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "ngym/model_backend.hpp"

namespace ngym {

/// Offer schedule of the scripted buyer and seller. An agent on its j-th turn
/// has made c = max(0, j - 1 - hold) concessions.
///   buyer offer   = min(budget - 1, round(budget * (open + c * buyer_step)))
///   seller demand = max(floor + 1, round(ask - c * seller_step * (ask - floor)))
/// The seller accepts as soon as the buyer's latest offer reaches its current
/// demand; the deal closes at the buyer's offer.
struct ConcessionSchedule {
  double buyer_open = 0.8;
  double buyer_step = 0.05;
  int buyer_hold = 0;
  double seller_step = 0.05;
  int seller_hold = 0;

  static ConcessionSchedule standard() { return {}; }
  /// Both sides stall for five turns and then jump to their limits, so every
  /// instance closes on turn 14 at budget - 1.
  static ConcessionSchedule slow() { return {0.8, 0.2, 5, 1.0, 5}; }

  bool operator==(const ConcessionSchedule&) const = default;
};

std::optional<ConcessionSchedule> schedule_named(std::string_view name);

double scripted_buyer_offer(const ConcessionSchedule& schedule, double budget, int turn);
double scripted_seller_demand(const ConcessionSchedule& schedule, double ask, double floor, int turn);

/// Deterministic coach reply number `index`; distinct for the first 32.
std::string scripted_strategy_sentence(std::size_t index);

/// A model stand-in that plays the laptop negotiation. It reads each agent's
/// private constraints from the system prompt and answers extraction, coach,
/// revision and silent-reflection requests deterministically.
std::unique_ptr<ScriptedBackend> make_negotiation_backend(ConcessionSchedule schedule = ConcessionSchedule::standard());

}  // namespace ngym
