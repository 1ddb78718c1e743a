#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ngym {

enum class ReflectMode : std::uint8_t;
struct ExperimentResult;

/// Aggregates behind the cumulative-utility curves and the surplus-share
/// scatter.
struct MetricsBundle {
  std::vector<double> cum_avg_buyer;
  std::vector<double> cum_avg_seller;
  double avg_buyer_ss = 0.0;
  double avg_seller_ss = 0.0;
  int no_deal_count = 0;
  double unclaimed_surplus_share = 1.0;

  bool operator==(const MetricsBundle&) const = default;
};

/// One scored negotiation as seen by the aggregator.
struct OutcomeRow {
  bool deal = false;
  double u_buyer = 0.0;
  double u_seller = 0.0;
  double buyer_ss = 0.0;
  double seller_ss = 0.0;
};

inline constexpr double kParetoTolerance = 1e-9;

/// output[t] = mean(series[0..t]). Throws PreconditionError on empty input.
std::vector<double> cumulative_average(std::span<const double> series);

/// No-deal rows count as zeros in every average.
MetricsBundle aggregate(std::span<const OutcomeRow> rows);
MetricsBundle aggregate(const ExperimentResult& result);

/// Samples of the frontier buyer_ss + seller_ss = 1 at x = 0, 0.01, ..., 1.
std::vector<std::pair<double, double>> pareto_frontier(int samples = 101);

struct ReportDocument {
  nlohmann::ordered_json json;
  std::string csv;
};

/// Per-mode curves and scatter points plus the frontier line, in mode
/// enumeration order.
ReportDocument render_report(const std::map<ReflectMode, MetricsBundle>& bundles);

}  // namespace ngym
