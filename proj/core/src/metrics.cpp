#include "ngym/metrics.hpp"

#include <stdexcept>

#include "ngym/error.hpp"
#include "ngym/negotiation.hpp"
#include "ngym/text.hpp"

namespace ngym {

std::vector<double> cumulative_average(std::span<const double> series) {
  if (series.empty()) throw PreconditionError("cumulative_average: empty series");
  std::vector<double> out;
  out.reserve(series.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    out.push_back(sum / static_cast<double>(i + 1));
  }
  return out;
}

MetricsBundle aggregate(std::span<const OutcomeRow> rows) {
  if (rows.empty()) throw PreconditionError("aggregate: no outcomes");
  std::vector<double> buyer;
  std::vector<double> seller;
  double buyer_ss = 0.0;
  double seller_ss = 0.0;
  MetricsBundle bundle;
  for (const auto& row : rows) {
    buyer.push_back(row.deal ? row.u_buyer : 0.0);
    seller.push_back(row.deal ? row.u_seller : 0.0);
    if (row.deal) {
      buyer_ss += row.buyer_ss;
      seller_ss += row.seller_ss;
    } else {
      ++bundle.no_deal_count;
    }
  }
  const auto n = static_cast<double>(rows.size());
  bundle.cum_avg_buyer = cumulative_average(buyer);
  bundle.cum_avg_seller = cumulative_average(seller);
  bundle.avg_buyer_ss = buyer_ss / n;
  bundle.avg_seller_ss = seller_ss / n;
  bundle.unclaimed_surplus_share = 1.0 - bundle.avg_buyer_ss - bundle.avg_seller_ss;
  if (bundle.avg_buyer_ss + bundle.avg_seller_ss > 1.0 + kParetoTolerance) {
    throw std::logic_error("aggregate: average surplus shares exceed the Pareto frontier");
  }
  return bundle;
}

MetricsBundle aggregate(const ExperimentResult& result) {
  std::vector<OutcomeRow> rows;
  for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
    if (result.outcomes[i].failed) continue;
    rows.push_back(OutcomeRow{result.outcomes[i].deal_reached, result.buyer_utils[i], result.seller_utils[i],
                              result.shares[i].buyer, result.shares[i].seller});
  }
  return aggregate(rows);
}

std::vector<std::pair<double, double>> pareto_frontier(int samples) {
  if (samples < 2) throw PreconditionError("pareto_frontier: need at least two samples");
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(samples - 1);
    out.emplace_back(x, 1.0 - x);
  }
  return out;
}

ReportDocument render_report(const std::map<ReflectMode, MetricsBundle>& bundles) {
  using ojson = nlohmann::ordered_json;
  ReportDocument doc;
  ojson modes = ojson::object();
  ojson points = ojson::array();
  doc.csv = "mode,n,avg_buyer_ss,avg_seller_ss,unclaimed,no_deal_count,final_cum_avg_buyer,final_cum_avg_seller\n";

  // std::map orders by the enum value, which is the canonical mode order.
  for (const auto& [mode, m] : bundles) {
    const std::string name(to_string(mode));
    ojson entry;
    entry["cum_avg_buyer"] = m.cum_avg_buyer;
    entry["cum_avg_seller"] = m.cum_avg_seller;
    entry["avg_buyer_ss"] = m.avg_buyer_ss;
    entry["avg_seller_ss"] = m.avg_seller_ss;
    entry["no_deal_count"] = m.no_deal_count;
    entry["unclaimed"] = m.unclaimed_surplus_share;
    modes[name] = std::move(entry);

    ojson point;
    point["mode"] = name;
    point["buyer_ss"] = m.avg_buyer_ss;
    point["seller_ss"] = m.avg_seller_ss;
    points.push_back(std::move(point));

    const auto last = [](const std::vector<double>& v) { return v.empty() ? std::string() : text::format_number(v.back()); };
    doc.csv += name + "," + std::to_string(m.cum_avg_buyer.size()) + "," + text::format_number(m.avg_buyer_ss) + "," +
               text::format_number(m.avg_seller_ss) + "," + text::format_number(m.unclaimed_surplus_share) + "," +
               std::to_string(m.no_deal_count) + "," + last(m.cum_avg_buyer) + "," + last(m.cum_avg_seller) + "\n";
  }

  ojson frontier = ojson::array();
  for (const auto& [x, y] : pareto_frontier()) frontier.push_back(ojson::array({x, y}));

  doc.json["modes"] = std::move(modes);
  doc.json["points"] = std::move(points);
  doc.json["frontier"] = std::move(frontier);
  return doc;
}

}  // namespace ngym
