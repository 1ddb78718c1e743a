#include "ngym/negotiation.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>

#include "ngym/engine.hpp"
#include "ngym/error.hpp"
#include "ngym/extraction.hpp"
#include "ngym/text.hpp"

namespace ngym {

namespace {

double whole_usd(double value) { return std::round(value); }

std::string two_decimals(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool is_currency_mark(char c) { return c == '$'; }

bool currency_word_at(std::string_view s, std::size_t pos) {
  for (std::string_view word : {"usd", "dollar", "eur", "euro"}) {
    if (s.size() - pos < word.size()) continue;
    bool match = true;
    for (std::size_t i = 0; i < word.size(); ++i) {
      if (std::tolower(static_cast<unsigned char>(s[pos + i])) != word[i]) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

}  // namespace

bool NegotiationInstance::within_bounds() const {
  return ask >= 900.0 && ask <= 1400.0 && floor >= ask - 300.0 && floor <= ask - 100.0 && budget >= floor + 50.0 &&
         budget <= ask - 50.0;
}

NegotiationInstance sample_instance(NegotiationRng& rng) {
  NegotiationInstance instance;
  instance.ask = whole_usd(std::uniform_real_distribution<double>(900.0, 1400.0)(rng));
  const double gap = whole_usd(std::uniform_real_distribution<double>(100.0, 300.0)(rng));
  instance.floor = instance.ask - gap;
  instance.budget =
      whole_usd(std::uniform_real_distribution<double>(instance.floor + 50.0, instance.ask - 50.0)(rng));
  return instance;
}

NegotiationInstance sample_instance(std::uint64_t seed) {
  NegotiationRng rng(seed);
  auto instance = sample_instance(rng);
  instance.seed = seed;
  return instance;
}

bool DealOutcome::rational() const {
  if (!deal_reached || !price) return true;
  return *price >= instance.floor && *price <= instance.budget;
}

double buyer_utility_at(double budget, double price) {
  if (!(budget > 0.0)) throw PreconditionError("buyer utility needs a positive budget");
  return (budget - price) / budget;
}

double seller_utility_at(double floor, double ask, double price) {
  if (!(ask > floor)) throw PreconditionError("seller utility needs ask > floor");
  return (price - floor) / (ask - floor);
}

double buyer_utility(const NegotiationInstance& instance, const DealOutcome& outcome) {
  if (!outcome.deal_reached || !outcome.price) return 0.0;
  return buyer_utility_at(instance.budget, *outcome.price);
}

double seller_utility(const NegotiationInstance& instance, const DealOutcome& outcome) {
  if (!outcome.deal_reached || !outcome.price) return 0.0;
  return seller_utility_at(instance.floor, instance.ask, *outcome.price);
}

SurplusShares surplus_shares(const NegotiationInstance& instance, const DealOutcome& outcome) {
  if (!outcome.deal_reached || !outcome.price) return {};
  if (!(instance.ask > instance.floor)) throw PreconditionError("surplus shares need ask > floor");
  const double surplus = instance.ask - instance.floor;
  return {(instance.ask - *outcome.price) / surplus, (*outcome.price - instance.floor) / surplus};
}

UtilityTag utility_tag(double utility) {
  if (utility <= 0.0) return UtilityTag::loss;
  if (utility < 0.3) return UtilityTag::poor;
  if (utility < 0.7) return UtilityTag::fair;
  return UtilityTag::great;
}

std::string_view to_string(UtilityTag tag) {
  switch (tag) {
    case UtilityTag::loss: return "loss";
    case UtilityTag::poor: return "poor";
    case UtilityTag::fair: return "fair";
    case UtilityTag::great: return "great";
  }
  return "loss";
}

std::string_view to_string(ReflectMode mode) {
  switch (mode) {
    case ReflectMode::no_reflect: return "no_reflect";
    case ReflectMode::buyer_reflect: return "buyer_reflect";
    case ReflectMode::seller_reflect: return "seller_reflect";
    case ReflectMode::both_reflect: return "both_reflect";
  }
  return "no_reflect";
}

std::optional<ReflectMode> reflect_mode_from(std::string_view name) {
  for (auto mode : kAllReflectModes) {
    if (to_string(mode) == name) return mode;
  }
  return std::nullopt;
}

bool coaches_buyer(ReflectMode mode) {
  return mode == ReflectMode::buyer_reflect || mode == ReflectMode::both_reflect;
}

bool coaches_seller(ReflectMode mode) {
  return mode == ReflectMode::seller_reflect || mode == ReflectMode::both_reflect;
}

std::string buyer_prompt(const NegotiationInstance& instance) {
  return "You are a buyer negotiating to purchase a used laptop. The seller's public asking price is " +
         text::format_number(instance.ask) +
         " USD. Pay as little as possible, and never reveal your private budget. Make one concrete offer in USD "
         "per message. The seller closes an agreement by writing 'Yes, deal!' followed by STOP_NEGOTIATION.";
}

std::string seller_prompt(const NegotiationInstance& instance) {
  return "You are selling a used laptop. Your public asking price is " + text::format_number(instance.ask) +
         " USD. Sell for as much as possible, and never reveal your private minimum price. Quote one concrete "
         "price in USD per message. To accept the buyer's offer, write 'Yes, deal!' and then STOP_NEGOTIATION.";
}

ScenarioConfig negotiation_scenario(const NegotiationInstance& instance, const std::string& model_id, int max_turns) {
  ScenarioConfig config;
  config.model_id = model_id;
  config.name = "laptop_negotiation";
  config.termination_condition = std::string(kStopMarker);
  config.max_messages = max_turns;
  config.num_runs = 1;

  AgentSpec buyer;
  buyer.name = std::string(kBuyerName);
  buyer.description = "Buys the laptop";
  buyer.prompt = buyer_prompt(instance);
  buyer.utility_class = "BuyerAgent";
  buyer.strategy = {{"budget", instance.budget}};

  AgentSpec seller;
  seller.name = std::string(kSellerName);
  seller.description = "Sells the laptop";
  seller.prompt = seller_prompt(instance);
  seller.utility_class = "SellerAgent";
  seller.strategy = {{"floor", instance.floor}, {"public_ask", instance.ask}};

  config.agents = {std::move(buyer), std::move(seller)};
  config.output_variables = {
      {std::string(kFinalPriceVariable), "Number", "Agreed price in USD, or null when there was no deal", true},
      {std::string(kDealReachedVariable), "Boolean", "Whether the seller accepted a price", false},
  };
  config.simulation_context.type = "negotiation";
  config.simulation_context.domain = "used laptop sale";
  return config;
}

DealOutcome deal_outcome(const NegotiationInstance& instance, const EpisodeRecord& episode) {
  DealOutcome outcome;
  outcome.instance = instance;
  outcome.turns_used = static_cast<int>(episode.transcript.size());
  outcome.failed = episode.failed;
  if (episode.failed || episode.extraction_failed) return outcome;
  const auto deal = episode.extracted.find(kDealReachedVariable);
  const auto price = episode.extracted.find(kFinalPriceVariable);
  if (deal == episode.extracted.end() || !deal->second.as_boolean() || !*deal->second.as_boolean()) return outcome;
  if (price == episode.extracted.end() || !price->second.as_number()) return outcome;
  outcome.deal_reached = true;
  outcome.price = whole_usd(*price->second.as_number());
  return outcome;
}

std::string render_coach_prompt(const UtilityAgent& agent, const Environment& /*env*/, double utility) {
  const auto& name = agent.name();
  std::string prompt = "You are a seasoned negotiation coach.\n";
  prompt += "Previous strategies:\n- " + text::join(agent.strategy_log(), "\n- ") + "\n";
  prompt += "Analyse the transcript and devise exactly ONE new negotiation strategy sentence the " + name +
            " could apply in a *future* negotiation to get a better price.\n";
  prompt +=
      "If neither party uttered 'Yes, deal!', that means no deal was reached. In that case, focus on how to reach "
      "a good deal faster next time.\n";
  prompt +=
      "Start with an action verb and do NOT duplicate prior strategies. Do NOT mention specific prices, names or "
      "budgets from the dialogue.\n";
  prompt += agent.private_constraints() + "\n";
  prompt += "The " + name + "'s normalised utility for this deal was " + two_decimals(utility) + " (" +
            std::string(to_string(utility_tag(utility))) + ").\n";
  prompt +=
      "- If utility was 'loss' or 'poor', focus on improvement. - If 'great', suggest how to replicate or "
      "slightly enhance success.\n";
  prompt +=
      "Include one recognised negotiation tactic (e.g., anchoring, mirroring, time-pressure) that fits what you "
      "observed in the transcript.\n";
  prompt += "Think step-by-step and return ONLY that single negotiation strategy sentence.";
  return prompt;
}

std::vector<ChatMessage> coach_messages(const UtilityAgent& agent, const Environment& env,
                                        const CoachOptions& options) {
  if (env.runs.empty()) throw PreconditionError("coach_messages: environment has no runs");
  const auto& latest = env.runs.back();
  const auto u = latest.utilities.find(agent.name());
  const double utility = u == latest.utilities.end() ? 0.0 : u->second;
  std::string system = options.prompt_override ? *options.prompt_override : render_coach_prompt(agent, env, utility);
  return {ChatMessage::system(std::move(system)), ChatMessage::user("Transcript:\n" + render_transcript(latest.transcript))};
}

std::optional<std::string> price_mention(std::string_view sentence) {
  for (std::size_t i = 0; i < sentence.size();) {
    if (!std::isdigit(static_cast<unsigned char>(sentence[i]))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    std::size_t digits = 0;
    while (i < sentence.size() && (std::isdigit(static_cast<unsigned char>(sentence[i])) || sentence[i] == ',')) {
      if (sentence[i] != ',') ++digits;
      ++i;
    }
    std::size_t end = i;
    while (end > start && sentence[end - 1] == ',') --end;
    const auto token = std::string(sentence.substr(start, end - start));
    if (digits >= 3) return "it names the figure " + token;

    std::size_t before = start;
    while (before > 0 && sentence[before - 1] == ' ') --before;
    if (before > 0 && is_currency_mark(sentence[before - 1])) return "it names the amount $" + token;
    std::size_t after = end;
    while (after < sentence.size() && sentence[after] == ' ') ++after;
    if (after < sentence.size() && (is_currency_mark(sentence[after]) || currency_word_at(sentence, after))) {
      return "it names the amount " + token + " " + std::string(sentence.substr(after, 3));
    }
  }
  return std::nullopt;
}

std::optional<PromptRevision> coach_strategy(UtilityAgent& agent, Environment& env, ModelBackend& backend,
                                             const CoachOptions& options) {
  RevisionPolicy policy;
  policy.build_messages = [&options](const UtilityAgent& a, const Environment& e) {
    return coach_messages(a, e, options);
  };
  policy.reject = [](std::string_view sentence) { return price_mention(sentence); };
  return revise_prompt(agent, env, backend, options.params, policy, options.events);
}

std::uint64_t instance_seed(std::uint64_t seed, int index) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index)));
}

ExperimentResult run_experiment(const ExperimentSettings& settings, ModelBackend& backend, const EventSink& events) {
  if (settings.n < 1) throw PreconditionError("run_experiment: n must be positive");
  if (settings.max_turns < 2) throw PreconditionError("run_experiment: max_turns must be at least 2");

  ExperimentResult result;
  result.mode = settings.mode;
  result.max_turns = settings.max_turns;
  result.seed = settings.seed;
  Environment& env = result.environment;

  CompletionParams params = settings.params;
  if (params.model_id.empty()) params.model_id = settings.model_id;
  CoachOptions coach;
  coach.prompt_override = settings.coach_prompt;
  coach.params = params;
  coach.events = events;

  std::vector<OutcomeRow> rows;
  for (int i = 0; i < settings.n; ++i) {
    const auto seed = instance_seed(settings.seed, i);
    const auto instance = sample_instance(seed);
    const auto config = negotiation_scenario(instance, params.model_id, settings.max_turns);
    auto agents = make_agents(config);
    for (auto& agent : agents) {
      if (const auto log = env.agent_strategies.find(agent.name()); log != env.agent_strategies.end()) {
        agent.adopt_strategy_log(log->second);
      }
      agent.set_self_improve((agent.name() == kBuyerName && coaches_buyer(settings.mode)) ||
                             (agent.name() == kSellerName && coaches_seller(settings.mode)));
    }

    EngineOptions engine;
    engine.params = params;
    env.runs.push_back(run_episode(config, agents, backend, seed, engine, i, events));
    const auto& record = env.runs.back();

    auto outcome = deal_outcome(instance, record);
    const double ub = buyer_utility(instance, outcome);
    const double us = seller_utility(instance, outcome);
    const auto shares = surplus_shares(instance, outcome);
    if (!outcome.deal_reached) ++result.no_deal_count;
    if (!outcome.failed) rows.push_back(OutcomeRow{outcome.deal_reached, ub, us, shares.buyer, shares.seller});
    result.outcomes.push_back(outcome);
    result.buyer_utils.push_back(ub);
    result.seller_utils.push_back(us);
    result.shares.push_back(shares);

    nlohmann::ordered_json data;
    data["index"] = i;
    data["mode"] = std::string(to_string(settings.mode));
    data["ask"] = instance.ask;
    data["floor"] = instance.floor;
    data["budget"] = instance.budget;
    data["deal"] = outcome.deal_reached;
    data["price"] = outcome.price ? nlohmann::ordered_json(*outcome.price) : nlohmann::ordered_json(nullptr);
    data["turns"] = outcome.turns_used;
    data["u_buyer"] = ub;
    data["u_seller"] = us;
    data["failed"] = outcome.failed;
    emit(events, "episode", std::move(data));

    if (record.failed) continue;
    for (auto& agent : agents) {
      if (!agent.self_improve()) continue;
      try {
        coach_strategy(agent, env, backend, coach);
      } catch (const BackendError& e) {
        nlohmann::ordered_json warning;
        warning["agent"] = agent.name();
        warning["episode"] = i;
        warning["message"] = std::string("coaching failed: ") + e.what();
        emit(events, "warning", std::move(warning));
      }
    }
  }

  if (!rows.empty()) result.aggregates = aggregate(rows);
  return result;
}

nlohmann::ordered_json to_json(const ExperimentResult& result) {
  using ojson = nlohmann::ordered_json;
  ojson out;
  out["mode"] = std::string(to_string(result.mode));
  out["max_turns"] = result.max_turns;
  out["seed"] = result.seed;
  out["n"] = result.outcomes.size();
  out["no_deal_count"] = result.no_deal_count;

  ojson negotiations = ojson::array();
  for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
    const auto& o = result.outcomes[i];
    ojson row;
    row["idx"] = i;
    row["ask"] = o.instance.ask;
    row["floor"] = o.instance.floor;
    row["budget"] = o.instance.budget;
    row["deal"] = o.deal_reached;
    row["price"] = o.price ? ojson(*o.price) : ojson(nullptr);
    row["turns"] = o.turns_used;
    row["rational"] = o.rational();
    row["failed"] = o.failed;
    row["u_buyer"] = result.buyer_utils[i];
    row["u_seller"] = result.seller_utils[i];
    row["buyer_ss"] = result.shares[i].buyer;
    row["seller_ss"] = result.shares[i].seller;
    negotiations.push_back(std::move(row));
  }
  out["negotiations"] = std::move(negotiations);

  const auto& m = result.aggregates;
  ojson aggregates;
  aggregates["cum_avg_buyer"] = m.cum_avg_buyer;
  aggregates["cum_avg_seller"] = m.cum_avg_seller;
  aggregates["avg_buyer_ss"] = m.avg_buyer_ss;
  aggregates["avg_seller_ss"] = m.avg_seller_ss;
  aggregates["no_deal_count"] = m.no_deal_count;
  aggregates["unclaimed"] = m.unclaimed_surplus_share;
  out["aggregates"] = std::move(aggregates);

  ojson revisions = ojson::array();
  for (const auto& r : result.environment.revisions) revisions.push_back(to_json(r));
  out["revisions"] = std::move(revisions);
  return out;
}

std::string experiment_csv(const ExperimentResult& result) {
  std::string csv = "idx,ask,floor,budget,deal,price,turns,u_buyer,u_seller,buyer_ss,seller_ss\n";
  for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
    const auto& o = result.outcomes[i];
    csv += std::to_string(i) + "," + text::format_number(o.instance.ask) + "," + text::format_number(o.instance.floor) +
           "," + text::format_number(o.instance.budget) + "," + (o.deal_reached ? "true" : "false") + "," +
           (o.price ? text::format_number(*o.price) : std::string()) + "," + std::to_string(o.turns_used) + "," +
           text::format_number(result.buyer_utils[i]) + "," + text::format_number(result.seller_utils[i]) + "," +
           text::format_number(result.shares[i].buyer) + "," + text::format_number(result.shares[i].seller) + "\n";
  }
  return csv;
}

std::optional<ExperimentBlock> experiment_block_from(const ScenarioConfig& config) {
  const auto it = config.metadata.find("experiment");
  if (it == config.metadata.end()) return std::nullopt;
  const auto& block = *it;
  if (!block.is_object()) throw ConfigError("experiment", "expected object");

  ExperimentBlock out;
  out.modes = {ReflectMode::no_reflect};
  if (const auto v = block.find("mode"); v != block.end()) {
    if (!v->is_string()) throw ConfigError("experiment.mode", "expected string");
    const auto name = v->get<std::string>();
    if (name == "all") {
      out.modes.assign(kAllReflectModes.begin(), kAllReflectModes.end());
    } else if (auto mode = reflect_mode_from(name)) {
      out.modes = {*mode};
    } else {
      throw ConfigError("experiment.mode",
                        "expected one of no_reflect, buyer_reflect, seller_reflect, both_reflect, all");
    }
  }
  auto positive = [&](const char* key, int& target) {
    if (const auto v = block.find(key); v != block.end()) {
      if (!v->is_number_integer() || v->get<long long>() < 1 || v->get<long long>() > 1'000'000) {
        throw ConfigError(std::string("experiment.") + key, "expected positive integer");
      }
      target = v->get<int>();
    }
  };
  positive("n", out.n);
  positive("max_turns", out.max_turns);
  if (out.max_turns < 2) throw ConfigError("experiment.max_turns", "expected an integer >= 2");
  if (const auto v = block.find("seed"); v != block.end()) {
    if (!is_non_negative_integer(*v)) throw ConfigError("experiment.seed", "expected non-negative integer");
    out.seed = v->get<std::uint64_t>();
  }
  if (const auto v = block.find("policy"); v != block.end()) {
    if (!v->is_string() || (*v != "standard" && *v != "slow")) {
      throw ConfigError("experiment.policy", "expected \"standard\" or \"slow\"");
    }
    out.policy = v->get<std::string>();
  }
  return out;
}

}  // namespace ngym
