// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <ngym/engine.hpp>
#include <ngym/negotiation.hpp>
#include <ngym/remote_backend.hpp>
#include <ngym/scripted_negotiation.hpp>
#include <ngym/service.hpp>

#include "test_support.hpp"

namespace {

using namespace ngym;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

constexpr double kShareTolerance = 1e-9;
constexpr double kCurveTolerance = 1e-12;

/// A failed check; the message becomes the FAIL line's detail.
struct Failure {
  std::string message;
};

void check(bool condition, const std::string& message) {
  if (!condition) throw Failure{message};
}

std::string scientific(double value) {
  std::ostringstream out;
  out << std::scientific << std::setprecision(2) << value;
  return out.str();
}

struct Outcome {
  bool skipped = false;
  std::string note;
};

struct Criterion {
  std::string name;
  std::chrono::milliseconds budget;
  std::function<Outcome()> body;
};

// Zero-sum identity ----------------------------------------------------------

Outcome zero_sum_identity() {
  NegotiationRng rng(20240601);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto instance = sample_instance(rng);
    std::uniform_real_distribution<double> price(instance.floor, instance.ask);
    for (int k = 0; k < 10; ++k) {
      DealOutcome outcome;
      outcome.deal_reached = true;
      outcome.price = price(rng);
      outcome.instance = instance;
      const auto s = surplus_shares(instance, outcome);
      worst = std::max(worst, std::fabs(s.buyer + s.seller - 1.0));
    }
  }
  check(worst <= kShareTolerance, "max |buyer_ss + seller_ss - 1| = " + scientific(worst));
  return {false, "10000 prices, max deviation " + scientific(worst)};
}

// Sampler box ----------------------------------------------------------------

Outcome sampler_box() {
  NegotiationRng rng(42);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto s = sample_instance(rng);
    check(900 <= s.ask && s.ask <= 1400, "ask out of range");
    check(s.ask - 300 <= s.floor && s.floor <= s.ask - 100, "floor out of range");
    check(s.floor + 50 <= s.budget && s.budget <= s.ask - 50, "budget out of range");
    sum += s.ask;
  }
  const double mean = sum / 10000.0;
  check(1140 <= mean && mean <= 1160, "mean ask " + std::to_string(mean) + " outside [1140, 1160]");
  return {false, "mean ask " + std::to_string(mean)};
}

// Oracle equivalence ---------------------------------------------------------

// Closed form for the scripted schedule on (1200, 1000, 1100): the buyer offers
// 880, 935, 990, 1045 and then stays at 1099; the seller demands
// 1200 - 10(k - 1) on its k-th turn and first accepts at k = 12 (1090 <= 1099).
constexpr int kOracleTurns = 24;
constexpr double kOraclePrice = 1099;

Outcome oracle_equivalence() {
  const NegotiationInstance instance{1200, 1000, 1100, 0};
  const auto config = negotiation_scenario(instance, "scripted", 40);
  const auto agents = make_agents(config);
  auto backend = make_negotiation_backend();
  const auto first = run_episode(config, agents, *backend, 1);
  const auto outcome = deal_outcome(instance, first);
  check(outcome.deal_reached, "no deal");
  check(outcome.turns_used == kOracleTurns, "turns " + std::to_string(outcome.turns_used));
  check(outcome.price == kOraclePrice, "price " + std::to_string(outcome.price.value_or(-1)));

  Environment a;
  a.runs.push_back(first);
  Environment b;
  b.runs.push_back(run_episode(config, agents, *backend, 1));
  check(serialize_environment(a) == serialize_environment(b), "rerun is not byte-identical");
  return {false, "deal at turn 24, price 1099"};
}

// Turn-cap economics ---------------------------------------------------------

ExperimentSettings slow_settings(int max_turns) {
  ExperimentSettings s;
  s.mode = ReflectMode::no_reflect;
  s.n = 20;
  s.max_turns = max_turns;
  s.seed = 7;
  return s;
}

Outcome turn_cap_economics() {
  auto backend = make_negotiation_backend(ConcessionSchedule::slow());
  const auto roomy = run_experiment(slow_settings(20), *backend);
  check(roomy.no_deal_count == 0, "deals missing under 20 turns");
  for (const auto& o : roomy.outcomes) check(o.turns_used == 14, "crossing at turn " + std::to_string(o.turns_used));

  const auto tight = run_experiment(slow_settings(10), *backend);
  check(tight.no_deal_count == 20, "expected 20 no-deals under 10 turns");
  for (std::size_t i = 0; i < tight.outcomes.size(); ++i) {
    check(tight.buyer_utils[i] == 0.0 && tight.seller_utils[i] == 0.0, "nonzero utility on a no-deal");
    check(tight.shares[i] == SurplusShares{}, "nonzero share on a no-deal");
  }
  check(tight.aggregates.unclaimed_surplus_share == 1.0, "unclaimed surplus share below 1");
  return {false, "20/20 deals at turn 14 under cap 20, 20/20 no-deals under cap 10"};
}

// Optimization loop ----------------------------------------------------------

class FailingBackend : public ModelBackend {
 public:
  std::string name() const override { return "failing"; }

 protected:
  ChatMessage do_complete(std::span<const ChatMessage>, const CompletionParams&) override {
    throw TimeoutError("injected timeout", 0);
  }
};

Outcome optimization_loop() {
  auto config = parse_config(testing::bike_config_text());
  config.num_runs = 5;
  auto agents = make_agents(config);
  auto backend = make_negotiation_backend();
  auto env = run_simulation(config, agents, *backend, engine_options_from(config));

  const auto& buyer = agents[0];
  const auto& log = buyer.strategy_log();
  check(log.size() == 5, "strategy log has " + std::to_string(log.size()) + " entries");
  check(std::set<std::string>(log.begin(), log.end()).size() == 5, "strategies are not unique");
  const auto& prompt = buyer.system_prompt();
  check(prompt.starts_with(config.agents[0].prompt), "prompt lost its base");
  std::size_t cursor = config.agents[0].prompt.size();
  for (const auto& s : log) {
    const auto at = prompt.find(s, cursor);
    check(at != std::string::npos, "strategy missing or out of order: " + s);
    cursor = at + s.size();
  }
  check(agents[1].system_prompt() == config.agents[1].prompt, "seller prompt changed");

  const auto before = buyer.system_prompt();
  FailingBackend failing;
  FeedbackOptions options;
  bool threw = false;
  try {
    learn_from_feedback(agents[0], env, failing, options);
  } catch (const BackendError&) {
    threw = true;
  }
  check(threw, "injected failure did not surface");
  check(agents[0].system_prompt() == before && agents[0].strategy_log().size() == 5, "failed revision changed the prompt");
  return {false, "5 unique strategies appended in order; failed revision left the prompt intact"};
}

// Four-mode harness ----------------------------------------------------------

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream fields(line);
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (line.ends_with(",")) cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

Outcome four_mode_harness() {
  testing::TempDir dir("ngym-accept");
  const auto run = testing::run_cli("experiment --mode all --n 20 --max-turns 20 --backend scripted --out '" +
                                    dir.path().string() + "'");
  check(run.exit_code == 0, "exit code " + std::to_string(run.exit_code) + ": " + run.output);
  const auto report = nlohmann::json::parse(testing::read_file(dir / "report.json"));
  check(report["modes"].size() == 4, "report has " + std::to_string(report["modes"].size()) + " bundles");

  for (const auto mode : kAllReflectModes) {
    const std::string name(to_string(mode));
    const auto& bundle = report["modes"][name];
    const double sum = bundle["avg_buyer_ss"].get<double>() + bundle["avg_seller_ss"].get<double>();
    check(sum <= 1.0 + kShareTolerance, name + ": share sum " + std::to_string(sum));

    const auto rows = csv_rows(testing::read_file(dir / (name + ".csv")));
    check(rows.size() == 20, name + ": " + std::to_string(rows.size()) + " rows");
    for (const auto& [column, key] : {std::pair{7, "cum_avg_buyer"}, std::pair{8, "cum_avg_seller"}}) {
      const auto curve = bundle[key].get<std::vector<double>>();
      check(curve.size() == 20, name + ": " + key + " has " + std::to_string(curve.size()) + " points");
      long double prefix = 0.0L;
      for (std::size_t t = 0; t < rows.size(); ++t) {
        prefix += std::stold(rows[t][static_cast<std::size_t>(column)]);
        const double expected = static_cast<double>(prefix / static_cast<long double>(t + 1));
        check(std::fabs(curve[t] - expected) <= kCurveTolerance, name + ": " + key + " diverges at " + std::to_string(t));
      }
    }
  }
  return {false, "4 bundles, shares within the frontier, curves match prefix sums"};
}

// Config fidelity ------------------------------------------------------------

Outcome config_fidelity() {
  const auto text = testing::bike_config_text();
  const auto config = parse_config(text);
  check(validate(config).empty(), "violations on the example config");
  const auto again = serialize_config(config);
  check(parse_config(again) == config, "round trip changed the config");
  auto reparsed = nlohmann::json::parse(again);
  reparsed["config"].erase("max_messages");
  check(reparsed == nlohmann::json::parse(text), "round trip lost or altered keys");
  return {false, "zero violations, lossless round trip"};
}

// Service lifecycle ----------------------------------------------------------

std::string bike_document(int runs) {
  auto doc = nlohmann::json::parse(testing::bike_config_text());
  doc["num_runs"] = runs;
  return doc.dump();
}

void lifecycle_over_http() {
  testing::TempDir dir("ngym-accept");
  auto store = std::make_shared<FileQueueStore>(dir.path());
  ServiceOptions options;
  options.workers = 1;
  options.poll_interval = 10ms;
  Orchestrator orchestrator(store, options);
  HttpService http(orchestrator);
  check(http.bind("127.0.0.1", 0), "cannot bind");
  std::thread server([&] { http.listen(); });
  struct Joiner {
    HttpService& http;
    Orchestrator& orchestrator;
    std::thread& server;
    ~Joiner() {
      orchestrator.stop();
      http.stop();
      if (server.joinable()) server.join();
    }
  } joiner{http, orchestrator, server};

  httplib::Client client("127.0.0.1", http.port());
  client.set_read_timeout(30, 0);
  testing::wait_until([&] { return static_cast<bool>(client.Get("/api/schema")); }, 5s);
  auto posted = client.Post("/api/jobs", bike_document(3), "application/json");
  check(posted && posted->status == 201, "submit did not return 201");
  const auto id = nlohmann::json::parse(posted->body)["id"].get<std::string>();
  orchestrator.start();

  auto stream = client.Get(("/api/jobs/" + id + "/events").c_str());
  check(static_cast<bool>(stream), "event stream failed");
  std::vector<std::string> sequence;
  std::uint64_t last_id = 0;
  std::istringstream in(stream->body);
  std::string line;
  std::string event;
  while (std::getline(in, line)) {
    if (line.starts_with("id: ")) {
      const auto seq = std::stoull(line.substr(4));
      check(seq > last_id, "event ids not increasing");
      last_id = seq;
    } else if (line.starts_with("event: ")) {
      event = line.substr(7);
    } else if (line.starts_with("data: ")) {
      const auto data = nlohmann::json::parse(line.substr(6));
      sequence.push_back(event == "status" ? data["status"].get<std::string>() : event);
    }
  }
  std::vector<std::string> lifecycle;
  for (const auto& e : sequence) {
    if (e != "revision" && e != "warning") lifecycle.push_back(e);
  }
  const std::vector<std::string> expected{"queued", "running", "episode", "episode", "episode", "done"};
  check(lifecycle == expected, "lifecycle events out of order");
  auto result = client.Get(("/api/jobs/" + id + "/result").c_str());
  check(result && result->status == 200, "result not available");
}

void exactly_once_claims() {
  testing::TempDir dir("ngym-accept");
  FileQueueStore store(dir.path());
  for (int i = 0; i < 20; ++i) {
    JobRecord job;
    job.id = new_job_id();
    job.submitted_at = iso_timestamp(std::chrono::system_clock::now());
    job.config = nlohmann::ordered_json::object();
    store.enqueue(job);
  }
  std::mutex mutex;
  std::vector<std::string> claimed;
  std::vector<std::thread> workers;
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([&, w] {
      while (auto job = store.claim_next("w" + std::to_string(w), 30s)) {
        std::lock_guard lock(mutex);
        claimed.push_back(job->id);
      }
    });
  }
  for (auto& t : workers) t.join();
  check(claimed.size() == 20 && std::set<std::string>(claimed.begin(), claimed.end()).size() == 20,
        "claims were not exactly once");
}

void lease_recovery() {
  testing::TempDir dir("ngym-accept");
  auto store = std::make_shared<FileQueueStore>(dir.path());
  ServiceOptions options;
  options.workers = 1;
  Orchestrator orchestrator(store, options);
  const auto id = orchestrator.submit(bike_document(2)).job.id;
  check(store->claim_next("killed-worker", 1ms).has_value(), "ghost claim failed");
  std::this_thread::sleep_for(10ms);
  check(orchestrator.reap() == std::vector<std::string>{id}, "expired lease not reaped");
  check(orchestrator.run_next("rescuer"), "re-queued job not claimed");
  const auto job = *store->get(id);
  check(job.status == JobStatus::done, "recovered job did not finish");
  check(job.attempts == 2, "recovered job ran " + std::to_string(job.attempts) + " times");
}

Outcome service_lifecycle() {
  lifecycle_over_http();
  exactly_once_claims();
  lease_recovery();
  return {false, "queued -> running -> 3 episodes -> done; 20/20 unique claims; lease recovery ran once"};
}

// Live smoke -----------------------------------------------------------------

Outcome live_smoke() {
  const char* key = std::getenv("NEGOTIATION_GYM_API_KEY");
  if (key == nullptr || *key == '\0') return {true, "NEGOTIATION_GYM_API_KEY not set"};
  auto config = parse_config(testing::bike_config_text());
  config.num_runs = 2;
  auto agents = make_agents(config);
  auto backend = RemoteBackend::from_environment();
  const auto env = run_simulation(config, agents, *backend, engine_options_from(config));
  check(env.runs.size() == 2, "expected 2 runs");
  bool extracted = false;
  for (const auto& run : env.runs) {
    extracted = extracted || (run.extracted.contains("final_price") && run.extracted.contains("deal_reached"));
  }
  check(extracted, "no run extracted final_price and deal_reached");
  return {false, "2 live runs completed"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"zero-sum identity", 1000ms, zero_sum_identity},
      {"sampler box", 1000ms, sampler_box},
      {"oracle equivalence", 1000ms, oracle_equivalence},
      {"turn-cap economics", 1000ms, turn_cap_economics},
      {"optimization-loop contract", 1000ms, optimization_loop},
      {"four-mode harness", 10000ms, four_mode_harness},
      {"config fidelity", 1000ms, config_fidelity},
      {"service lifecycle", 30000ms, service_lifecycle},
      {"live smoke", 600000ms, live_smoke},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    std::string verdict;
    std::string detail;
    try {
      const auto outcome = c.body();
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
      if (outcome.skipped) {
        verdict = "SKIP";
      } else if (elapsed > c.budget) {
        verdict = "FAIL";
      } else {
        verdict = "PASS";
      }
      detail = outcome.note;
    } catch (const Failure& f) {
      verdict = "FAIL";
      detail = f.message;
    } catch (const std::exception& e) {
      verdict = "FAIL";
      detail = std::string("exception: ") + e.what();
    }
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
    if (verdict == "FAIL") ++failures;
    std::cout << verdict << "  " << c.name << "  (" << elapsed.count() << " ms, limit " << c.budget.count()
              << " ms)  " << detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
