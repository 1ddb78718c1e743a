#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include <ngym/config.hpp>
#include <ngym/engine.hpp>
#include <ngym/metrics.hpp>
#include <ngym/negotiation.hpp>
#include <ngym/scripted_negotiation.hpp>
#include <ngym/text.hpp>

namespace {

void BM_SampleInstance(benchmark::State& state) {
  ngym::NegotiationRng rng(42);
  for (auto _ : state) benchmark::DoNotOptimize(ngym::sample_instance(rng));
}
BENCHMARK(BM_SampleInstance);

void BM_CumulativeAverage(benchmark::State& state) {
  std::vector<double> series(static_cast<std::size_t>(state.range(0)));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& x : series) x = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(ngym::cumulative_average(series));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CumulativeAverage)->Range(16, 1 << 14);

void BM_ScriptedNegotiation(benchmark::State& state) {
  const ngym::NegotiationInstance instance{1200, 1000, 1100, 0};
  const auto config = ngym::negotiation_scenario(instance, "scripted", 40);
  const auto agents = ngym::make_agents(config);
  auto backend = ngym::make_negotiation_backend();
  for (auto _ : state) benchmark::DoNotOptimize(ngym::run_episode(config, agents, *backend, 7));
}
BENCHMARK(BM_ScriptedNegotiation);

void BM_ScriptedExperiment(benchmark::State& state) {
  auto backend = ngym::make_negotiation_backend();
  ngym::ExperimentSettings settings;
  settings.mode = ngym::ReflectMode::both_reflect;
  settings.n = 20;
  for (auto _ : state) benchmark::DoNotOptimize(ngym::run_experiment(settings, *backend));
}
BENCHMARK(BM_ScriptedExperiment)->Unit(benchmark::kMillisecond);

void BM_ParseConfig(benchmark::State& state) {
  const ngym::NegotiationInstance instance{1200, 1000, 1100, 0};
  const auto text = ngym::serialize_config(ngym::negotiation_scenario(instance, "gpt-4o", 20));
  for (auto _ : state) benchmark::DoNotOptimize(ngym::parse_config(text));
}
BENCHMARK(BM_ParseConfig);

void BM_MentionsNumber(benchmark::State& state) {
  const std::string message = "I could stretch to 1,045 USD if you include the charger, but not 1100.";
  for (auto _ : state) benchmark::DoNotOptimize(ngym::text::mentions_number(message, 1100));
}
BENCHMARK(BM_MentionsNumber);

}  // namespace
BENCHMARK_MAIN();
