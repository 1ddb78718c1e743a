#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace ngym::cli;

  CLI::App app{"Multi-agent negotiation simulations with self-improving agents"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "negotiation_gym 0.1.0");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a scenario config and list every violation");
  validate->add_option("config", validate_path, "Scenario config (JSON)")->required();

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario config and write the environment and report");
  run_cmd->add_option("config", run.config, "Scenario config (JSON)")->required();
  run_cmd->add_option("--backend", run.backend, "Model backend")->check(CLI::IsMember({"remote", "scripted"}));
  run_cmd->add_option("--seed", run.seed, "Base seed; overrides rng_seed in the config");
  run_cmd->add_option("--out", run.out, "Output directory");

  ExperimentArgs exp;
  auto* exp_cmd = app.add_subcommand("experiment", "Run the laptop negotiation under one or all reflect modes");
  exp_cmd->add_option("--mode", exp.mode, "Reflect mode")
      ->check(CLI::IsMember({"no_reflect", "buyer_reflect", "seller_reflect", "both_reflect", "all"}));
  exp_cmd->add_option("--n", exp.n, "Negotiations per mode")->check(CLI::Range(1, 100000));
  exp_cmd->add_option("--max-turns", exp.max_turns, "Turn cap per negotiation")->check(CLI::Range(2, 10000));
  exp_cmd->add_option("--seed", exp.seed, "Seed for instance sampling");
  exp_cmd->add_option("--backend", exp.backend, "Model backend")->check(CLI::IsMember({"remote", "scripted"}));
  exp_cmd->add_option("--policy", exp.policy, "Scripted concession schedule")
      ->check(CLI::IsMember({"standard", "slow"}));
  exp_cmd->add_option("--model", exp.model, "Model id for the remote backend");
  exp_cmd->add_option("--out", exp.out, "Output directory");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the job API and run queued jobs");
  serve_cmd->add_option("--addr", serve.addr, "Listen address host:port");
  serve_cmd->add_option("--workers", serve.workers, "Concurrent workers")->check(CLI::Range(1, 64));
  serve_cmd->add_option("--store", serve.store, "Job store directory");
  serve_cmd->add_option("--backend", serve.backend, "Model backend")->check(CLI::IsMember({"remote", "scripted"}));
  serve_cmd->add_option("--lease-seconds", serve.lease_seconds, "Claim lease before a job is re-queued")
      ->check(CLI::Range(1, 7 * 24 * 3600));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*validate) return cmd_validate(validate_path);
  if (*run_cmd) return cmd_run(run);
  if (*exp_cmd) return cmd_experiment(exp);
  if (*serve_cmd) return cmd_serve(serve);
  return kExitUsage;
}
