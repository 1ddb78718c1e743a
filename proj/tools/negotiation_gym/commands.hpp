#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ngym::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct RunArgs {
  std::filesystem::path config;
  std::string backend = "scripted";
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "out";
};

struct ExperimentArgs {
  std::string mode = "all";
  int n = 20;
  int max_turns = 20;
  std::uint64_t seed = 0;
  std::string backend = "scripted";
  std::string policy = "standard";
  std::string model = "gpt-4o";
  std::filesystem::path out = "out";
};

struct ServeArgs {
  std::string addr = "127.0.0.1:8080";
  int workers = 2;
  std::filesystem::path store = "ngym-store";
  std::string backend = "scripted";
  int lease_seconds = 30 * 60;
};

int cmd_validate(const std::filesystem::path& config);
int cmd_run(const RunArgs& args);
int cmd_experiment(const ExperimentArgs& args);
int cmd_serve(const ServeArgs& args);

/// "host:port" with a numeric port in [0, 65535].
bool split_address(const std::string& addr, std::string& host, int& port);

}  // namespace ngym::cli
