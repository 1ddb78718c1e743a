#include <gtest/gtest.h>
#include <httplib.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fcntl.h>

#include <regex>

#include <nlohmann/json.hpp>

#include "test_support.hpp"

namespace ngym {
namespace {

using namespace std::chrono_literals;
using testing::run_cli;

std::string quoted(const std::filesystem::path& path) { return "'" + path.string() + "'"; }

std::filesystem::path write_config(const testing::TempDir& dir, const nlohmann::json& doc,
                                   const std::string& name = "config.json") {
  const auto path = dir / name;
  testing::write_file(path, doc.dump(2));
  return path;
}

nlohmann::json bike(int runs) {
  auto doc = nlohmann::json::parse(testing::bike_config_text());
  doc["num_runs"] = runs;
  return doc;
}

TEST(Cli, ValidateExitCodes) {
  testing::TempDir dir;
  EXPECT_EQ(run_cli("validate " + quoted(testing::fixture_path("bike_config.json"))).exit_code, 0);

  auto invalid = bike(1);
  invalid["config"]["agents"] = nlohmann::json::array();
  invalid["num_runs"] = 0;
  const auto bad = run_cli("validate " + quoted(write_config(dir, invalid)));
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_NE(bad.output.find("agents:"), std::string::npos);
  EXPECT_NE(bad.output.find("num_runs"), std::string::npos);

  EXPECT_EQ(run_cli("validate " + quoted(dir / "missing.json")).exit_code, 2);
  EXPECT_EQ(run_cli("validate").exit_code, 2);
  EXPECT_EQ(run_cli("frobnicate").exit_code, 2);
}

TEST(Cli, RunIsReproducibleUnderASeed) {
  testing::TempDir dir;
  const auto config = write_config(dir, bike(10));
  const auto a = run_cli("run " + quoted(config) + " --seed 7 --out " + quoted(dir / "a"));
  const auto b = run_cli("run " + quoted(config) + " --seed 7 --out " + quoted(dir / "b"));
  ASSERT_EQ(a.exit_code, 0) << a.output;
  ASSERT_EQ(b.exit_code, 0) << b.output;
  const auto env_a = testing::read_file(dir / "a" / "environment.json");
  EXPECT_EQ(env_a, testing::read_file(dir / "b" / "environment.json"));
  EXPECT_EQ(testing::read_file(dir / "a" / "report.json"), testing::read_file(dir / "b" / "report.json"));
  EXPECT_EQ(nlohmann::json::parse(env_a)["runs"].size(), 10u);
}

TEST(Cli, RemoteBackendWithoutKeyIsAUsageError) {
  testing::TempDir dir;
  const auto config = write_config(dir, bike(1));
  const auto result = run_cli("run " + quoted(config) + " --backend remote --out " + quoted(dir / "o"),
                              "env -u NEGOTIATION_GYM_API_KEY");
  EXPECT_EQ(result.exit_code, 2) << result.output;
  EXPECT_NE(result.output.find("NEGOTIATION_GYM_API_KEY"), std::string::npos);
}

TEST(Cli, ExperimentAllWritesFourBundles) {
  testing::TempDir dir;
  const auto result = run_cli("experiment --mode all --n 20 --seed 3 --out " + quoted(dir.path()));
  ASSERT_EQ(result.exit_code, 0) << result.output;
  const auto report = nlohmann::json::parse(testing::read_file(dir / "report.json"));
  ASSERT_EQ(report["modes"].size(), 4u);
  for (const auto& [mode, bundle] : report["modes"].items()) {
    EXPECT_EQ(bundle["cum_avg_buyer"].size(), 20u) << mode;
    EXPECT_LE(bundle["avg_buyer_ss"].get<double>() + bundle["avg_seller_ss"].get<double>(), 1.0 + 1e-9);
    EXPECT_TRUE(std::filesystem::exists(dir / (mode + ".json")));
    EXPECT_TRUE(std::filesystem::exists(dir / (mode + ".csv")));
  }
  const auto csv = testing::read_file(dir / "report.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Cli, SlowPolicyUnderATightCapLeavesNoDeals) {
  testing::TempDir dir;
  const auto result =
      run_cli("experiment --mode no_reflect --n 5 --policy slow --max-turns 10 --out " + quoted(dir.path()));
  ASSERT_EQ(result.exit_code, 0) << result.output;
  const auto report = nlohmann::json::parse(testing::read_file(dir / "report.json"));
  EXPECT_EQ(report["modes"]["no_reflect"]["no_deal_count"], 5);
}

TEST(Cli, ExperimentRejectsBadArguments) {
  EXPECT_EQ(run_cli("experiment --mode sideways").exit_code, 2);
  EXPECT_EQ(run_cli("experiment --max-turns 1").exit_code, 2);
  EXPECT_EQ(run_cli("experiment --n 0").exit_code, 2);
  EXPECT_EQ(run_cli("experiment --policy lazy").exit_code, 2);
}

TEST(Cli, ServeRejectsABadAddress) {
  testing::TempDir dir;
  EXPECT_EQ(run_cli("serve --addr nonsense --store " + quoted(dir / "s")).exit_code, 2);
  EXPECT_EQ(run_cli("serve --addr 127.0.0.1:99999 --store " + quoted(dir / "s")).exit_code, 2);
}

class ServeProcess {
 public:
  ServeProcess(const std::filesystem::path& store, const std::filesystem::path& log) {
    pid_ = ::fork();
    if (pid_ == 0) {
      const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      ::dup2(fd, STDOUT_FILENO);
      ::dup2(fd, STDERR_FILENO);
      ::execl(NGYM_CLI_PATH, NGYM_CLI_PATH, "serve", "--addr", "127.0.0.1:0", "--workers", "1", "--store",
              store.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
  }
  ~ServeProcess() {
    if (pid_ > 0 && !reaped_) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
  }

  int interrupt_and_wait() {
    ::kill(pid_, SIGINT);
    int status = 0;
    for (int i = 0; i < 500; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        reaped_ = true;
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
      }
      std::this_thread::sleep_for(20ms);
    }
    return -1;
  }

 private:
  pid_t pid_ = -1;
  bool reaped_ = false;
};

TEST(Cli, ServeAcceptsJobsAndDrainsOnInterrupt) {
  testing::TempDir dir;
  const auto log = dir / "serve.log";
  ServeProcess process(dir / "store", log);

  int port = 0;
  const std::regex listening(R"(listening on 127\.0\.0\.1:(\d+))");
  ASSERT_TRUE(testing::wait_until(
      [&] {
        std::smatch m;
        const auto text = std::filesystem::exists(log) ? testing::read_file(log) : std::string();
        if (!std::regex_search(text, m, listening)) return false;
        port = std::stoi(m[1]);
        return true;
      },
      10s));

  httplib::Client client("127.0.0.1", port);
  auto res = client.Post("/api/jobs", bike(2).dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  const auto id = nlohmann::json::parse(res->body)["id"].get<std::string>();
  ASSERT_TRUE(testing::wait_until(
      [&] {
        auto job = client.Get(("/api/jobs/" + id).c_str());
        return job && nlohmann::json::parse(job->body)["status"] == "done";
      },
      20s));

  EXPECT_EQ(process.interrupt_and_wait(), 0);
  EXPECT_NE(testing::read_file(log).find("stopped"), std::string::npos);
}

}  // namespace
}  // namespace ngym
