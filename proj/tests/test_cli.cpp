#include "support.hpp"

#include <httplib.h>

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>
#include <unistd.h>

namespace aact {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("aact_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const auto r = run("train --data " + data("ames.csv") + " --out " + path("model.json"));
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string data(const char* name) { return (testing::data_dir() / name).string(); }
  static std::string path(const char* name) { return (dir_ / name).string(); }

  static CliResult run(const std::string& args) {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = std::string(AACT_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = testing::read_file(out);
    r.err = testing::read_file(err);
    return r;
  }

  static inline fs::path dir_;
};

TEST_F(Cli, TrainHeaderAndMetrics) {
  const auto r = run("train --data " + data("ames.csv") + " --out " + path("m2.json") + " --format csv");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("# aact train epsilon=0.04 k=1 L=5000 seed=0", 0), 0u) << r.out;
  EXPECT_NE(r.out.find("0.8737"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("0.7948"), std::string::npos) << r.out;
}

TEST_F(Cli, EvaluateReportsHeldOutMetrics) {
  const auto r = run("evaluate --model " + path("model.json") + " --data " + data("ames.csv") + " --format json");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("# aact evaluate epsilon=0.04 k=1 L=5000 seed=0", 0), 0u);
  EXPECT_NE(r.out.find("0.8737"), std::string::npos) << r.out;
}

TEST_F(Cli, AnalyzeWritesOneCritiquePerRecord) {
  {
    std::ofstream rec(path("records.jsonl"));
    // ids from the held-out split
    rec << R"({"task_id": "2217", "decision": "Low", "argument": ["living_area"]})" << '\n';
    rec << R"({"task_id": "837", "decision": "High", "argument": []})" << '\n';
  }
  const auto r = run("analyze --model " + path("model.json") + " --data " + data("ames.csv") + " --records " +
                     path("records.jsonl") + " --epsilon 0.05 -L 1000");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("# aact analyze epsilon=0.05 k=1 L=1000 seed=0", 0), 0u) << line;
  std::size_t critiques = 0;
  while (std::getline(lines, line)) {
    const auto doc = nlohmann::json::parse(line);
    EXPECT_TRUE(doc.contains("incompleteness"));
    ++critiques;
  }
  EXPECT_EQ(critiques, 2u);
}

TEST_F(Cli, ValidationErrorsExitOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("train --bogus").code, 1);
  EXPECT_EQ(run("evaluate --model " + path("absent.json") + " --data " + data("ames.csv")).code, 1);
  EXPECT_EQ(run("analyze --model " + path("model.json") + " --data " + data("ames.csv") + " --records " +
                path("records.jsonl") + " --epsilon 2")
                .code,
            1);
  EXPECT_EQ(run("analyze --model " + path("model.json") + " --data " + data("ames.csv") + " --records " +
                path("records.jsonl") + " --sampling sideways")
                .code,
            1);
  EXPECT_EQ(run("simulate --model " + path("model.json") + " --data " + data("ames.csv") + " --policy maybe").code, 1);
}

TEST_F(Cli, RuntimeFailureExitsTwo) {
  httplib::Server blocker;
  const int port = blocker.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  const auto r = run("serve --model " + path("model.json") + " --data " + data("ames.csv") + " --port " +
                     std::to_string(port));
  EXPECT_EQ(r.code, 2) << r.err;
}

TEST_F(Cli, SimulateThenScore) {
  const auto out = path("sim");
  const auto r = run("simulate --model " + path("model.json") + " --data " + data("ames.csv") +
                     " --policy always_adopt --participants 1 --out " + out + " -L 500");
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(out)) ++files;
  EXPECT_EQ(files, 20u);
  const auto s = run("score --transcripts " + out + " --format csv");
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_NE(s.out.find("ALL"), std::string::npos) << s.out;
  EXPECT_NE(s.out.find("p001"), std::string::npos);
}

}  // namespace
}  // namespace aact
