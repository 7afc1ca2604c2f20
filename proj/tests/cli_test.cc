// Copyright (c) 2026 The dfmamba Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dfm/cli.h"
#include "dfm/dataset.h"
#include "json.hpp"

namespace dfm {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dfm_cli_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  json read_json(const std::string& name) const { return json::parse(std::ifstream(dir_ / name)); }

  fs::path dir_;
};

TEST(Nearest, PicksClosestWithinThreeEdits) {
  const std::vector<std::string> flags{"--arch", "--anchors", "--seed", "--preset"};
  EXPECT_EQ(nearest("--ach", flags), "--arch");
  EXPECT_EQ(nearest("--sed", flags), "--seed");
  EXPECT_EQ(nearest("--completely-different", flags), "");
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, kExitUsage);
  const auto typo = run({"inspect", "--ach", "CCDGDG"});
  EXPECT_EQ(typo.code, kExitUsage);
  EXPECT_NE(typo.err.find("did you mean '--arch'"), std::string::npos) << typo.err;
  const auto sub = run({"bnech"});
  EXPECT_EQ(sub.code, kExitUsage);
  EXPECT_NE(sub.err.find("did you mean 'bench'"), std::string::npos) << sub.err;
  const auto arch = run({"inspect", "--arch", "CCXGDG"});
  EXPECT_EQ(arch.code, kExitUsage);
  EXPECT_NE(arch.err.find("at index 2"), std::string::npos) << arch.err;
  EXPECT_EQ(run({"inspect", "--anchors", "4"}).code, kExitUsage);
  EXPECT_EQ(run({"gen"}).code, kExitUsage);
}

TEST_F(CliTest, RuntimeErrorsExitOne) {
  const auto r = run({"eval", "--ckpt", path("missing.ckpt"), "--data", path("nowhere")});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, InspectPrintsShapesAndWritesReport) {
  const auto r = run({"inspect", "--input", "128", "--report", path("inspect.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("stage=1 kind=C depth=3 shape=[80,32,32]"), std::string::npos) << r.out;
  const auto j = read_json("inspect.json");
  EXPECT_EQ(j["tool"], "dfmamba");
  EXPECT_EQ(j["version"], kToolVersion);
  EXPECT_EQ(j["command"], "inspect");
  EXPECT_EQ(j["seed"], 0);
  EXPECT_EQ(j["metrics"]["stages"].size(), 6u);
  EXPECT_TRUE(j["ok"].get<bool>());
}

TEST_F(CliTest, ConfigFileSuppliesDefaults) {
  std::ofstream(path("run.toml")) << "arch = \"CCGGGG\"\npreset = \"tiny\"\n";
  const auto r = run({"inspect", "--config", path("run.toml"), "--input", "64", "--report",
                      path("inspect.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = read_json("inspect.json");
  EXPECT_EQ(j["config"]["arch"], "CCGGGG");
  EXPECT_EQ(j["config"]["preset"], "tiny");
  // The command line wins over the file.
  const auto o = run({"inspect", "--config", path("run.toml"), "--arch", "DDDDDD", "--input",
                      "64", "--report", path("inspect2.json")});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  EXPECT_EQ(read_json("inspect2.json")["config"]["arch"], "DDDDDD");
  // Unknown keys are usage errors with a suggestion.
  std::ofstream(path("bad.toml")) << "arhc = \"CCGGGG\"\n";
  const auto bad = run({"inspect", "--config", path("bad.toml")});
  EXPECT_EQ(bad.code, kExitUsage);
  EXPECT_NE(bad.err.find("did you mean '--arch'"), std::string::npos) << bad.err;
  EXPECT_EQ(run({"inspect", "--config", path("absent.toml")}).code, kExitUsage);
}

TEST_F(CliTest, TrainConfigFileAcceptsUnderscoresAndBooleans) {
  ASSERT_EQ(run({"gen", "--count", "4", "--size", "64", "--out", path("data")}).code, kExitOk);
  std::ofstream(path("train.toml")) << "arch = \"CCDGDG\"\nepochs = 1\ntrain_count = 3\n"
                                       "head_width = 8\nbatch = 3\nfreeze_offsets = true\n";
  const auto t = run({"train", "--config", path("train.toml"), "--data", path("data"), "--out",
                      path("run")});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  const auto j = read_json("run/train_report.json");
  EXPECT_EQ(j["config"]["train_count"], 3);
  EXPECT_EQ(j["config"]["head_width"], 8);
  EXPECT_TRUE(j["config"]["freeze_offsets"].get<bool>());
}

TEST_F(CliTest, GenIsReproducible) {
  ASSERT_EQ(run({"gen", "--count", "3", "--seed", "5", "--size", "64", "--out", path("a")}).code,
            kExitOk);
  ASSERT_EQ(run({"gen", "--count", "3", "--seed", "5", "--size", "64", "--out", path("b")}).code,
            kExitOk);
  for (const char* file : {"images.bin", "joints.bin", "manifest"}) {
    std::ifstream fa(dir_ / "a" / file, std::ios::binary), fb(dir_ / "b" / file, std::ios::binary);
    const std::string a((std::istreambuf_iterator<char>(fa)), {});
    const std::string b((std::istreambuf_iterator<char>(fb)), {});
    EXPECT_EQ(a, b) << file;
  }
  EXPECT_EQ(read_dataset(path("a")).size(), 3u);
  const auto j = read_json("a/gen_report.json");
  EXPECT_EQ(j["command"], "gen");
  EXPECT_EQ(j["seed"], 5);
}

TEST_F(CliTest, TrainThenEvalReproducesCheckpointMetric) {
  ASSERT_EQ(run({"gen", "--count", "8", "--size", "64", "--out", path("data")}).code, kExitOk);
  const auto t = run({"train", "--data", path("data"), "--out", path("run"), "--epochs", "1",
                      "--train-count", "6", "--batch", "3", "--head-width", "8"});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  EXPECT_NE(t.out.find("epoch=1 "), std::string::npos) << t.out;
  EXPECT_TRUE(fs::exists(dir_ / "run" / "best.ckpt"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "last.ckpt"));
  const auto tj = read_json("run/train_report.json");
  EXPECT_EQ(tj["metrics"]["history"].size(), 1u);
  EXPECT_EQ(tj["config"]["train_count"], 6);

  const auto e = run({"eval", "--ckpt", path("run/best.ckpt"), "--data", path("data"),
                      "--report", path("eval.json")});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_NE(e.out.find("reproduces=1"), std::string::npos) << e.out;
  const auto ej = read_json("eval.json");
  EXPECT_EQ(ej["metrics"]["samples"], 2);
  EXPECT_TRUE(ej["flags"]["reproduces_checkpoint_mpjpe"].get<bool>());
  EXPECT_EQ(ej["metrics"]["mpjpe"].get<double>(), ej["metrics"]["checkpoint_mpjpe"].get<double>());
}

TEST_F(CliTest, BenchReportsThroughput) {
  const auto r = run({"bench", "--preset", "tiny", "--input", "64", "--iters", "2", "--report",
                      path("bench.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = read_json("bench.json");
  EXPECT_GT(j["metrics"]["ms_per_iter"].get<double>(), 0.0);
  EXPECT_GT(j["metrics"]["params"].get<std::int64_t>(), 0);
  EXPECT_TRUE(j["flags"]["finite_outputs"].get<bool>());
}

TEST_F(CliTest, GradcheckPassesOnTinyPreset) {
  const auto r = run({"gradcheck", "--preset", "tiny", "--report", path("grad.json")});
  EXPECT_EQ(r.code, kExitOk) << r.out << r.err;
  const auto j = read_json("grad.json");
  EXPECT_TRUE(j["ok"].get<bool>());
  EXPECT_GT(j["metrics"].size(), 20u);
}

TEST_F(CliTest, ToolBinaryUsesTheSameExitCodes) {
  const std::string tool = DFM_TOOL_PATH;
  auto status = [&](const std::string& args) {
    const int raw = std::system((tool + " " + args + " > " + path("out.txt") + " 2>&1").c_str());
    return WEXITSTATUS(raw);
  };
  EXPECT_EQ(status("--version"), 0);
  EXPECT_EQ(status("inspect --preset tiny --input 64"), 0);
  EXPECT_EQ(status("inspect --bogus"), 2);
  EXPECT_EQ(status("eval --ckpt " + path("nothing") + " --data " + path("nothing")), 1);
}

}  // namespace
}  // namespace dfm
