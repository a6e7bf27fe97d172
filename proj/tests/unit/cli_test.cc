// Copyright 2026 The stvqa Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "stvqa/ingest.hpp"
#include "test_util.h"

namespace stvqa {
namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
  const std::string cmd = std::string(STVQA_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string dir_bytes(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += fs::relative(f, dir).string() + "\n" + test::read_file(f.string());
  return all;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

const char* kSmallConfig =
    "# small run\n"
    "d = 8\n"
    "n_conv = 1\n"
    "max_epochs = 2\n"
    "batch_size = 4\n"
    "seed = 3\n";

TEST(Cli, SynthIsDeterministicAndLoads) {
  const fs::path dir = test::fresh_dir("cli_synth");
  ASSERT_EQ(run_cli("synth --out " + q(dir / "a") + " --n 5 --seed 9 --frames 5 --objects 3"), 0);
  ASSERT_EQ(run_cli("synth --out " + q(dir / "b") + " --n 5 --seed 9 --frames 5 --objects 3"), 0);
  EXPECT_EQ(dir_bytes(dir / "a"), dir_bytes(dir / "b"));
  const LoadResult r = load_dataset_dir((dir / "a").string(), ModelConfig{});
  EXPECT_EQ(r.examples.size(), 5u);
  EXPECT_TRUE(r.rejected.empty());
  for (const QAExample& ex : r.examples) EXPECT_LE(ex.frames.size(), 5u);
}

TEST(Cli, UsageErrorsExitTwo) {
  const fs::path dir = test::fresh_dir("cli_usage");
  EXPECT_EQ(run_cli("synth --out " + q(dir) + " --n 0"), 2);
  EXPECT_EQ(run_cli("synth"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("--help"), 0);
}

class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = test::fresh_dir("cli_pipeline");
    ASSERT_EQ(run_cli("synth --out " + q(root_ / "train") + " --n 6 --seed 1 --frames 4 --objects 3"), 0);
    ASSERT_EQ(run_cli("synth --out " + q(root_ / "val") + " --n 4 --seed 2 --frames 4 --objects 3"), 0);
    write_text(root_ / "small.cfg", kSmallConfig);
  }
  static fs::path root_;
};

fs::path CliPipeline::root_;

TEST_F(CliPipeline, TrainEvalDeterministic) {
  const fs::path& r = root_;
  const std::string train_args = "train --data " + q(r / "train") + " --val " + q(r / "val") + " --config " +
                                 q(r / "small.cfg") + " --out ";
  ASSERT_EQ(run_cli(train_args + q(r / "run1")), 0);
  ASSERT_EQ(run_cli(train_args + q(r / "run2")), 0);
  for (const char* f : {"checkpoint.stgf", "history.jsonl", "val_report.json"}) {
    ASSERT_TRUE(fs::exists(r / "run1" / f)) << f;
    EXPECT_EQ(test::read_file((r / "run1" / f).string()), test::read_file((r / "run2" / f).string())) << f;
  }

  ASSERT_EQ(run_cli("eval --data " + q(r / "val") + " --ckpt " + q(r / "run1" / "checkpoint.stgf") + " --report " +
                    q(r / "eval1.json")),
            0);
  ASSERT_EQ(run_cli("eval --data " + q(r / "val") + " --ckpt " + q(r / "run2" / "checkpoint.stgf") + " --report " +
                    q(r / "eval2.json")),
            0);
  const std::string report = test::read_file((r / "eval1.json").string());
  EXPECT_EQ(report, test::read_file((r / "eval2.json").string()));
  EXPECT_EQ(report, test::read_file((r / "run1" / "val_report.json").string()));
  const auto j = nlohmann::json::parse(report);
  for (const char* key : {"qa_acc", "temp_miou", "asa", "grd_map"}) {
    ASSERT_TRUE(j.contains(key)) << key;
    EXPECT_GE(j[key].get<double>(), 0.0);
    EXPECT_LE(j[key].get<double>(), 1.0);
  }
  EXPECT_TRUE(j.contains("per_question_type"));
}

TEST_F(CliPipeline, MissingConfigExitsTwo) {
  EXPECT_EQ(run_cli("train --data " + q(root_ / "train") + " --val " + q(root_ / "val") + " --config " +
                    q(root_ / "nope.cfg") + " --out " + q(root_ / "nope")),
            2);
  write_text(root_ / "bad.cfg", "d = -4\n");
  EXPECT_EQ(run_cli("train --data " + q(root_ / "train") + " --val " + q(root_ / "val") + " --config " +
                    q(root_ / "bad.cfg") + " --out " + q(root_ / "nope")),
            2);
}

TEST_F(CliPipeline, CorruptCheckpointExitsThree) {
  write_text(root_ / "junk.stgf", "this is not a checkpoint");
  EXPECT_EQ(run_cli("eval --data " + q(root_ / "val") + " --ckpt " + q(root_ / "junk.stgf") + " --report " +
                    q(root_ / "junk.json")),
            3);
  EXPECT_EQ(run_cli("eval --data " + q(root_ / "val") + " --ckpt " + q(root_ / "absent.stgf") + " --report " +
                    q(root_ / "junk.json")),
            3);
}

TEST_F(CliPipeline, StatsBinsSumToTotals) {
  ASSERT_EQ(run_cli("stats --data " + q(root_ / "train") + " --out " + q(root_ / "stats.json")), 0);
  const auto j = nlohmann::json::parse(test::read_file((root_ / "stats.json").string()));
  const int boxes = j["num_boxes"].get<int>();
  EXPECT_GT(boxes, 0);
  int area = 0, spans = 0, cats = 0;
  for (const auto& c : j["box_area_ratio"]["counts"]) area += c.get<int>();
  for (const auto& c : j["span_length_sec"]["counts"]) spans += c.get<int>();
  for (const auto& [k, v] : j["boxes_per_category"].items()) cats += v.get<int>();
  EXPECT_EQ(area, boxes);
  EXPECT_EQ(cats, boxes);
  EXPECT_EQ(spans, j["num_questions"].get<int>());
  EXPECT_EQ(j["num_questions"].get<int>(), 6);
}

TEST(Cli, StatsOnEmptyDataset) {
  const fs::path dir = test::fresh_dir("cli_empty");
  fs::create_directories(dir / "features");
  write_text(dir / "annotations.jsonl", "");
  const int code = run_cli("stats --data " + q(dir) + " --out " + q(dir / "stats.json"));
  ASSERT_EQ(code, 0);
  const auto j = nlohmann::json::parse(test::read_file((dir / "stats.json").string()));
  EXPECT_EQ(j["num_questions"], 0);
  EXPECT_EQ(j["num_boxes"], 0);
  for (const auto& c : j["box_area_ratio"]["counts"]) EXPECT_EQ(c, 0);
  for (const auto& c : j["span_length_sec"]["counts"]) EXPECT_EQ(c, 0);
}

TEST(Cli, MissingDatasetExitsThree) {
  const fs::path dir = test::fresh_dir("cli_nodata");
  EXPECT_EQ(run_cli("stats --data " + q(dir / "absent") + " --out " + q(dir / "s.json")), 3);
}

}  // namespace
}  // namespace stvqa
