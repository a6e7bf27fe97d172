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

// stvqa command-line tool: synth, train, eval, stats.
//
// Exit codes: 0 ok, 2 usage or config, 3 data or checkpoint corruption,
// 4 internal invariant violation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "stvqa/core_types.hpp"
#include "stvqa/errors.hpp"
#include "stvqa/ingest.hpp"
#include "stvqa/metrics.hpp"
#include "stvqa/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw stvqa::LoadError("cannot write '" + path.string() + "'");
  out << text;
}

std::vector<stvqa::QAExample> load_or_fail(const std::string& dir, const stvqa::ModelConfig* cfg) {
  stvqa::LoadResult r = cfg ? stvqa::load_dataset_dir(dir, *cfg) : stvqa::load_dataset_dir(dir);
  for (const auto& rej : r.rejected) {
    for (const auto& v : rej.violations) std::cerr << "rejected " << rej.qid << ": " << v << "\n";
  }
  if (!r.rejected.empty()) {
    std::cerr << r.rejected.size() << " of " << (r.rejected.size() + r.examples.size()) << " examples rejected in "
              << dir << "\n";
  }
  return std::move(r.examples);
}

void print_report(const stvqa::EvalReport& r) {
  std::printf("questions        %zu\n", r.per_question.size());
  std::printf("QA Acc.          %.4f\n", r.qa_acc);
  std::printf("Temp. mIoU       %.4f\n", r.temp_miou);
  std::printf("ASA              %.4f\n", r.asa);
  std::printf("Grd. mAP         %.4f\n", r.grd_map);
  std::printf("Att. precision   %.4f\n", r.attention_precision);
  if (!r.per_question_type.empty()) {
    std::printf("%-12s %6s %8s\n", "type", "count", "acc");
    for (const auto& [type, acc] : r.per_question_type) std::printf("%-12s %6d %8.4f\n", type.c_str(), acc.count, acc.accuracy);
  }
}

struct SynthArgs {
  std::string out;
  int n = 16;
  uint64_t seed = 0;
  int frames = 0;
  int objects = 0;
};

int run_synth(const SynthArgs& a) {
  if (a.n < 1) throw UsageError("--n must be at least 1");
  stvqa::SynthSpec spec;
  spec.n_examples = a.n;
  if (a.frames > 0) {
    spec.max_frames = a.frames;
    spec.min_frames = std::min(spec.min_frames, a.frames);
  }
  if (a.objects > 0) {
    spec.max_objects = a.objects;
    spec.min_objects = std::min(spec.min_objects, a.objects);
  }
  const auto problems = stvqa::validate_synth_spec(spec);
  if (!problems.empty()) throw UsageError(problems.front());
  const auto examples = stvqa::generate_synthetic_dataset(spec, a.seed);
  stvqa::write_dataset(a.out, examples);
  std::printf("wrote %zu examples to %s\n", examples.size(), a.out.c_str());
  return kExitOk;
}

struct TrainArgs {
  std::string data, val, config, out;
};

int run_train(const TrainArgs& a) {
  if (!fs::exists(a.config)) throw stvqa::ConfigError("config file '" + a.config + "' does not exist");
  const stvqa::ModelConfig cfg = stvqa::load_config_file(a.config);
  const auto train_set = load_or_fail(a.data, &cfg);
  const auto val_set = load_or_fail(a.val, &cfg);
  if (train_set.empty() || val_set.empty()) throw stvqa::LoadError("no usable examples to train on");

  stvqa::TrainOptions options;
  options.on_epoch = [](const stvqa::EpochRecord& r) {
    std::printf("epoch %3d  loss %.4f  val_acc %.4f  val_miou %.4f\n", r.epoch, r.train_loss.total, r.val_qa_acc,
                r.val_temp_miou);
    std::fflush(stdout);
    return true;
  };
  const stvqa::TrainResult result = stvqa::train(train_set, val_set, cfg, options);

  const fs::path out(a.out);
  fs::create_directories(out);
  stvqa::save_checkpoint(result.best_params, cfg, (out / "checkpoint.stgf").string());
  write_file(out / "history.jsonl", stvqa::history_to_jsonl(result.history));
  const stvqa::EvalReport report = stvqa::evaluate(val_set, result.best_params, cfg);
  write_file(out / "val_report.json", stvqa::eval_report_to_json(report) + "\n");
  std::printf("best epoch %d of %zu\n", result.best_epoch, result.history.size());
  print_report(report);
  return kExitOk;
}

struct EvalArgs {
  std::string data, ckpt, report;
};

int run_eval(const EvalArgs& a) {
  const stvqa::Checkpoint ck = stvqa::load_checkpoint(a.ckpt);
  const auto examples = load_or_fail(a.data, &ck.config);
  const stvqa::EvalReport report = stvqa::evaluate(examples, ck.params, ck.config);
  write_file(a.report, stvqa::eval_report_to_json(report) + "\n");
  print_report(report);
  return kExitOk;
}

struct StatsArgs {
  std::string data, out;
};

int run_stats(const StatsArgs& a) {
  const auto examples = load_or_fail(a.data, nullptr);
  const stvqa::CorpusStats stats = stvqa::compute_corpus_stats(examples);
  write_file(a.out, stvqa::corpus_stats_to_json(stats) + "\n");
  std::printf("questions %d  boxes %d  categories %zu\n", stats.num_questions, stats.num_boxes,
              stats.boxes_per_category.size());
  std::printf("box area / image area\n");
  for (size_t i = 0; i < stats.area_ratio_counts.size(); ++i) {
    std::printf("  [%.1f, %.1f)  %d\n", stats.area_ratio_edges[i], stats.area_ratio_edges[i + 1], stats.area_ratio_counts[i]);
  }
  std::printf("span length (s)\n");
  for (size_t i = 0; i < stats.span_length_counts.size(); ++i) {
    if (i + 1 < stats.span_length_edges.size()) {
      std::printf("  [%2.0f, %2.0f)  %d\n", stats.span_length_edges[i], stats.span_length_edges[i + 1],
                  stats.span_length_counts[i]);
    } else {
      std::printf("  [%2.0f, inf) %d\n", stats.span_length_edges[i], stats.span_length_counts[i]);
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal video question answering"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a planted-signal synthetic dataset");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--n", synth.n, "Number of questions");
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("--frames", synth.frames, "Maximum frames per clip");
  synth_cmd->add_option("--objects", synth.objects, "Maximum objects per frame");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train and write checkpoint, history and validation report");
  train_cmd->add_option("--data", train.data, "Training dataset directory")->required();
  train_cmd->add_option("--val", train.val, "Validation dataset directory")->required();
  train_cmd->add_option("--config", train.config, "Config file (key = value)")->required();
  train_cmd->add_option("--out", train.out, "Output directory")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--data", eval.data, "Dataset directory")->required();
  eval_cmd->add_option("--ckpt", eval.ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--report", eval.report, "Report JSON path")->required();

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics");
  stats_cmd->add_option("--data", stats.data, "Dataset directory")->required();
  stats_cmd->add_option("--out", stats.out, "Statistics JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(eval);
    if (*stats_cmd) return run_stats(stats);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const stvqa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const stvqa::CorruptFileError& e) {
    std::cerr << "corrupt file: " << e.what() << "\n";
    return kExitData;
  } catch (const stvqa::LoadError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "filesystem error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
