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

// Optimization loop, evaluation driver and checkpoint I/O.
#ifndef STVQA_TRAINER_HPP_
#define STVQA_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stvqa/core_types.hpp"
#include "stvqa/metrics.hpp"
#include "stvqa/objectives.hpp"
#include "stvqa/params.hpp"
#include "stvqa/stage_model.hpp"

namespace stvqa {

// Adam with weight decay added to the gradient (L2 coupling).
class AdamOptimizer {
 public:
  AdamOptimizer(const ParamStore& like, const ModelConfig& cfg);
  void step(ParamStore& params, const ParamStore& grads);
  int64_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  ParamStore m_;
  ParamStore v_;
  int64_t t_ = 0;
};

struct BatchGradient {
  ParamStore grads;     // gradient of the mean example loss
  LossBreakdown loss;   // mean over the batch
};

// Negative pairs are drawn from an Rng seeded with `sampling_seed`, so the
// same seed reproduces the same objective.
BatchGradient compute_batch_gradient(const StageModel& model, std::span<const QAExample> batch,
                                     const ParamStore& params, uint64_t sampling_seed);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown train_loss;  // mean over examples
  double val_qa_acc = 0.0;
  double val_temp_miou = 0.0;
  double val_asa = 0.0;
  double val_grd_map = 0.0;
  double val_attention_precision = 0.0;
};

struct TrainOptions {
  bool early_stopping = true;  // also off when cfg.early_stop_patience == 0
  // Called after every epoch; returning false ends training.
  std::function<bool(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  ParamStore best_params;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_qa_acc = 0.0;
  int64_t optimizer_steps = 0;
};

// Throws std::invalid_argument when either dataset is empty.
TrainResult train(std::span<const QAExample> train_set, std::span<const QAExample> val_set, const ModelConfig& cfg,
                  const TrainOptions& options = {});

// One JSON object per line.
std::string history_to_jsonl(std::span<const EpochRecord> history);

// Infer-mode pass over every question. Grounding reads the GT hypothesis'
// attention on annotated (word, frame) pairs; box selections use
// cfg.box_score_threshold while mAP ranks every object.
EvalReport evaluate(std::span<const QAExample> dataset, const ParamStore& params, const ModelConfig& cfg);

struct Checkpoint {
  ParamStore params;
  ModelConfig config;
};

void save_checkpoint(const ParamStore& params, const ModelConfig& cfg, const std::string& path);
// CorruptFileError on a damaged file, a version mismatch, or parameters that
// do not match the stored config.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace stvqa

#endif  // STVQA_TRAINER_HPP_
