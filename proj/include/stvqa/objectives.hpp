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

#ifndef STVQA_OBJECTIVES_HPP_
#define STVQA_OBJECTIVES_HPP_

#include <span>
#include <vector>

#include "stvqa/autodiff.hpp"
#include "stvqa/core_types.hpp"
#include "stvqa/rng.hpp"
#include "stvqa/stage_model.hpp"

namespace stvqa {

// Floor applied inside every log of a cross-entropy.
inline constexpr double kLogFloor = 1e-12;

// One annotated concept word in one frame. Positives are detector boxes with
// IoU >= threshold against any GT box of the concept; everything else in the
// frame is a negative candidate.
struct AttentionTarget {
  int word_index = 0;
  int frame_idx = 0;
  std::vector<int> positives;
  std::vector<int> negatives;
};

struct AttentionPair {
  int word_index = 0;
  int frame_idx = 0;
  int positive = 0;
  int negative = 0;
  friend bool operator==(const AttentionPair&, const AttentionPair&) = default;
};

struct LossBreakdown {
  double l_ans = 0.0;
  double l_att = 0.0;
  double l_span = 0.0;
  double total = 0.0;
};

// Targets with no positive box are dropped.
std::vector<AttentionTarget> build_attention_targets(std::span<const ConceptAnnotation> concepts,
                                                     const std::vector<std::vector<BoundingBox>>& detector_boxes,
                                                     double iou_threshold = 0.5);
std::vector<AttentionTarget> build_attention_targets(const QAExample& ex, double iou_threshold = 0.5);

// For every positive, up to `negatives_per_positive` distinct negatives drawn
// without replacement from the target's pool.
std::vector<AttentionPair> sample_attention_pairs(std::span<const AttentionTarget> targets, int negatives_per_positive,
                                                  Rng& rng);

// log(1 + exp(neg - pos)), evaluated stably.
double lse_pair_loss(double positive_score, double negative_score);

// Sum of pair losses. raw_scores[t] holds the GT hypothesis' L_h x N_t raw
// attention for frame t.
double lse_attention_loss(const std::vector<Matrix>& raw_scores, std::span<const AttentionPair> pairs);
double lse_attention_loss(const std::vector<Matrix>& raw_scores, std::span<const AttentionTarget> targets,
                          int negatives_per_positive, Rng& rng);
// Graph version over the packed L_h x (frames * objects_per_frame) scores.
ad::Var lse_attention_loss(const ad::Var& scores, Eigen::Index objects_per_frame, std::span<const AttentionPair> pairs);

// -(log p_start[y_start] + log p_end[y_end]) / 2
double span_cross_entropy(std::span<const double> p_start, std::span<const double> p_end, int y_start, int y_end);
ad::Var span_cross_entropy(const ad::Var& p_start, const ad::Var& p_end, int y_start, int y_end);

// -log p[y]
double answer_cross_entropy(std::span<const double> probs, int y);
ad::Var answer_cross_entropy(const ad::Var& probs, int y);

LossBreakdown total_loss(double l_ans, double l_att, double l_span, double w_att, double w_span);

// Differentiable per-example objective. Attention and span terms read only
// the GT hypothesis; the answer term averages over the training spans.
struct ExampleLoss {
  ad::Var total;
  LossBreakdown parts;
};
ExampleLoss example_loss(const StageGraph& graph, const PackedExample& packed, const QAExample& ex,
                         std::span<const AttentionPair> pairs, const ModelConfig& cfg);

// Same quantities from a ModelOutput (answer term from answer_probs).
LossBreakdown compute_losses(const ModelOutput& out, const QAExample& ex, std::span<const AttentionPair> pairs,
                             const ModelConfig& cfg);

}  // namespace stvqa

#endif  // STVQA_OBJECTIVES_HPP_
