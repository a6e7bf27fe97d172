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

// Forward pass of the spatio-temporal answerer: encode hypotheses, subtitles
// and object regions; attend from every hypothesis word to objects and
// subtitle words; fuse per frame; localize a span; pool locally and globally;
// score the five hypotheses.

#ifndef STVQA_STAGE_MODEL_HPP_
#define STVQA_STAGE_MODEL_HPP_

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "stvqa/autodiff.hpp"
#include "stvqa/core_types.hpp"
#include "stvqa/nn_blocks.hpp"
#include "stvqa/params.hpp"

namespace stvqa {

enum class Mode { kTrain, kInfer };

// Minimum padded sizes; the actual padding is max(request, data). Padded
// feature rows are filled with `fill` so tests can prove they are ignored.
struct PaddingSpec {
  int frames = 0;
  int objects = 0;
  int subtitle_tokens = 0;
  int hypothesis_tokens = 0;
  double fill = 0.0;
};

// Dense, masked layout of one example. Variable-length axes are padded to a
// common size so each axis becomes fixed-size segments of rows.
struct PackedExample {
  int num_frames = 0;  // valid T
  Eigen::Index frames_pad = 0;
  Eigen::Index objects_pad = 0;
  Eigen::Index subtitle_pad = 0;
  Eigen::Index hypothesis_pad = 0;
  std::array<int, kNumAnswers> hypothesis_lengths{};
  std::vector<int> object_counts;  // per valid frame
  Matrix hypothesis_features;      // (5 * hypothesis_pad) x d_txt
  Mask hypothesis_mask;
  Matrix subtitle_features;  // (frames_pad * subtitle_pad) x d_txt
  Mask subtitle_mask;
  Matrix object_features;  // (frames_pad * objects_pad) x d_vis
  Mask object_mask;
  Mask frame_mask;  // frames_pad
};

PackedExample pack_example(const QAExample& ex, const ModelConfig& cfg, const PaddingSpec& padding = {});

ParamStore init_stage_params(const ModelConfig& cfg, uint64_t seed);

struct AttentionResult {
  ad::Var scores;    // L_h x (frames * n): raw H X^T
  ad::Var probs;     // same shape, softmax per frame block over valid items
  ad::Var attended;  // (frames * L_h) x d
};

// Attention from hypothesis words to items grouped in frames of
// `items_per_frame` rows. A frame without valid items attends to nothing and
// yields zero rows.
AttentionResult qa_guided_attention(const ad::Var& hypothesis, const ad::Var& items, const Mask& item_mask,
                                    Eigen::Index items_per_frame);

// [S_att ; V_att ; S_att * V_att] W_F + b_F.
ad::Var video_text_fusion(const ad::Var& sub_attended, const ad::Var& vis_attended, const nn::Linear& fusion);

// Max-pool each frame's fused rows over valid hypothesis words, then run the
// fusion-level conv encoder (with PE) along time. Returns frames x d.
ad::Var fuse_and_encode(const ad::Var& fused, const Mask& word_mask, const Mask& frame_mask,
                        std::span<const nn::ConvUnitParams> units);

struct SpanHead {
  nn::Linear start;
  nn::Linear end;
};

// Start and end distributions (each 1 x frames) over valid frames.
std::pair<ad::Var, ad::Var> span_probabilities(const ad::Var& fused_seq, const Mask& frame_mask, const SpanHead& head);

// Best (st <= ed) pair by p_start[st] * p_end[ed] in one pass.
SpanProposal best_span(std::span<const double> p_start, std::span<const double> p_end);

// Top-n pairs by confidence, descending; ties go to smaller st, then smaller ed.
std::vector<SpanProposal> propose_spans(std::span<const double> p_start, std::span<const double> p_end, int top_n);

// {gt} followed by distinct proposals with IoU >= threshold, in proposal order,
// at most `cap` spans in total.
std::vector<TimeSpan> build_training_proposals(std::span<const SpanProposal> proposals, const TimeSpan& gt_span,
                                               double iou_threshold = 0.5, int cap = 3);

// [max over span ; max over all valid frames] of an already-encoded sequence.
ad::Var pool_local_global(const ad::Var& encoded, const TimeSpan& span, const Mask& frame_mask);
// Applies the span representation layer first, then pools.
ad::Var local_global_pool(const ad::Var& fused_seq, const TimeSpan& span, const Mask& frame_mask,
                          const nn::Linear& layer);

// Shared affine 2d -> 1 per hypothesis, softmax over the five. Returns 1 x 5.
ad::Var answer_scores(std::span<const ad::Var> representations, const nn::Linear& head);

struct BoxPick {
  int object = 0;
  double score = 0.0;
  friend bool operator==(const BoxPick&, const BoxPick&) = default;
};

// Objects whose normalized attention is strictly above threshold.
std::vector<BoxPick> predict_boxes(std::span<const double> attention_row, double threshold = 0.2);

struct StageGraph {
  ad::Var answer_probs;                             // 1 x 5
  std::vector<ad::Var> answer_probs_per_proposal;   // train: one per training span
  std::array<ad::Var, kNumAnswers> start_probs;     // 1 x frames_pad
  std::array<ad::Var, kNumAnswers> end_probs;
  std::array<ad::Var, kNumAnswers> object_scores;     // hypothesis_pad x (frames_pad * objects_pad)
  std::array<ad::Var, kNumAnswers> object_attention;
  std::array<std::vector<SpanProposal>, kNumAnswers> proposals;
  std::vector<TimeSpan> training_spans;
};

class StageModel {
 public:
  explicit StageModel(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ParamStore init_params() const { return init_stage_params(cfg_, cfg_.seed); }

  // In train mode the GT hypothesis pools over every training span (GT span
  // plus matching proposals), one answer distribution per span; the other
  // hypotheses pool over their own top proposal. In infer mode every
  // hypothesis pools over its own top proposal.
  StageGraph build(ad::Tape& tape, const BoundParams& params, const PackedExample& packed, Mode mode,
                   int gt_answer = 0, TimeSpan gt_span = {}) const;

  ModelOutput extract(const StageGraph& graph, const PackedExample& packed) const;

  ModelOutput forward(const QAExample& ex, const ParamStore& params, Mode mode,
                      const PaddingSpec& padding = {}) const;

 private:
  ModelConfig cfg_;
};

}  // namespace stvqa

#endif  // STVQA_STAGE_MODEL_HPP_
