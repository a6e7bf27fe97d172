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

#ifndef STVQA_CORE_TYPES_HPP_
#define STVQA_CORE_TYPES_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stvqa/autodiff.hpp"

namespace stvqa {

inline constexpr int kNumAnswers = 5;

// Inclusive interval of frame indices.
struct TimeSpan {
  int start_idx = 0;
  int end_idx = 0;

  int length() const { return end_idx - start_idx + 1; }
  bool valid() const { return 0 <= start_idx && start_idx <= end_idx; }
  bool contains(int frame) const { return start_idx <= frame && frame <= end_idx; }
  friend bool operator==(const TimeSpan&, const TimeSpan&) = default;
};

// Pixel coordinates, (x1, y1) top-left and (x2, y2) bottom-right.
struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const { return x1 < x2 && y1 < y2; }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ObjectRegionFeature {
  BoundingBox box;
  std::vector<double> feature;  // d_vis
  friend bool operator==(const ObjectRegionFeature&, const ObjectRegionFeature&) = default;
};

// One frame sampled at 0.5 FPS together with its aligned subtitle window.
struct FrameRecord {
  int frame_idx = 0;
  std::vector<ObjectRegionFeature> objects;
  std::vector<std::string> subtitle_tokens;
  Matrix subtitle_features;  // subtitle_tokens.size() x d_txt
};

bool operator==(const FrameRecord& a, const FrameRecord& b);

// A visual-concept word of the GT hypothesis grounded in one frame.
struct ConceptAnnotation {
  int word_index = 0;
  int frame_idx = 0;
  std::vector<BoundingBox> gt_boxes;
  friend bool operator==(const ConceptAnnotation&, const ConceptAnnotation&) = default;
};

struct QAExample {
  std::string qid;
  std::string clip_id;
  std::vector<std::string> question_tokens;
  std::vector<std::vector<std::string>> answer_tokens;  // kNumAnswers entries
  Matrix question_features;                             // |q| x d_txt
  std::vector<Matrix> answer_features;                  // |a_k| x d_txt
  int gt_answer_idx = 0;
  TimeSpan gt_span;
  std::vector<FrameRecord> frames;
  std::vector<ConceptAnnotation> concept_annotations;
  // Frame size in pixels, when the feature file records it.
  std::optional<double> image_width;
  std::optional<double> image_height;

  int num_frames() const { return static_cast<int>(frames.size()); }
};

bool operator==(const QAExample& a, const QAExample& b);

// Question tokens followed by answer tokens.
struct Hypothesis {
  std::vector<std::string> tokens;
  Matrix features;  // L_h x d_txt
  int length() const { return static_cast<int>(tokens.size()); }
};

Hypothesis make_hypothesis(const QAExample& ex, int answer_idx);

// Concept word string for an annotation (the class used for grounding mAP).
std::string concept_word(const QAExample& ex, const ConceptAnnotation& ann);

// Lowercased first question token; groups accuracy by question type.
std::string question_type(const QAExample& ex);

struct ModelConfig {
  int d = 128;
  int d_vis = 300;
  int d_txt = 768;
  int max_objects = 20;  // N_o
  int n_conv = 2;
  int kernel_input = 7;
  int kernel_fusion = 5;
  double w_att = 0.1;
  double w_span = 0.5;
  double box_score_threshold = 0.2;
  double iou_positive_threshold = 0.5;
  int negatives_per_positive = 2;
  int proposal_top_n = 5;
  int max_train_proposals = 3;
  double lr = 1e-3;
  double weight_decay = 3e-7;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 16;
  int max_epochs = 100;
  int early_stop_patience = 5;  // 0 disables early stopping
  uint64_t seed = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Empty when every field satisfies its invariant.
std::vector<std::string> validate_config(const ModelConfig& cfg);

// Flat `key = value` text, one field per line, doubles printed round-trip.
std::string format_config(const ModelConfig& cfg);
// Unknown keys, malformed lines and invalid values raise ConfigError. Keys
// not present keep their defaults.
ModelConfig parse_config(const std::string& text);
ModelConfig load_config_file(const std::string& path);

struct SpanProposal {
  TimeSpan span;
  double confidence = 0.0;  // p_start[st] * p_end[ed]
  friend bool operator==(const SpanProposal&, const SpanProposal&) = default;
};

struct ModelOutput {
  std::array<double, kNumAnswers> answer_probs{};
  Matrix start_probs;  // kNumAnswers x T
  Matrix end_probs;    // kNumAnswers x T
  std::array<std::vector<SpanProposal>, kNumAnswers> proposals;
  // [k][t]: L_h(k) x N_t raw scores and their row-softmax.
  std::array<std::vector<Matrix>, kNumAnswers> attention_raw;
  std::array<std::vector<Matrix>, kNumAnswers> attention;
  // Spans that fed the GT hypothesis' local pooling (train mode only).
  std::vector<TimeSpan> training_spans;

  int predicted_answer() const;
};

// Returns one message per violated invariant, "<field>: <rule>" style.
std::vector<std::string> validate_example(const QAExample& ex, const ModelConfig& cfg);
// Shape checks against feature dims are skipped.
std::vector<std::string> validate_example(const QAExample& ex);

}  // namespace stvqa

#endif  // STVQA_CORE_TYPES_HPP_
