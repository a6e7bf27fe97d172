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

#ifndef STVQA_METRICS_HPP_
#define STVQA_METRICS_HPP_

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stvqa/core_types.hpp"

namespace stvqa {

// |a ∩ b| / |a ∪ b| counted in frames (inclusive intervals).
double span_iou(const TimeSpan& a, const TimeSpan& b);
double box_iou(const BoundingBox& a, const BoundingBox& b);

double qa_accuracy(std::span<const int> predictions, std::span<const int> ground_truth);

// Per-question outcome. `predicted_span` is the top proposal of the
// predicted answer's hypothesis, right or wrong.
struct QuestionRecord {
  std::string qid;
  std::string question_type;
  int predicted_answer = 0;
  int gt_answer = 0;
  TimeSpan predicted_span;
  TimeSpan gt_span;

  bool answer_correct() const { return predicted_answer == gt_answer; }
};

double temporal_miou(std::span<const QuestionRecord> records);
// Fraction with the right answer and span IoU >= iou_threshold.
double answer_span_joint_accuracy(std::span<const QuestionRecord> records, double iou_threshold = 0.5);

struct TypeAccuracy {
  int count = 0;
  double accuracy = 0.0;
};
// Keyed by QuestionRecord::question_type.
std::map<std::string, TypeAccuracy> accuracy_by_question_type(std::span<const QuestionRecord> records);

// Grounding boxes. `cls` is the concept word; `key` identifies the
// (question, word, frame) the box belongs to so matching never crosses keys.
struct ScoredBox {
  std::string cls;
  std::string key;
  BoundingBox box;
  double score = 0.0;
};

struct GroundTruthBox {
  std::string cls;
  std::string key;
  BoundingBox box;
};

struct GroundingResult {
  double map = 0.0;
  std::map<std::string, double> per_class_ap;  // classes with >= 1 GT box
};

// PASCAL VOC average precision per class (greedy matching in descending
// score order, all-points interpolated), averaged over classes with GT.
// Zero when no class has GT.
GroundingResult grounding_map_detail(std::span<const ScoredBox> predictions, std::span<const GroundTruthBox> gts,
                                     double iou_threshold = 0.5);
double grounding_map(std::span<const ScoredBox> predictions, std::span<const GroundTruthBox> gts,
                     double iou_threshold = 0.5);

// Attention-selected boxes for one annotated (word, frame).
struct BoxSelection {
  int word_index = 0;
  std::string word;
  int frame_idx = 0;
  std::vector<std::pair<int, double>> selected;  // (object index, normalized score)
};

struct QuestionResult {
  QuestionRecord record;
  std::array<double, kNumAnswers> answer_probs{};
  double span_confidence = 0.0;
  double span_iou = 0.0;
  std::vector<BoxSelection> boxes;
};

struct EvalReport {
  double qa_acc = 0.0;
  double temp_miou = 0.0;
  double asa = 0.0;
  double grd_map = 0.0;
  // Fraction of annotated (word, frame) pairs whose most-attended object is
  // a positive (IoU >= threshold with a GT box).
  double attention_precision = 0.0;
  std::map<std::string, TypeAccuracy> per_question_type;
  std::map<std::string, double> per_class_ap;
  std::vector<QuestionResult> per_question;
};

// Deterministic JSON (fixed key order, round-trip doubles).
std::string eval_report_to_json(const EvalReport& report, int indent = 2);

}  // namespace stvqa

#endif  // STVQA_METRICS_HPP_
