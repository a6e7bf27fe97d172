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

#include "stvqa/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "json.hpp"
#include "stvqa/errors.hpp"

namespace stvqa {

double span_iou(const TimeSpan& a, const TimeSpan& b) {
  const int inter = std::min(a.end_idx, b.end_idx) - std::max(a.start_idx, b.start_idx) + 1;
  if (inter <= 0) return 0.0;
  const int uni = a.length() + b.length() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double qa_accuracy(std::span<const int> predictions, std::span<const int> ground_truth) {
  if (predictions.size() != ground_truth.size()) throw ContractViolation("qa_accuracy: length mismatch");
  if (predictions.empty()) return 0.0;
  size_t hits = 0;
  for (size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == ground_truth[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double temporal_miou(std::span<const QuestionRecord> records) {
  if (records.empty()) return 0.0;
  double total = 0.0;
  for (const QuestionRecord& r : records) total += span_iou(r.predicted_span, r.gt_span);
  return total / static_cast<double>(records.size());
}

double answer_span_joint_accuracy(std::span<const QuestionRecord> records, double iou_threshold) {
  if (records.empty()) return 0.0;
  size_t hits = 0;
  for (const QuestionRecord& r : records) {
    hits += r.answer_correct() && span_iou(r.predicted_span, r.gt_span) >= iou_threshold;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

std::map<std::string, TypeAccuracy> accuracy_by_question_type(std::span<const QuestionRecord> records) {
  std::map<std::string, std::pair<int, int>> tally;
  for (const QuestionRecord& r : records) {
    auto& [n, hits] = tally[r.question_type];
    ++n;
    hits += r.answer_correct();
  }
  std::map<std::string, TypeAccuracy> out;
  for (const auto& [type, t] : tally) out[type] = TypeAccuracy{t.first, static_cast<double>(t.second) / t.first};
  return out;
}

namespace {

// All-points interpolated AP given the TP flags of score-ranked predictions.
double average_precision(const std::vector<bool>& is_tp, size_t n_gt) {
  std::vector<double> rec{0.0}, prec{0.0};
  size_t tp = 0;
  for (size_t i = 0; i < is_tp.size(); ++i) {
    tp += is_tp[i];
    rec.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    prec.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  rec.push_back(1.0);
  prec.push_back(0.0);
  for (size_t i = prec.size() - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0.0;
  for (size_t i = 1; i < rec.size(); ++i) {
    if (rec[i] != rec[i - 1]) ap += (rec[i] - rec[i - 1]) * prec[i];
  }
  return ap;
}

}  // namespace

GroundingResult grounding_map_detail(std::span<const ScoredBox> predictions, std::span<const GroundTruthBox> gts,
                                     double iou_threshold) {
  std::map<std::string, std::vector<size_t>> gt_by_class;
  for (size_t i = 0; i < gts.size(); ++i) gt_by_class[gts[i].cls].push_back(i);
  std::map<std::string, std::vector<size_t>> pred_by_class;
  for (size_t i = 0; i < predictions.size(); ++i) pred_by_class[predictions[i].cls].push_back(i);

  GroundingResult result;
  for (const auto& [cls, gt_idx] : gt_by_class) {
    std::vector<size_t> order = pred_by_class[cls];
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return predictions[a].score > predictions[b].score; });
    std::vector<bool> matched(gt_idx.size(), false);
    std::vector<bool> is_tp;
    is_tp.reserve(order.size());
    for (size_t p : order) {
      double best = -1.0;
      size_t best_j = 0;
      for (size_t j = 0; j < gt_idx.size(); ++j) {
        const GroundTruthBox& g = gts[gt_idx[j]];
        if (g.key != predictions[p].key) continue;
        const double iou = box_iou(predictions[p].box, g.box);
        if (iou > best) {
          best = iou;
          best_j = j;
        }
      }
      const bool tp = best >= iou_threshold && !matched[best_j];
      if (tp) matched[best_j] = true;
      is_tp.push_back(tp);
    }
    result.per_class_ap[cls] = average_precision(is_tp, gt_idx.size());
  }
  if (!result.per_class_ap.empty()) {
    double total = 0.0;
    for (const auto& [cls, ap] : result.per_class_ap) total += ap;
    result.map = total / static_cast<double>(result.per_class_ap.size());
  }
  return result;
}

double grounding_map(std::span<const ScoredBox> predictions, std::span<const GroundTruthBox> gts, double iou_threshold) {
  return grounding_map_detail(predictions, gts, iou_threshold).map;
}

std::string eval_report_to_json(const EvalReport& r, int indent) {
  using nlohmann::ordered_json;
  auto span_json = [](const TimeSpan& s) { return ordered_json::array({s.start_idx, s.end_idx}); };
  ordered_json j;
  j["qa_acc"] = r.qa_acc;
  j["temp_miou"] = r.temp_miou;
  j["asa"] = r.asa;
  j["grd_map"] = r.grd_map;
  j["attention_precision"] = r.attention_precision;
  j["n_questions"] = r.per_question.size();
  ordered_json types = ordered_json::object();
  for (const auto& [type, acc] : r.per_question_type) types[type] = {{"count", acc.count}, {"qa_acc", acc.accuracy}};
  j["per_question_type"] = types;
  ordered_json classes = ordered_json::object();
  for (const auto& [cls, ap] : r.per_class_ap) classes[cls] = ap;
  j["per_class_ap"] = classes;
  ordered_json per_q = ordered_json::array();
  for (const QuestionResult& q : r.per_question) {
    ordered_json e;
    e["qid"] = q.record.qid;
    e["question_type"] = q.record.question_type;
    e["pred_answer"] = q.record.predicted_answer;
    e["gt_answer"] = q.record.gt_answer;
    e["answer_probs"] = q.answer_probs;
    e["pred_span"] = span_json(q.record.predicted_span);
    e["gt_span"] = span_json(q.record.gt_span);
    e["span_confidence"] = q.span_confidence;
    e["span_iou"] = q.span_iou;
    ordered_json boxes = ordered_json::array();
    for (const BoxSelection& b : q.boxes) {
      ordered_json sel = ordered_json::array();
      for (const auto& [idx, score] : b.selected) sel.push_back({{"object", idx}, {"score", score}});
      boxes.push_back({{"word_index", b.word_index}, {"word", b.word}, {"frame_idx", b.frame_idx}, {"selected", sel}});
    }
    e["boxes"] = boxes;
    per_q.push_back(std::move(e));
  }
  j["per_question"] = per_q;
  return j.dump(indent);
}

}  // namespace stvqa
