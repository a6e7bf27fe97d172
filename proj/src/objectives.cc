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

#include "stvqa/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "stvqa/errors.hpp"
#include "stvqa/metrics.hpp"

namespace stvqa {

std::vector<AttentionTarget> build_attention_targets(std::span<const ConceptAnnotation> concepts,
                                                     const std::vector<std::vector<BoundingBox>>& detector_boxes,
                                                     double iou_threshold) {
  std::vector<AttentionTarget> out;
  for (const ConceptAnnotation& c : concepts) {
    if (c.frame_idx < 0 || c.frame_idx >= static_cast<int>(detector_boxes.size())) continue;
    const auto& boxes = detector_boxes[static_cast<size_t>(c.frame_idx)];
    AttentionTarget t{c.word_index, c.frame_idx, {}, {}};
    for (size_t r = 0; r < boxes.size(); ++r) {
      const bool pos = std::any_of(c.gt_boxes.begin(), c.gt_boxes.end(),
                                   [&](const BoundingBox& g) { return box_iou(boxes[r], g) >= iou_threshold; });
      (pos ? t.positives : t.negatives).push_back(static_cast<int>(r));
    }
    if (!t.positives.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::vector<AttentionTarget> build_attention_targets(const QAExample& ex, double iou_threshold) {
  std::vector<std::vector<BoundingBox>> boxes;
  for (const FrameRecord& f : ex.frames) {
    auto& fb = boxes.emplace_back();
    for (const ObjectRegionFeature& o : f.objects) fb.push_back(o.box);
  }
  return build_attention_targets(ex.concept_annotations, boxes, iou_threshold);
}

std::vector<AttentionPair> sample_attention_pairs(std::span<const AttentionTarget> targets, int negatives_per_positive,
                                                  Rng& rng) {
  std::vector<AttentionPair> pairs;
  for (const AttentionTarget& t : targets) {
    for (int pos : t.positives) {
      const auto picks = rng.sample_without_replacement(static_cast<int>(t.negatives.size()), negatives_per_positive);
      for (int i : picks) pairs.push_back({t.word_index, t.frame_idx, pos, t.negatives[static_cast<size_t>(i)]});
    }
  }
  return pairs;
}

double lse_pair_loss(double positive_score, double negative_score) {
  const double x = negative_score - positive_score;
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double lse_attention_loss(const std::vector<Matrix>& raw_scores, std::span<const AttentionPair> pairs) {
  double total = 0.0;
  for (const AttentionPair& p : pairs) {
    const Matrix& m = raw_scores.at(static_cast<size_t>(p.frame_idx));
    total += lse_pair_loss(m(p.word_index, p.positive), m(p.word_index, p.negative));
  }
  return total;
}

double lse_attention_loss(const std::vector<Matrix>& raw_scores, std::span<const AttentionTarget> targets,
                          int negatives_per_positive, Rng& rng) {
  const auto pairs = sample_attention_pairs(targets, negatives_per_positive, rng);
  return lse_attention_loss(raw_scores, pairs);
}

ad::Var lse_attention_loss(const ad::Var& scores, Eigen::Index objects_per_frame, std::span<const AttentionPair> pairs) {
  if (pairs.empty()) return scores.tape()->constant(Matrix::Zero(1, 1));
  std::vector<std::pair<int, int>> pos, neg;
  for (const AttentionPair& p : pairs) {
    const auto base = static_cast<int>(p.frame_idx * objects_per_frame);
    pos.emplace_back(p.word_index, base + p.positive);
    neg.emplace_back(p.word_index, base + p.negative);
  }
  return ad::sum(ad::softplus(ad::sub(ad::gather(scores, neg), ad::gather(scores, pos))));
}

double span_cross_entropy(std::span<const double> p_start, std::span<const double> p_end, int y_start, int y_end) {
  if (y_start < 0 || y_start > y_end || y_end >= static_cast<int>(p_end.size()) ||
      y_start >= static_cast<int>(p_start.size())) {
    throw ContractViolation("span_cross_entropy: target indices out of range");
  }
  return -(std::log(std::max(p_start[static_cast<size_t>(y_start)], kLogFloor)) +
           std::log(std::max(p_end[static_cast<size_t>(y_end)], kLogFloor))) /
         2.0;
}

ad::Var span_cross_entropy(const ad::Var& p_start, const ad::Var& p_end, int y_start, int y_end) {
  if (y_start < 0 || y_start > y_end || y_end >= p_end.cols()) {
    throw ContractViolation("span_cross_entropy: target indices out of range");
  }
  const ad::Var ls = ad::log_clamped(ad::element(p_start, 0, y_start), kLogFloor);
  const ad::Var le = ad::log_clamped(ad::element(p_end, 0, y_end), kLogFloor);
  return ad::scale(ad::add(ls, le), -0.5);
}

double answer_cross_entropy(std::span<const double> probs, int y) {
  if (y < 0 || y >= static_cast<int>(probs.size())) throw ContractViolation("answer_cross_entropy: label out of range");
  return -std::log(std::max(probs[static_cast<size_t>(y)], kLogFloor));
}

ad::Var answer_cross_entropy(const ad::Var& probs, int y) {
  if (y < 0 || y >= probs.cols()) throw ContractViolation("answer_cross_entropy: label out of range");
  return ad::scale(ad::log_clamped(ad::element(probs, 0, y), kLogFloor), -1.0);
}

LossBreakdown total_loss(double l_ans, double l_att, double l_span, double w_att, double w_span) {
  return {l_ans, l_att, l_span, l_ans + w_att * l_att + w_span * l_span};
}

ExampleLoss example_loss(const StageGraph& graph, const PackedExample& packed, const QAExample& ex,
                         std::span<const AttentionPair> pairs, const ModelConfig& cfg) {
  const auto gt = static_cast<size_t>(ex.gt_answer_idx);
  const auto& per_prop = graph.answer_probs_per_proposal;
  if (per_prop.empty()) throw ContractViolation("example_loss: graph has no answer distribution");
  std::vector<ad::Var> ans_terms;
  for (const ad::Var& p : per_prop) ans_terms.push_back(answer_cross_entropy(p, ex.gt_answer_idx));
  const ad::Var l_ans = ad::scale(ad::sum(ad::concat_rows(ans_terms)), 1.0 / static_cast<double>(per_prop.size()));
  const ad::Var l_att = lse_attention_loss(graph.object_scores[gt], packed.objects_pad, pairs);
  const ad::Var l_span =
      span_cross_entropy(graph.start_probs[gt], graph.end_probs[gt], ex.gt_span.start_idx, ex.gt_span.end_idx);
  const ad::Var total = ad::add(ad::add(l_ans, ad::scale(l_att, cfg.w_att)), ad::scale(l_span, cfg.w_span));
  return {total, total_loss(l_ans.scalar(), l_att.scalar(), l_span.scalar(), cfg.w_att, cfg.w_span)};
}

LossBreakdown compute_losses(const ModelOutput& out, const QAExample& ex, std::span<const AttentionPair> pairs,
                             const ModelConfig& cfg) {
  const auto gt = static_cast<size_t>(ex.gt_answer_idx);
  const double l_ans = answer_cross_entropy(out.answer_probs, ex.gt_answer_idx);
  const double l_att = lse_attention_loss(out.attention_raw[gt], pairs);
  const Eigen::RowVectorXd ps = out.start_probs.row(static_cast<Eigen::Index>(gt));
  const Eigen::RowVectorXd pe = out.end_probs.row(static_cast<Eigen::Index>(gt));
  const double l_span = span_cross_entropy(std::span<const double>(ps.data(), static_cast<size_t>(ps.size())),
                                           std::span<const double>(pe.data(), static_cast<size_t>(pe.size())),
                                           ex.gt_span.start_idx, ex.gt_span.end_idx);
  return total_loss(l_ans, l_att, l_span, cfg.w_att, cfg.w_span);
}

}  // namespace stvqa
