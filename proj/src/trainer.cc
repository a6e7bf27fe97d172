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

#include "stvqa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "stvqa/autodiff.hpp"
#include "stvqa/errors.hpp"
#include "stvqa/packed_file.hpp"
#include "stvqa/rng.hpp"

namespace stvqa {

AdamOptimizer::AdamOptimizer(const ParamStore& like, const ModelConfig& cfg)
    : lr_(cfg.lr),
      beta1_(cfg.adam_beta1),
      beta2_(cfg.adam_beta2),
      eps_(cfg.adam_eps),
      weight_decay_(cfg.weight_decay),
      m_(like.zeros_like()),
      v_(like.zeros_like()) {}

void AdamOptimizer::step(ParamStore& params, const ParamStore& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ShapeError("AdamOptimizer: parameter count changed");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Matrix& p = params.value(i);
    const Matrix g = grads.value(i) + weight_decay_ * p;
    Matrix& m = m_.value(i);
    Matrix& v = v_.value(i);
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

BatchGradient compute_batch_gradient(const StageModel& model, std::span<const QAExample> batch,
                                     const ParamStore& params, uint64_t sampling_seed) {
  if (batch.empty()) throw std::invalid_argument("compute_batch_gradient: empty batch");
  const ModelConfig& cfg = model.config();
  Rng rng(sampling_seed);
  BatchGradient out{params.zeros_like(), {}};
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const QAExample& ex : batch) {
    const PackedExample packed = pack_example(ex, cfg);
    const auto targets = build_attention_targets(ex, cfg.iou_positive_threshold);
    const auto pairs = sample_attention_pairs(targets, cfg.negatives_per_positive, rng);
    ad::Tape tape;
    BoundParams bound(tape, params);
    const StageGraph graph = model.build(tape, bound, packed, Mode::kTrain, ex.gt_answer_idx, ex.gt_span);
    const ExampleLoss loss = example_loss(graph, packed, ex, pairs, cfg);
    tape.backward(loss.total);
    const ParamStore g = bound.gradients(params);
    for (size_t i = 0; i < g.size(); ++i) out.grads.value(i) += inv_n * g.value(i);
    out.loss.l_ans += inv_n * loss.parts.l_ans;
    out.loss.l_att += inv_n * loss.parts.l_att;
    out.loss.l_span += inv_n * loss.parts.l_span;
    out.loss.total += inv_n * loss.parts.total;
  }
  return out;
}

TrainResult train(std::span<const QAExample> train_set, std::span<const QAExample> val_set, const ModelConfig& cfg,
                  const TrainOptions& options) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (val_set.empty()) throw std::invalid_argument("train: empty validation set");
  const StageModel model(cfg);
  ParamStore params = model.init_params();
  AdamOptimizer optimizer(params, cfg);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  TrainResult result;
  result.best_params = params;
  result.best_val_qa_acc = -1.0;
  int stale = 0;
  const bool use_patience = options.early_stopping && cfg.early_stop_patience > 0;
  const auto batch = static_cast<size_t>(cfg.batch_size);

  std::vector<size_t> order(train_set.size());
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    rng.shuffle(order);
    EpochRecord rec;
    rec.epoch = epoch;
    for (size_t begin = 0; begin < order.size(); begin += batch) {
      const size_t end = std::min(order.size(), begin + batch);
      std::vector<QAExample> examples;
      examples.reserve(end - begin);
      for (size_t i = begin; i < end; ++i) examples.push_back(train_set[order[i]]);
      const BatchGradient bg = compute_batch_gradient(model, examples, params, rng.next_u64());
      optimizer.step(params, bg.grads);
      const double w = static_cast<double>(end - begin) / static_cast<double>(order.size());
      rec.train_loss.l_ans += w * bg.loss.l_ans;
      rec.train_loss.l_att += w * bg.loss.l_att;
      rec.train_loss.l_span += w * bg.loss.l_span;
      rec.train_loss.total += w * bg.loss.total;
    }
    const EvalReport report = evaluate(val_set, params, cfg);
    rec.val_qa_acc = report.qa_acc;
    rec.val_temp_miou = report.temp_miou;
    rec.val_asa = report.asa;
    rec.val_grd_map = report.grd_map;
    rec.val_attention_precision = report.attention_precision;
    result.history.push_back(rec);

    if (report.qa_acc > result.best_val_qa_acc) {
      result.best_val_qa_acc = report.qa_acc;
      result.best_params = params;
      result.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
    result.optimizer_steps = optimizer.steps();
    if (options.on_epoch && !options.on_epoch(rec)) break;
    if (use_patience && stale >= cfg.early_stop_patience) break;
  }
  return result;
}

std::string history_to_jsonl(std::span<const EpochRecord> history) {
  std::string out;
  for (const EpochRecord& r : history) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["loss"] = r.train_loss.total;
    j["l_ans"] = r.train_loss.l_ans;
    j["l_att"] = r.train_loss.l_att;
    j["l_span"] = r.train_loss.l_span;
    j["val_qa_acc"] = r.val_qa_acc;
    j["val_temp_miou"] = r.val_temp_miou;
    j["val_asa"] = r.val_asa;
    j["val_grd_map"] = r.val_grd_map;
    j["val_attention_precision"] = r.val_attention_precision;
    out += j.dump() + "\n";
  }
  return out;
}

EvalReport evaluate(std::span<const QAExample> dataset, const ParamStore& params, const ModelConfig& cfg) {
  const StageModel model(cfg);
  EvalReport report;
  std::vector<QuestionRecord> records;
  std::vector<ScoredBox> predictions;
  std::vector<GroundTruthBox> gts;
  int annotated = 0;
  int hits = 0;

  for (const QAExample& ex : dataset) {
    const ModelOutput out = model.forward(ex, params, Mode::kInfer);
    QuestionResult q;
    q.record.qid = ex.qid;
    q.record.question_type = question_type(ex);
    q.record.predicted_answer = out.predicted_answer();
    q.record.gt_answer = ex.gt_answer_idx;
    const SpanProposal& top = out.proposals[static_cast<size_t>(q.record.predicted_answer)].front();
    q.record.predicted_span = top.span;
    q.record.gt_span = ex.gt_span;
    q.answer_probs = out.answer_probs;
    q.span_confidence = top.confidence;
    q.span_iou = span_iou(top.span, ex.gt_span);

    const auto& attention = out.attention[static_cast<size_t>(ex.gt_answer_idx)];
    for (const ConceptAnnotation& ann : ex.concept_annotations) {
      const std::string word = concept_word(ex, ann);
      const std::string key = ex.qid + "|" + std::to_string(ann.word_index) + "|" + std::to_string(ann.frame_idx);
      for (const BoundingBox& b : ann.gt_boxes) gts.push_back({word, key, b});
      ++annotated;
      const FrameRecord& frame = ex.frames[static_cast<size_t>(ann.frame_idx)];
      const Matrix& att = attention[static_cast<size_t>(ann.frame_idx)];
      BoxSelection sel{ann.word_index, word, ann.frame_idx, {}};
      if (att.cols() > 0) {
        const std::vector<double> row(att.row(ann.word_index).begin(), att.row(ann.word_index).end());
        for (size_t j = 0; j < row.size(); ++j) predictions.push_back({word, key, frame.objects[j].box, row[j]});
        for (const BoxPick& p : predict_boxes(row, cfg.box_score_threshold)) sel.selected.emplace_back(p.object, p.score);
        const auto best = static_cast<size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        double best_iou = 0.0;
        for (const BoundingBox& b : ann.gt_boxes) best_iou = std::max(best_iou, box_iou(frame.objects[best].box, b));
        if (best_iou >= cfg.iou_positive_threshold) ++hits;
      }
      q.boxes.push_back(std::move(sel));
    }
    records.push_back(q.record);
    report.per_question.push_back(std::move(q));
  }

  std::vector<int> preds, truth;
  for (const QuestionRecord& r : records) {
    preds.push_back(r.predicted_answer);
    truth.push_back(r.gt_answer);
  }
  if (!records.empty()) {
    report.qa_acc = qa_accuracy(preds, truth);
    report.temp_miou = temporal_miou(records);
    report.asa = answer_span_joint_accuracy(records, 0.5);
  }
  const GroundingResult grounding = grounding_map_detail(predictions, gts, 0.5);
  report.grd_map = grounding.map;
  report.per_class_ap = grounding.per_class_ap;
  report.attention_precision = annotated > 0 ? static_cast<double>(hits) / annotated : 0.0;
  report.per_question_type = accuracy_by_question_type(records);
  return report;
}

void save_checkpoint(const ParamStore& params, const ModelConfig& cfg, const std::string& path) {
  PackedFile file;
  file.metadata = format_config(cfg);
  for (size_t i = 0; i < params.size(); ++i) {
    file.arrays.push_back(NamedArray::from_matrix(params.name(i), params.value(i), DType::kFloat64));
  }
  write_packed_file(path, file);
}

Checkpoint load_checkpoint(const std::string& path) {
  const PackedFile file = read_packed_file(path);
  Checkpoint ck;
  try {
    ck.config = parse_config(file.metadata);
  } catch (const ConfigError& e) {
    throw CorruptFileError(std::string("checkpoint config is invalid: ") + e.what());
  }
  const ParamStore expected = init_stage_params(ck.config, 0);
  if (file.arrays.size() != expected.size()) throw CorruptFileError("checkpoint parameter count does not match config");
  for (size_t i = 0; i < expected.size(); ++i) {
    const NamedArray& a = file.arrays[i];
    if (a.name != expected.name(i)) throw CorruptFileError("checkpoint parameter '" + a.name + "' is unexpected");
    Matrix m = a.to_matrix();
    if (m.rows() != expected.value(i).rows() || m.cols() != expected.value(i).cols()) {
      throw CorruptFileError("checkpoint parameter '" + a.name + "' has the wrong shape");
    }
    ck.params.add(a.name, std::move(m));
  }
  return ck;
}

}  // namespace stvqa
