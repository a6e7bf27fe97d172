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

#include "stvqa/stage_model.hpp"

#include <algorithm>
#include <tuple>

#include "stvqa/errors.hpp"
#include "stvqa/metrics.hpp"

namespace stvqa {

namespace {

Mask tile(const Mask& m, size_t times) {
  Mask out;
  out.reserve(m.size() * times);
  for (size_t i = 0; i < times; ++i) out.insert(out.end(), m.begin(), m.end());
  return out;
}

Mask slice(const Mask& m, size_t start, size_t count) {
  return Mask(m.begin() + static_cast<std::ptrdiff_t>(start), m.begin() + static_cast<std::ptrdiff_t>(start + count));
}

std::vector<double> row_values(const ad::Var& v, Eigen::Index count) {
  const Matrix& m = v.value();
  return std::vector<double>(m.data(), m.data() + count);
}

}  // namespace

PackedExample pack_example(const QAExample& ex, const ModelConfig& cfg, const PaddingSpec& padding) {
  if (static_cast<int>(ex.answer_tokens.size()) != kNumAnswers || ex.frames.empty()) {
    throw ContractViolation("pack_example: example must have five answers and at least one frame");
  }
  PackedExample p;
  p.num_frames = ex.num_frames();
  std::array<Hypothesis, kNumAnswers> hyps;
  int max_h = padding.hypothesis_tokens;
  for (int k = 0; k < kNumAnswers; ++k) {
    hyps[static_cast<size_t>(k)] = make_hypothesis(ex, k);
    p.hypothesis_lengths[static_cast<size_t>(k)] = hyps[static_cast<size_t>(k)].length();
    max_h = std::max(max_h, hyps[static_cast<size_t>(k)].length());
  }
  int max_n = std::max(1, padding.objects);
  int max_s = std::max(1, padding.subtitle_tokens);
  for (const FrameRecord& f : ex.frames) {
    max_n = std::max(max_n, static_cast<int>(f.objects.size()));
    max_s = std::max(max_s, static_cast<int>(f.subtitle_tokens.size()));
    p.object_counts.push_back(static_cast<int>(f.objects.size()));
  }
  p.hypothesis_pad = max_h;
  p.objects_pad = max_n;
  p.subtitle_pad = max_s;
  p.frames_pad = std::max(p.num_frames, padding.frames);

  const Eigen::Index dt = cfg.d_txt;
  const Eigen::Index dv = cfg.d_vis;
  p.hypothesis_features = Matrix::Constant(kNumAnswers * p.hypothesis_pad, dt, padding.fill);
  p.hypothesis_mask.assign(static_cast<size_t>(kNumAnswers * p.hypothesis_pad), 0);
  for (int k = 0; k < kNumAnswers; ++k) {
    const Hypothesis& h = hyps[static_cast<size_t>(k)];
    if (h.length() > 0 && h.features.cols() != dt) throw ShapeError("pack_example: hypothesis width != d_txt");
    p.hypothesis_features.middleRows(k * p.hypothesis_pad, h.length()) = h.features;
    std::fill_n(p.hypothesis_mask.begin() + k * p.hypothesis_pad, h.length(), 1);
  }

  p.subtitle_features = Matrix::Constant(p.frames_pad * p.subtitle_pad, dt, padding.fill);
  p.subtitle_mask.assign(static_cast<size_t>(p.frames_pad * p.subtitle_pad), 0);
  p.object_features = Matrix::Constant(p.frames_pad * p.objects_pad, dv, padding.fill);
  p.object_mask.assign(static_cast<size_t>(p.frames_pad * p.objects_pad), 0);
  p.frame_mask.assign(static_cast<size_t>(p.frames_pad), 0);
  for (int t = 0; t < p.num_frames; ++t) {
    const FrameRecord& f = ex.frames[static_cast<size_t>(t)];
    p.frame_mask[static_cast<size_t>(t)] = 1;
    const Eigen::Index ls = static_cast<Eigen::Index>(f.subtitle_tokens.size());
    if (ls > 0) {
      if (f.subtitle_features.cols() != dt || f.subtitle_features.rows() != ls) {
        throw ShapeError("pack_example: subtitle features shape");
      }
      p.subtitle_features.middleRows(t * p.subtitle_pad, ls) = f.subtitle_features;
      std::fill_n(p.subtitle_mask.begin() + t * p.subtitle_pad, ls, 1);
    }
    for (size_t r = 0; r < f.objects.size(); ++r) {
      const auto& feat = f.objects[r].feature;
      if (static_cast<Eigen::Index>(feat.size()) != dv) throw ShapeError("pack_example: object feature width != d_vis");
      const Eigen::Index row = t * p.objects_pad + static_cast<Eigen::Index>(r);
      p.object_features.row(row) = Eigen::Map<const Eigen::RowVectorXd>(feat.data(), dv);
      p.object_mask[static_cast<size_t>(row)] = 1;
    }
  }
  return p;
}

ParamStore init_stage_params(const ModelConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  ParamStore s;
  nn::add_linear_params(s, "text_proj", cfg.d_txt, cfg.d, rng);
  nn::add_linear_params(s, "vis_proj", cfg.d_vis, cfg.d, rng);
  nn::add_conv_encoder_params(s, "text_enc", cfg.n_conv, cfg.kernel_input, cfg.d, rng);
  nn::add_conv_encoder_params(s, "vis_enc", cfg.n_conv, cfg.kernel_input, cfg.d, rng);
  nn::add_linear_params(s, "fusion", 3 * cfg.d, cfg.d, rng);
  nn::add_conv_encoder_params(s, "fused_enc", cfg.n_conv, cfg.kernel_fusion, cfg.d, rng);
  nn::add_linear_params(s, "span_start", cfg.d, 1, rng);
  nn::add_linear_params(s, "span_end", cfg.d, 1, rng);
  nn::add_linear_params(s, "span_repr", cfg.d, cfg.d, rng);
  nn::add_linear_params(s, "answer", 2 * cfg.d, 1, rng);
  return s;
}

AttentionResult qa_guided_attention(const ad::Var& hypothesis, const ad::Var& items, const Mask& item_mask,
                                    Eigen::Index items_per_frame) {
  if (hypothesis.cols() != items.cols()) throw ShapeError("qa_guided_attention: hidden sizes differ");
  AttentionResult r;
  r.scores = ad::matmul_nt(hypothesis, items);
  r.probs = nn::masked_softmax(r.scores, item_mask, items_per_frame);
  r.attended = ad::block_attend(r.probs, items, items_per_frame);
  return r;
}

ad::Var video_text_fusion(const ad::Var& sub_attended, const ad::Var& vis_attended, const nn::Linear& fusion) {
  if (sub_attended.rows() != vis_attended.rows() || sub_attended.cols() != vis_attended.cols()) {
    throw ShapeError("video_text_fusion: attended representations differ in shape");
  }
  const std::array<ad::Var, 3> parts{sub_attended, vis_attended, ad::hadamard(sub_attended, vis_attended)};
  return nn::linear(ad::concat_cols(parts), fusion);
}

ad::Var fuse_and_encode(const ad::Var& fused, const Mask& word_mask, const Mask& frame_mask,
                        std::span<const nn::ConvUnitParams> units) {
  const auto words = static_cast<Eigen::Index>(word_mask.size());
  const auto frames = static_cast<Eigen::Index>(frame_mask.size());
  if (words == 0 || fused.rows() != words * frames) throw ShapeError("fuse_and_encode: fused rows != frames * words");
  const ad::Var pooled = ad::max_rows_segments(fused, words, tile(word_mask, static_cast<size_t>(frames)));
  return nn::conv_encoder(pooled, frame_mask, units, /*use_pe=*/true, frames);
}

std::pair<ad::Var, ad::Var> span_probabilities(const ad::Var& fused_seq, const Mask& frame_mask, const SpanHead& head) {
  const Eigen::Index T = fused_seq.rows();
  const ad::Var start = ad::transpose(nn::linear(fused_seq, head.start));
  const ad::Var end = ad::transpose(nn::linear(fused_seq, head.end));
  return {nn::masked_softmax(start, frame_mask, T), nn::masked_softmax(end, frame_mask, T)};
}

SpanProposal best_span(std::span<const double> p_start, std::span<const double> p_end) {
  if (p_start.empty() || p_start.size() != p_end.size()) throw ContractViolation("best_span: distributions differ in length");
  SpanProposal best{{0, 0}, p_start[0] * p_end[0]};
  int running = 0;  // earliest argmax of p_start[0..ed]
  for (int ed = 0; ed < static_cast<int>(p_end.size()); ++ed) {
    if (p_start[static_cast<size_t>(ed)] > p_start[static_cast<size_t>(running)]) running = ed;
    // With p_end[ed] == 0 every start ties at zero; the smallest start wins.
    const int st = p_end[static_cast<size_t>(ed)] > 0.0 ? running : 0;
    const double c = p_start[static_cast<size_t>(st)] * p_end[static_cast<size_t>(ed)];
    if (c > best.confidence || (c == best.confidence && st < best.span.start_idx)) best = {{st, ed}, c};
  }
  return best;
}

std::vector<SpanProposal> propose_spans(std::span<const double> p_start, std::span<const double> p_end, int top_n) {
  const SpanProposal top = best_span(p_start, p_end);
  std::vector<SpanProposal> out{top};
  if (top_n <= 1) return out;
  const int T = static_cast<int>(p_start.size());
  std::vector<SpanProposal> rest;
  rest.reserve(static_cast<size_t>(T * (T + 1) / 2));
  for (int st = 0; st < T; ++st) {
    for (int ed = st; ed < T; ++ed) {
      if (st == top.span.start_idx && ed == top.span.end_idx) continue;
      rest.push_back({{st, ed}, p_start[static_cast<size_t>(st)] * p_end[static_cast<size_t>(ed)]});
    }
  }
  const size_t keep = std::min(rest.size(), static_cast<size_t>(top_n - 1));
  std::partial_sort(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(keep), rest.end(),
                    [](const SpanProposal& a, const SpanProposal& b) {
                      if (a.confidence != b.confidence) return a.confidence > b.confidence;
                      return std::tie(a.span.start_idx, a.span.end_idx) < std::tie(b.span.start_idx, b.span.end_idx);
                    });
  out.insert(out.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

std::vector<TimeSpan> build_training_proposals(std::span<const SpanProposal> proposals, const TimeSpan& gt_span,
                                               double iou_threshold, int cap) {
  std::vector<TimeSpan> out{gt_span};
  for (const SpanProposal& p : proposals) {
    if (static_cast<int>(out.size()) >= cap) break;
    if (span_iou(p.span, gt_span) < iou_threshold) continue;
    if (std::find(out.begin(), out.end(), p.span) != out.end()) continue;
    out.push_back(p.span);
  }
  return out;
}

ad::Var pool_local_global(const ad::Var& encoded, const TimeSpan& span, const Mask& frame_mask) {
  const auto T = static_cast<int>(frame_mask.size());
  if (encoded.rows() != T) throw ShapeError("pool_local_global: mask length");
  if (!span.valid() || span.end_idx >= T || !frame_mask[static_cast<size_t>(span.end_idx)]) {
    throw ContractViolation("pool_local_global: span outside the valid frames");
  }
  Mask local(frame_mask.size(), 0);
  for (int t = span.start_idx; t <= span.end_idx; ++t) local[static_cast<size_t>(t)] = frame_mask[static_cast<size_t>(t)];
  const std::array<ad::Var, 2> parts{nn::masked_maxpool(encoded, local), nn::masked_maxpool(encoded, frame_mask)};
  return ad::concat_cols(parts);
}

ad::Var local_global_pool(const ad::Var& fused_seq, const TimeSpan& span, const Mask& frame_mask,
                          const nn::Linear& layer) {
  return pool_local_global(nn::linear(fused_seq, layer), span, frame_mask);
}

ad::Var answer_scores(std::span<const ad::Var> representations, const nn::Linear& head) {
  if (representations.size() != kNumAnswers) throw ContractViolation("answer_scores: expected five hypotheses");
  std::vector<ad::Var> logits;
  for (const ad::Var& g : representations) logits.push_back(nn::linear(g, head));
  return nn::masked_softmax(ad::concat_cols(logits), Mask(kNumAnswers, 1), kNumAnswers);
}

std::vector<BoxPick> predict_boxes(std::span<const double> attention_row, double threshold) {
  std::vector<BoxPick> out;
  for (size_t i = 0; i < attention_row.size(); ++i) {
    if (attention_row[i] > threshold) out.push_back({static_cast<int>(i), attention_row[i]});
  }
  return out;
}

StageModel::StageModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  const auto problems = validate_config(cfg_);
  if (!problems.empty()) throw ConfigError("model config: " + problems.front());
}

StageGraph StageModel::build(ad::Tape& tape, const BoundParams& params, const PackedExample& p, Mode mode,
                             int gt_answer, TimeSpan gt_span) const {
  const nn::Linear text_proj = nn::bind_linear(params, "text_proj");
  const nn::Linear vis_proj = nn::bind_linear(params, "vis_proj");
  const auto text_units = nn::bind_conv_encoder(params, "text_enc", cfg_.n_conv);
  const auto vis_units = nn::bind_conv_encoder(params, "vis_enc", cfg_.n_conv);
  const auto fused_units = nn::bind_conv_encoder(params, "fused_enc", cfg_.n_conv);
  const nn::Linear fusion = nn::bind_linear(params, "fusion");
  const SpanHead head{nn::bind_linear(params, "span_start"), nn::bind_linear(params, "span_end")};
  const nn::Linear span_repr = nn::bind_linear(params, "span_repr");
  const nn::Linear answer = nn::bind_linear(params, "answer");

  const ad::Var hyp = nn::conv_encoder(nn::linear_relu_project(tape.constant(p.hypothesis_features), text_proj),
                                       p.hypothesis_mask, text_units, true, p.hypothesis_pad);
  const ad::Var sub = nn::conv_encoder(nn::linear_relu_project(tape.constant(p.subtitle_features), text_proj),
                                       p.subtitle_mask, text_units, true, p.subtitle_pad);
  const ad::Var vis = nn::conv_encoder(nn::linear_relu_project(tape.constant(p.object_features), vis_proj),
                                       p.object_mask, vis_units, false, p.objects_pad);

  StageGraph g;
  std::array<ad::Var, kNumAnswers> encoded;
  for (int k = 0; k < kNumAnswers; ++k) {
    const auto ku = static_cast<size_t>(k);
    const ad::Var h = ad::slice_rows(hyp, k * p.hypothesis_pad, p.hypothesis_pad);
    const Mask words = slice(p.hypothesis_mask, static_cast<size_t>(k * p.hypothesis_pad), static_cast<size_t>(p.hypothesis_pad));
    const AttentionResult va = qa_guided_attention(h, vis, p.object_mask, p.objects_pad);
    const AttentionResult sa = qa_guided_attention(h, sub, p.subtitle_mask, p.subtitle_pad);
    const ad::Var fused = video_text_fusion(sa.attended, va.attended, fusion);
    const ad::Var seq = fuse_and_encode(fused, words, p.frame_mask, fused_units);
    std::tie(g.start_probs[ku], g.end_probs[ku]) = span_probabilities(seq, p.frame_mask, head);
    g.object_scores[ku] = va.scores;
    g.object_attention[ku] = va.probs;
    encoded[ku] = nn::linear(seq, span_repr);
    g.proposals[ku] = propose_spans(row_values(g.start_probs[ku], p.num_frames),
                                    row_values(g.end_probs[ku], p.num_frames), cfg_.proposal_top_n);
  }

  std::array<ad::Var, kNumAnswers> reps;
  for (int k = 0; k < kNumAnswers; ++k) {
    const auto ku = static_cast<size_t>(k);
    reps[ku] = pool_local_global(encoded[ku], g.proposals[ku].front().span, p.frame_mask);
  }
  if (mode == Mode::kInfer) {
    g.answer_probs = answer_scores(reps, answer);
    g.answer_probs_per_proposal = {g.answer_probs};
    return g;
  }

  if (gt_answer < 0 || gt_answer >= kNumAnswers) throw ContractViolation("build: GT answer out of range");
  if (!gt_span.valid() || gt_span.end_idx >= p.num_frames) throw ContractViolation("build: GT span out of range");
  const auto gu = static_cast<size_t>(gt_answer);
  g.training_spans = build_training_proposals(g.proposals[gu], gt_span, cfg_.iou_positive_threshold,
                                              cfg_.max_train_proposals);
  for (const TimeSpan& s : g.training_spans) {
    reps[gu] = pool_local_global(encoded[gu], s, p.frame_mask);
    g.answer_probs_per_proposal.push_back(answer_scores(reps, answer));
  }
  g.answer_probs = g.answer_probs_per_proposal.front();
  return g;
}

ModelOutput StageModel::extract(const StageGraph& g, const PackedExample& p) const {
  ModelOutput out;
  const int T = p.num_frames;
  for (int k = 0; k < kNumAnswers; ++k) out.answer_probs[static_cast<size_t>(k)] = g.answer_probs.value()(0, k);
  out.start_probs.resize(kNumAnswers, T);
  out.end_probs.resize(kNumAnswers, T);
  for (int k = 0; k < kNumAnswers; ++k) {
    const auto ku = static_cast<size_t>(k);
    out.start_probs.row(k) = g.start_probs[ku].value().leftCols(T);
    out.end_probs.row(k) = g.end_probs[ku].value().leftCols(T);
    out.proposals[ku] = g.proposals[ku];
    const int len = p.hypothesis_lengths[ku];
    for (int t = 0; t < T; ++t) {
      const int n = p.object_counts[static_cast<size_t>(t)];
      out.attention_raw[ku].push_back(g.object_scores[ku].value().block(0, t * p.objects_pad, len, n));
      out.attention[ku].push_back(g.object_attention[ku].value().block(0, t * p.objects_pad, len, n));
    }
  }
  out.training_spans = g.training_spans;
  return out;
}

ModelOutput StageModel::forward(const QAExample& ex, const ParamStore& params, Mode mode,
                                const PaddingSpec& padding) const {
  const PackedExample packed = pack_example(ex, cfg_, padding);
  ad::Tape tape(/*record=*/false);
  const BoundParams bound(tape, params);
  const StageGraph g = build(tape, bound, packed, mode, ex.gt_answer_idx, ex.gt_span);
  return extract(g, packed);
}

}  // namespace stvqa
