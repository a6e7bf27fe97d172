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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles.h"
#include "stvqa/autodiff.hpp"
#include "stvqa/core_types.hpp"
#include "stvqa/ingest.hpp"
#include "stvqa/metrics.hpp"
#include "stvqa/nn_blocks.hpp"
#include "stvqa/objectives.hpp"
#include "stvqa/params.hpp"
#include "stvqa/rng.hpp"
#include "stvqa/stage_model.hpp"
#include "stvqa/trainer.hpp"

namespace {

using stvqa::Matrix;
using stvqa::Rng;
namespace ad = stvqa::ad;
namespace nn = stvqa::nn;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* name;
  double time_limit_sec;  // 0: none
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double s = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s * rng.normal();
  return m;
}

std::vector<double> random_distribution(int n, Rng& rng, bool coarse) {
  std::vector<double> p(static_cast<size_t>(n));
  double total = 0.0;
  for (double& x : p) {
    x = coarse ? static_cast<double>(rng.uniform_int(0, 3)) : rng.uniform();
    total += x;
  }
  if (total == 0.0) {
    p[0] = 1.0;
    total = 1.0;
  }
  for (double& x : p) x /= total;
  return p;
}

Outcome dp_matches_brute_force() {
  Rng rng(2024);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int T = static_cast<int>(rng.uniform_int(1, 40));
    const bool coarse = trial % 2 == 1;  // many exact ties
    const auto ps = random_distribution(T, rng, coarse);
    const auto pe = random_distribution(T, rng, coarse);
    const auto got = stvqa::propose_spans(ps, pe, 5).front();
    const oracle::Span want = oracle::brute_force_best_span(ps, pe);
    if (got.span.start_idx != want.st || got.span.end_idx != want.ed || got.confidence != want.confidence) ++mismatches;
  }
  return {mismatches == 0, fmt("%d of 200 mismatches", mismatches)};
}

Outcome map_matches_pascal_oracle() {
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n_classes = static_cast<int>(rng.uniform_int(1, 5));
    const int n_keys = static_cast<int>(rng.uniform_int(1, 4));
    auto random_box = [&] {
      const double x = rng.uniform(0, 8), y = rng.uniform(0, 8);
      return stvqa::BoundingBox{x, y, x + rng.uniform(0.5, 4), y + rng.uniform(0.5, 4)};
    };
    auto jitter = [&](const stvqa::BoundingBox& b) {
      const double s = rng.uniform(0, 0.6);
      return stvqa::BoundingBox{b.x1 + s * rng.normal() * 0.3, b.y1 + s * rng.normal() * 0.3, b.x2 + s * rng.normal() * 0.3,
                                b.y2 + s * rng.normal() * 0.3};
    };
    std::vector<stvqa::GroundTruthBox> gts;
    std::vector<stvqa::ScoredBox> preds;
    const int n_gt = static_cast<int>(rng.uniform_int(1, 20));
    for (int i = 0; i < n_gt; ++i) {
      gts.push_back({"c" + std::to_string(rng.uniform_int(0, n_classes - 1)), "k" + std::to_string(rng.uniform_int(0, n_keys - 1)),
                     random_box()});
    }
    const int n_pred = static_cast<int>(rng.uniform_int(0, 20));
    for (int i = 0; i < n_pred; ++i) {
      const double score = trial % 3 == 0 ? static_cast<double>(rng.uniform_int(0, 4)) / 4.0 : rng.uniform();
      if (rng.uniform() < 0.6) {
        const auto& g = gts[static_cast<size_t>(rng.uniform_int(0, n_gt - 1))];
        const bool wrong_class = rng.uniform() < 0.1;
        preds.push_back({wrong_class ? "c" + std::to_string(rng.uniform_int(0, n_classes - 1)) : g.cls, g.key, jitter(g.box), score});
      } else {
        preds.push_back({"c" + std::to_string(rng.uniform_int(0, n_classes - 1)),
                         "k" + std::to_string(rng.uniform_int(0, n_keys - 1)), random_box(), score});
      }
    }
    std::vector<oracle::Detection> od;
    std::vector<oracle::Truth> ot;
    for (const auto& p : preds) od.push_back({p.cls, p.key, {p.box.x1, p.box.y1, p.box.x2, p.box.y2}, p.score});
    for (const auto& g : gts) ot.push_back({g.cls, g.key, {g.box.x1, g.box.y1, g.box.x2, g.box.y2}});
    const double got = stvqa::grounding_map(preds, gts, 0.5);
    const double want = oracle::pascal_map(od, ot, 0.5);
    worst = std::max(worst, std::fabs(got - want));
  }
  return {worst <= 1e-9, fmt("max |diff| %.3g over 100 instances", worst)};
}

Outcome closed_form_losses() {
  const double lse = stvqa::lse_pair_loss(0.7, 0.7);
  const std::vector<double> uniform5(5, 0.2), uniform4(4, 0.25);
  const double ce = stvqa::answer_cross_entropy(uniform5, 3);
  const double span = stvqa::span_cross_entropy(uniform4, uniform4, 1, 2);
  const stvqa::ModelConfig cfg;
  const double total = stvqa::total_loss(1, 1, 1, cfg.w_att, cfg.w_span).total;
  const bool ok = std::fabs(lse - std::log(2.0)) <= 1e-9 && std::fabs(ce - std::log(5.0)) <= 1e-9 &&
                  std::fabs(span - std::log(4.0)) <= 1e-9 && std::fabs(total - 1.6) <= 1e-12;
  return {ok, fmt("lse %.12f ce %.12f span %.12f total %.15f", lse, ce, span, total)};
}

// Tape gradients of `f` at `inputs` against central differences.
oracle::FiniteDifferenceStats check_graph(const std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>& f,
                                          const std::vector<Matrix>& inputs) {
  std::vector<Eigen::MatrixXd> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const Matrix& m : inputs) vars.push_back(tape.variable(m));
    tape.backward(f(tape, vars));
    for (size_t i = 0; i < vars.size(); ++i) {
      analytic.push_back(vars[i].grad().size() ? Eigen::MatrixXd(vars[i].grad())
                                               : Eigen::MatrixXd::Zero(inputs[i].rows(), inputs[i].cols()));
    }
  }
  std::vector<Eigen::MatrixXd> point(inputs.begin(), inputs.end());
  return oracle::compare_with_central_differences(
      [&](const std::vector<Eigen::MatrixXd>& xs) {
        ad::Tape tape(false);
        std::vector<ad::Var> vars;
        for (const auto& m : xs) vars.push_back(tape.constant(Matrix(m)));
        return f(tape, vars).scalar();
      },
      point, analytic, 1e-5, 1e-4);
}

ad::Var probe(ad::Tape& tape, const ad::Var& v, uint64_t seed) {
  Rng rng(seed);
  return ad::sum(ad::hadamard(v, tape.constant(random_matrix(v.rows(), v.cols(), rng))));
}

// The full objective on a T=4, N_o=3, L<=3 example; every parameter checked.
oracle::FiniteDifferenceStats check_total_loss() {
  stvqa::ModelConfig cfg;
  cfg.d = 4;
  cfg.d_vis = 3;
  cfg.d_txt = 4;
  cfg.n_conv = 1;
  stvqa::SynthSpec spec;
  spec.n_examples = 1;
  spec.d_vis = cfg.d_vis;
  spec.d_txt = cfg.d_txt;
  spec.min_frames = spec.max_frames = 4;
  spec.min_objects = spec.max_objects = 3;
  spec.min_question_tokens = spec.max_question_tokens = 1;
  spec.min_sentence_tokens = spec.max_sentence_tokens = 2;
  stvqa::QAExample ex;
  for (uint64_t seed = 0;; ++seed) {
    ex = stvqa::generate_synthetic_dataset(spec, seed).front();
    bool short_enough = true;
    for (int k = 0; k < stvqa::kNumAnswers; ++k) short_enough &= stvqa::make_hypothesis(ex, k).length() <= 3;
    if (short_enough) break;
  }
  const stvqa::StageModel model(cfg);
  const stvqa::ParamStore params = model.init_params();
  const stvqa::PackedExample packed = stvqa::pack_example(ex, cfg);
  Rng rng(8);
  const auto pairs = stvqa::sample_attention_pairs(stvqa::build_attention_targets(ex), 2, rng);

  auto objective = [&](const stvqa::ParamStore& p, bool record) {
    ad::Tape tape(record);
    stvqa::BoundParams bound(tape, p);
    const auto g = model.build(tape, bound, packed, stvqa::Mode::kTrain, ex.gt_answer_idx, ex.gt_span);
    const ad::Var total = stvqa::example_loss(g, packed, ex, pairs, cfg).total;
    std::vector<Eigen::MatrixXd> grads;
    if (record) {
      tape.backward(total);
      const stvqa::ParamStore gp = bound.gradients(p);
      for (size_t i = 0; i < gp.size(); ++i) grads.emplace_back(gp.value(i));
    }
    return std::make_pair(total.scalar(), grads);
  };
  std::vector<Eigen::MatrixXd> point;
  for (size_t i = 0; i < params.size(); ++i) point.emplace_back(params.value(i));
  return oracle::compare_with_central_differences(
      [&](const std::vector<Eigen::MatrixXd>& xs) {
        stvqa::ParamStore p = params;
        for (size_t i = 0; i < xs.size(); ++i) p.value(i) = xs[i];
        return objective(p, false).first;
      },
      point, objective(params, true).second, 1e-5, 1e-4);
}

Outcome gradient_checks() {
  Rng rng(31);
  std::string detail;
  bool ok = true;
  auto record = [&](const char* what, const oracle::FiniteDifferenceStats& s) {
    ok &= s.fraction() >= 0.99;
    detail += fmt("%s %d/%d; ", what, s.within_tolerance, s.coordinates);
  };

  {
    const int d = 4, T = 4, k = 7;
    const stvqa::Mask mask{1, 1, 1, 0};
    std::vector<Matrix> in{random_matrix(k, d, rng), random_matrix(1, d, rng), random_matrix(d, d, rng),
                           random_matrix(1, d, rng), (random_matrix(1, d, rng, 0.5).array() + 1.0).matrix(),
                           random_matrix(1, d, rng), random_matrix(T, d, rng)};
    record("conv_unit", check_graph(
                            [&](ad::Tape& t, const std::vector<ad::Var>& v) {
                              return probe(t, nn::conv_unit(v[6], mask, {v[0], v[1], v[2], v[3], v[4], v[5]}, T), 1);
                            },
                            in));
  }
  {
    const int L = 3, d = 4;
    record("fusion", check_graph(
                         [&](ad::Tape& t, const std::vector<ad::Var>& v) {
                           return probe(t, stvqa::video_text_fusion(v[0], v[1], {v[2], v[3]}), 2);
                         },
                         {random_matrix(L, d, rng), random_matrix(L, d, rng), random_matrix(3 * d, d, rng, 0.5),
                          random_matrix(1, d, rng)}));
  }
  {
    const int T = 4, d = 4;
    const stvqa::Mask frames{1, 1, 1, 1};
    record("span_head", check_graph(
                            [&](ad::Tape&, const std::vector<ad::Var>& v) {
                              const auto [ps, pe] =
                                  stvqa::span_probabilities(v[0], frames, {{v[1], v[2]}, {v[3], v[4]}});
                              return stvqa::span_cross_entropy(ps, pe, 1, 2);
                            },
                            {random_matrix(T, d, rng), random_matrix(d, 1, rng), random_matrix(1, 1, rng),
                             random_matrix(d, 1, rng), random_matrix(1, 1, rng)}));
  }
  {
    const int d = 4;
    std::vector<Matrix> in;
    for (int k = 0; k < stvqa::kNumAnswers; ++k) in.push_back(random_matrix(1, 2 * d, rng));
    in.push_back(random_matrix(2 * d, 1, rng));
    in.push_back(random_matrix(1, 1, rng));
    record("answer_head", check_graph(
                              [&](ad::Tape&, const std::vector<ad::Var>& v) {
                                const std::vector<ad::Var> reps(v.begin(), v.begin() + stvqa::kNumAnswers);
                                return stvqa::answer_cross_entropy(stvqa::answer_scores(reps, {v[5], v[6]}), 2);
                              },
                              in));
  }
  record("total_loss", check_total_loss());
  return {ok, detail};
}

std::vector<stvqa::QAExample> synthetic(int n, uint64_t seed) {
  stvqa::SynthSpec spec;
  spec.n_examples = n;
  return stvqa::generate_synthetic_dataset(spec, seed);
}

Outcome overfit() {
  const auto data = synthetic(16, 11);
  stvqa::ModelConfig cfg;
  cfg.max_epochs = 200;
  cfg.early_stop_patience = 0;
  cfg.seed = 11;
  stvqa::EpochRecord reached;
  bool met = false;
  stvqa::TrainOptions opt;
  opt.on_epoch = [&](const stvqa::EpochRecord& r) {
    met = r.val_qa_acc >= 0.95 && r.val_temp_miou >= 0.8 && r.val_attention_precision >= 0.8;
    reached = r;
    return !met;
  };
  stvqa::train(data, data, cfg, opt);
  return {met, fmt("epoch %d: qa %.3f miou %.3f att %.3f", reached.epoch, reached.val_qa_acc, reached.val_temp_miou,
                   reached.val_attention_precision)};
}

std::string output_invariant_violation(const stvqa::ModelOutput& out, const stvqa::QAExample& ex, const stvqa::ModelConfig& cfg) {
  const int T = ex.num_frames();
  double sum = 0.0;
  for (double p : out.answer_probs) {
    if (!(p >= 0.0 && p <= 1.0)) return "answer prob out of range";
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9) return "answer probs do not sum to 1";
  if (out.start_probs.rows() != stvqa::kNumAnswers || out.start_probs.cols() != T) return "start_probs shape";
  for (int k = 0; k < stvqa::kNumAnswers; ++k) {
    if (std::fabs(out.start_probs.row(k).sum() - 1.0) > 1e-9 || std::fabs(out.end_probs.row(k).sum() - 1.0) > 1e-9) {
      return "span distribution does not sum to 1";
    }
    const auto& props = out.proposals[static_cast<size_t>(k)];
    if (props.empty() || static_cast<int>(props.size()) > cfg.proposal_top_n) return "proposal count";
    for (size_t i = 0; i < props.size(); ++i) {
      const auto& p = props[i];
      if (!(0 <= p.span.start_idx && p.span.start_idx <= p.span.end_idx && p.span.end_idx < T)) return "proposal span";
      if (!(p.confidence > 0.0 && p.confidence <= 1.0)) return "proposal confidence";
      if (i > 0 && props[i - 1].confidence < p.confidence) return "proposals not sorted";
    }
    const int len = stvqa::make_hypothesis(ex, k).length();
    for (int t = 0; t < T; ++t) {
      const Matrix& a = out.attention[static_cast<size_t>(k)][static_cast<size_t>(t)];
      const auto n = static_cast<Eigen::Index>(ex.frames[static_cast<size_t>(t)].objects.size());
      if (a.rows() != len || a.cols() != n) return "attention shape";
      for (Eigen::Index r = 0; r < a.rows() && n > 0; ++r) {
        if (std::fabs(a.row(r).sum() - 1.0) > 1e-9 || a.row(r).minCoeff() < 0.0) return "attention row not a distribution";
      }
    }
  }
  return {};
}

Outcome normalization_and_masking() {
  stvqa::ModelConfig cfg;
  cfg.seed = 5;
  const stvqa::StageModel model(cfg);
  const stvqa::ParamStore params = model.init_params();
  double worst = 0.0;
  for (const stvqa::QAExample& ex : synthetic(8, 21)) {
    const auto base = model.forward(ex, params, stvqa::Mode::kInfer);
    if (const std::string v = output_invariant_violation(base, ex, cfg); !v.empty()) return {false, ex.qid + ": " + v};
    const auto train = model.forward(ex, params, stvqa::Mode::kTrain);
    if (const std::string v = output_invariant_violation(train, ex, cfg); !v.empty()) return {false, ex.qid + ": " + v};
    for (double fill : {0.0, -3.0, 50.0}) {
      stvqa::PaddingSpec pad;
      pad.frames = ex.num_frames() + 4;
      pad.objects = cfg.max_objects;
      pad.subtitle_tokens = 24;
      pad.hypothesis_tokens = 20;
      pad.fill = fill;
      const auto padded = model.forward(ex, params, stvqa::Mode::kInfer, pad);
      for (int k = 0; k < stvqa::kNumAnswers; ++k) {
        worst = std::max(worst, std::fabs(base.answer_probs[static_cast<size_t>(k)] - padded.answer_probs[static_cast<size_t>(k)]));
      }
    }
  }
  return {worst < 1e-6, fmt("invariants hold; max padding change %.3g", worst)};
}

Outcome chance_level() {
  const auto data = synthetic(500, 99);
  stvqa::ModelConfig cfg;
  cfg.seed = 99;
  const stvqa::StageModel model(cfg);
  const stvqa::ParamStore params = model.init_params();
  int correct = 0;
  for (const auto& ex : data) correct += model.forward(ex, params, stvqa::Mode::kInfer).predicted_answer() == ex.gt_answer_idx;
  const double acc = correct / 500.0;
  const double bound = 3.0 * std::sqrt(0.2 * 0.8 / 500.0);
  return {std::fabs(acc - 0.2) <= bound, fmt("acc %.4f, allowed 0.2 +/- %.4f", acc, bound)};
}

Outcome metric_geometry() {
  const double s = stvqa::span_iou({2, 6}, {4, 8});
  const double b = stvqa::box_iou({0, 0, 2, 2}, {1, 1, 3, 3});
  const double s_oracle = oracle::span_iou(2, 6, 4, 8);
  const double b_oracle = oracle::box_iou({0, 0, 2, 2}, {1, 1, 3, 3});
  auto asa = [](int pred, int st, int ed) {
    stvqa::QuestionRecord r;
    r.predicted_answer = pred;
    r.gt_answer = 1;
    r.predicted_span = {st, ed};
    r.gt_span = {0, 19};
    return stvqa::answer_span_joint_accuracy(std::vector<stvqa::QuestionRecord>{r}, 0.5);
  };
  // Spans inside a 20-frame GT: 11 frames -> IoU 0.55, 8 frames -> 0.4.
  const double a1 = asa(1, 0, 10), a2 = asa(1, 0, 7), a3 = asa(2, 0, 19);
  const bool ok = std::fabs(s - 3.0 / 7.0) <= 1e-12 && std::fabs(b - 1.0 / 7.0) <= 1e-12 &&
                  std::fabs(s_oracle - 3.0 / 7.0) <= 1e-12 && std::fabs(b_oracle - 1.0 / 7.0) <= 1e-12 && a1 == 1.0 &&
                  a2 == 0.0 && a3 == 0.0;
  return {ok, fmt("span %.12f box %.12f asa (%.0f,%.0f,%.0f)", s, b, a1, a2, a3)};
}

Outcome determinism() {
  const auto train_set = synthetic(8, 3);
  const auto val_set = synthetic(6, 4);
  stvqa::ModelConfig cfg;
  cfg.max_epochs = 3;
  cfg.batch_size = 3;
  cfg.seed = 17;
  auto run = [&] {
    const auto r = stvqa::train(train_set, val_set, cfg);
    return std::make_pair(stvqa::history_to_jsonl(r.history),
                          stvqa::eval_report_to_json(stvqa::evaluate(val_set, r.best_params, cfg)));
  };
  const auto a = run();
  const auto b = run();
  return {a == b, fmt("history %zu bytes, report %zu bytes", a.first.size(), a.second.size())};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"DP-brute-force equivalence", 5, dp_matches_brute_force},
      {"mAP matches PASCAL oracle", 10, map_matches_pascal_oracle},
      {"Closed-form losses", 0, closed_form_losses},
      {"Gradient checks", 60, gradient_checks},
      {"Overfit 16 planted examples", 300, overfit},
      {"Normalization and masking", 0, normalization_and_masking},
      {"Chance-level sanity", 0, chance_level},
      {"Metric geometry", 0, metric_geometry},
      {"Determinism", 0, determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit_sec > 0 && secs >= c.time_limit_sec) {
      o.pass = false;
      o.detail += fmt(" (over %.0f s limit)", c.time_limit_sec);
    }
    failures += !o.pass;
    std::printf("[%s] %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
