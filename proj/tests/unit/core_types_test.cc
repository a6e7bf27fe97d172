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

#include "stvqa/core_types.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "stvqa/errors.hpp"
#include "test_util.h"

namespace stvqa {
namespace {

QAExample sample_example() { return test::small_dataset(1, 3).front(); }

TEST(TimeSpan, LengthAndContainment) {
  const TimeSpan s{2, 6};
  EXPECT_EQ(s.length(), 5);
  EXPECT_TRUE(s.valid());
  EXPECT_TRUE(s.contains(2));
  EXPECT_TRUE(s.contains(6));
  EXPECT_FALSE(s.contains(7));
  EXPECT_FALSE((TimeSpan{3, 2}).valid());
  EXPECT_FALSE((TimeSpan{-1, 2}).valid());
}

TEST(BoundingBox, AreaAndValidity) {
  EXPECT_DOUBLE_EQ((BoundingBox{0, 0, 2, 3}).area(), 6.0);
  EXPECT_TRUE((BoundingBox{0, 0, 2, 3}).valid());
  EXPECT_FALSE((BoundingBox{2, 0, 2, 3}).valid());
  EXPECT_FALSE((BoundingBox{0, 3, 2, 1}).valid());
}

TEST(ValidateExample, WellFormedSyntheticExampleIsClean) {
  const ModelConfig cfg = test::small_config();
  for (const QAExample& ex : test::small_dataset(8, 11)) {
    EXPECT_TRUE(validate_example(ex, cfg).empty());
    EXPECT_TRUE(validate_example(ex).empty());
  }
}

TEST(ValidateExample, FourAnswers) {
  QAExample ex = sample_example();
  ex.answer_tokens.pop_back();
  ex.answer_features.pop_back();
  if (ex.gt_answer_idx == 4) {
    ex.gt_answer_idx = 0;
    ex.concept_annotations.clear();
  }
  EXPECT_EQ(validate_example(ex), std::vector<std::string>{"answers: expected 5, got 4"});
}

TEST(ValidateExample, SpanEndAtT) {
  QAExample ex = sample_example();
  ex.gt_span.end_idx = ex.num_frames();
  EXPECT_EQ(validate_example(ex), std::vector<std::string>{"gt_span.end_idx out of range"});
}

TEST(ValidateExample, ReportsFieldAndRule) {
  QAExample ex = sample_example();
  ex.gt_answer_idx = 7;
  ex.frames[0].objects.push_back({{5, 5, 1, 1}, std::vector<double>(6, 0.0)});
  ex.concept_annotations.push_back({0, ex.gt_span.end_idx + 1 < ex.num_frames() ? ex.gt_span.end_idx + 1 : -1, {}});
  const auto v = validate_example(ex);
  auto has = [&](const std::string& prefix) {
    return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.rfind(prefix, 0) == 0; });
  };
  EXPECT_TRUE(has("gt_answer_idx"));
  EXPECT_TRUE(has("frames[0].objects["));
  EXPECT_TRUE(has("concept_annotations["));
}

TEST(ValidateExample, DimensionChecksNeedConfig) {
  QAExample ex = sample_example();
  ModelConfig cfg = test::small_config();
  cfg.d_vis += 1;
  EXPECT_TRUE(validate_example(ex).empty());
  EXPECT_FALSE(validate_example(ex, cfg).empty());
}

TEST(ValidateExample, TooManyObjects) {
  QAExample ex = sample_example();
  ModelConfig cfg = test::small_config();
  cfg.max_objects = 1;
  const auto v = validate_example(ex, cfg);
  EXPECT_FALSE(v.empty());
}

TEST(ValidateExample, IsPure) {
  QAExample ex = sample_example();
  ex.gt_span.end_idx = 100;
  EXPECT_EQ(validate_example(ex), validate_example(ex));
}

TEST(ValidateExample, EmptyObjectFrameIsLegal) {
  QAExample ex = sample_example();
  const int outside = ex.gt_span.start_idx > 0 ? 0 : ex.num_frames() - 1;
  if (!ex.gt_span.contains(outside)) {
    ex.frames[static_cast<size_t>(outside)].objects.clear();
    EXPECT_TRUE(validate_example(ex, test::small_config()).empty());
  }
}

TEST(Hypothesis, QuestionThenAnswer) {
  const QAExample ex = sample_example();
  for (int k = 0; k < kNumAnswers; ++k) {
    const Hypothesis h = make_hypothesis(ex, k);
    const auto& a = ex.answer_tokens[static_cast<size_t>(k)];
    ASSERT_EQ(h.length(), static_cast<int>(ex.question_tokens.size() + a.size()));
    EXPECT_EQ(h.tokens.front(), ex.question_tokens.front());
    EXPECT_EQ(h.tokens.back(), a.back());
    EXPECT_EQ(h.features.rows(), h.length());
    EXPECT_TRUE(h.features.topRows(ex.question_features.rows()).isApprox(ex.question_features));
    EXPECT_TRUE(h.features.bottomRows(static_cast<Eigen::Index>(a.size())).isApprox(ex.answer_features[static_cast<size_t>(k)]));
  }
  EXPECT_THROW(make_hypothesis(ex, 5), ContractViolation);
}

TEST(ConceptWord, IndexesGtHypothesis) {
  const QAExample ex = sample_example();
  ASSERT_FALSE(ex.concept_annotations.empty());
  const auto& ann = ex.concept_annotations.front();
  const Hypothesis h = make_hypothesis(ex, ex.gt_answer_idx);
  EXPECT_EQ(concept_word(ex, ann), h.tokens[static_cast<size_t>(ann.word_index)]);
}

TEST(QuestionType, LowercasedFirstWord) {
  QAExample ex = sample_example();
  ex.question_tokens = {"What", "is", "it"};
  EXPECT_EQ(question_type(ex), "what");
  ex.question_tokens.clear();
  EXPECT_EQ(question_type(ex), "");
}

TEST(ModelConfig, DefaultsAreValid) {
  const ModelConfig cfg;
  EXPECT_TRUE(validate_config(cfg).empty());
  EXPECT_EQ(cfg.d, 128);
  EXPECT_EQ(cfg.d_vis, 300);
  EXPECT_EQ(cfg.d_txt, 768);
  EXPECT_EQ(cfg.max_objects, 20);
  EXPECT_EQ(cfg.n_conv, 2);
  EXPECT_EQ(cfg.kernel_input, 7);
  EXPECT_EQ(cfg.kernel_fusion, 5);
  EXPECT_DOUBLE_EQ(cfg.w_att, 0.1);
  EXPECT_DOUBLE_EQ(cfg.w_span, 0.5);
  EXPECT_DOUBLE_EQ(cfg.box_score_threshold, 0.2);
  EXPECT_DOUBLE_EQ(cfg.iou_positive_threshold, 0.5);
  EXPECT_EQ(cfg.negatives_per_positive, 2);
  EXPECT_DOUBLE_EQ(cfg.lr, 1e-3);
  EXPECT_DOUBLE_EQ(cfg.weight_decay, 3e-7);
  EXPECT_EQ(cfg.batch_size, 16);
  EXPECT_EQ(cfg.max_epochs, 100);
  EXPECT_EQ(cfg.early_stop_patience, 5);
}

TEST(ModelConfig, InvariantViolations) {
  ModelConfig cfg;
  cfg.kernel_input = 6;
  cfg.d = 0;
  cfg.box_score_threshold = 1.0;
  EXPECT_EQ(validate_config(cfg).size(), 3u);
}

TEST(ModelConfig, FormatParseRoundTripsAllFields) {
  ModelConfig cfg;
  cfg.d = 64;
  cfg.lr = 0.1 + 0.2;
  cfg.weight_decay = 1.0 / 3.0;
  cfg.seed = 18446744073709551615ULL;
  cfg.early_stop_patience = 0;
  EXPECT_EQ(parse_config(format_config(cfg)), cfg);
}

TEST(ModelConfig, ParseCommentsAndDefaults) {
  const ModelConfig cfg = parse_config("# comment\n\n  lr = 0.005  \nseed=3\n");
  EXPECT_DOUBLE_EQ(cfg.lr, 0.005);
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_EQ(cfg.d, 128);
}

TEST(ModelConfig, ParseErrors) {
  EXPECT_THROW(parse_config("bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("lr 0.1\n"), ConfigError);
  EXPECT_THROW(parse_config("d = abc\n"), ConfigError);
  EXPECT_THROW(parse_config("kernel_input = 4\n"), ConfigError);
  EXPECT_THROW(load_config_file("/nonexistent/stvqa.cfg"), ConfigError);
}

TEST(ModelOutput, PredictedAnswerIsArgmax) {
  ModelOutput out;
  out.answer_probs = {0.1, 0.3, 0.3, 0.2, 0.1};
  EXPECT_EQ(out.predicted_answer(), 1);
}

TEST(Equality, FieldByField) {
  const QAExample a = sample_example();
  QAExample b = a;
  EXPECT_EQ(a, b);
  b.frames[0].subtitle_features(0, 0) += 1e-9;
  EXPECT_FALSE(a == b);
}

}  // namespace
}  // namespace stvqa
