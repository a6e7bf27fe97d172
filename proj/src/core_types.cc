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

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>
#include <variant>

#include "stvqa/errors.hpp"

namespace stvqa {

namespace {

bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

using FieldPtr = std::variant<int ModelConfig::*, double ModelConfig::*, uint64_t ModelConfig::*>;

struct ConfigField {
  const char* key;
  FieldPtr ptr;
};

constexpr ConfigField kConfigFields[] = {
    {"d", &ModelConfig::d},
    {"d_vis", &ModelConfig::d_vis},
    {"d_txt", &ModelConfig::d_txt},
    {"max_objects", &ModelConfig::max_objects},
    {"n_conv", &ModelConfig::n_conv},
    {"kernel_input", &ModelConfig::kernel_input},
    {"kernel_fusion", &ModelConfig::kernel_fusion},
    {"w_att", &ModelConfig::w_att},
    {"w_span", &ModelConfig::w_span},
    {"box_score_threshold", &ModelConfig::box_score_threshold},
    {"iou_positive_threshold", &ModelConfig::iou_positive_threshold},
    {"negatives_per_positive", &ModelConfig::negatives_per_positive},
    {"proposal_top_n", &ModelConfig::proposal_top_n},
    {"max_train_proposals", &ModelConfig::max_train_proposals},
    {"lr", &ModelConfig::lr},
    {"weight_decay", &ModelConfig::weight_decay},
    {"adam_beta1", &ModelConfig::adam_beta1},
    {"adam_beta2", &ModelConfig::adam_beta2},
    {"adam_eps", &ModelConfig::adam_eps},
    {"batch_size", &ModelConfig::batch_size},
    {"max_epochs", &ModelConfig::max_epochs},
    {"early_stop_patience", &ModelConfig::early_stop_patience},
    {"seed", &ModelConfig::seed},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view text, std::string_view key) {
  T out{};
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || p != end) {
    throw ConfigError("config: bad value for '" + std::string(key) + "': '" + std::string(text) + "'");
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool box_ok(const BoundingBox& b) { return std::isfinite(b.area()) && b.valid() && b.area() > 0.0; }

std::vector<std::string> validate_impl(const QAExample& ex, const ModelConfig* cfg) {
  std::vector<std::string> out;
  const int T = ex.num_frames();
  const int n_answers = static_cast<int>(ex.answer_tokens.size());

  if (ex.qid.empty()) out.push_back("qid: must be non-empty");
  if (n_answers != kNumAnswers) {
    out.push_back("answers: expected " + std::to_string(kNumAnswers) + ", got " + std::to_string(n_answers));
  }
  if (static_cast<int>(ex.answer_features.size()) != n_answers) {
    out.push_back("answer_features: expected one matrix per answer");
  }
  if (ex.question_features.rows() != static_cast<Eigen::Index>(ex.question_tokens.size())) {
    out.push_back("question_features: row count must equal question token count");
  }
  if (cfg && ex.question_features.cols() != cfg->d_txt) out.push_back("question_features: width must equal d_txt");
  for (size_t k = 0; k < ex.answer_features.size() && k < ex.answer_tokens.size(); ++k) {
    const std::string tag = "answer_features[" + std::to_string(k) + "]";
    if (ex.answer_features[k].rows() != static_cast<Eigen::Index>(ex.answer_tokens[k].size())) {
      out.push_back(tag + ": row count must equal answer token count");
    }
    if (cfg && ex.answer_features[k].cols() != cfg->d_txt) out.push_back(tag + ": width must equal d_txt");
    if (ex.question_tokens.size() + ex.answer_tokens[k].size() == 0) {
      out.push_back("hypothesis[" + std::to_string(k) + "]: must contain at least one token");
    }
  }
  if (ex.gt_answer_idx < 0 || ex.gt_answer_idx >= std::max(n_answers, 1) || ex.gt_answer_idx >= kNumAnswers) {
    out.push_back("gt_answer_idx out of range");
  }
  if (T == 0) out.push_back("frames: expected at least one frame");
  if (!ex.gt_span.valid()) out.push_back("gt_span: requires 0 <= start_idx <= end_idx");
  if (ex.gt_span.end_idx >= T) out.push_back("gt_span.end_idx out of range");

  for (int t = 0; t < T; ++t) {
    const FrameRecord& f = ex.frames[static_cast<size_t>(t)];
    const std::string tag = "frames[" + std::to_string(t) + "]";
    if (f.frame_idx != t) out.push_back(tag + ".frame_idx: expected " + std::to_string(t));
    if (cfg && static_cast<int>(f.objects.size()) > cfg->max_objects) {
      out.push_back(tag + ".objects: more than max_objects");
    }
    for (size_t r = 0; r < f.objects.size(); ++r) {
      const ObjectRegionFeature& o = f.objects[r];
      if (!box_ok(o.box)) out.push_back(tag + ".objects[" + std::to_string(r) + "].box: requires x1 < x2 and y1 < y2");
      if (cfg && static_cast<int>(o.feature.size()) != cfg->d_vis) {
        out.push_back(tag + ".objects[" + std::to_string(r) + "].feature: dimension must equal d_vis");
      }
    }
    if (f.subtitle_features.rows() != static_cast<Eigen::Index>(f.subtitle_tokens.size())) {
      out.push_back(tag + ".subtitle_features: row count must equal subtitle token count");
    }
    if (cfg && f.subtitle_features.rows() > 0 && f.subtitle_features.cols() != cfg->d_txt) {
      out.push_back(tag + ".subtitle_features: width must equal d_txt");
    }
  }

  const bool gt_ok = ex.gt_answer_idx >= 0 && ex.gt_answer_idx < n_answers;
  const int gt_len =
      gt_ok ? static_cast<int>(ex.question_tokens.size() + ex.answer_tokens[static_cast<size_t>(ex.gt_answer_idx)].size())
            : 0;
  for (size_t i = 0; i < ex.concept_annotations.size(); ++i) {
    const ConceptAnnotation& c = ex.concept_annotations[i];
    const std::string tag = "concept_annotations[" + std::to_string(i) + "]";
    if (gt_ok && (c.word_index < 0 || c.word_index >= gt_len)) {
      out.push_back(tag + ".word_index: outside GT hypothesis");
    }
    if (!ex.gt_span.contains(c.frame_idx) || c.frame_idx >= T) {
      out.push_back(tag + ".frame_idx: outside gt_span");
    }
    if (c.gt_boxes.empty()) out.push_back(tag + ".gt_boxes: expected at least one box");
    for (const BoundingBox& b : c.gt_boxes) {
      if (!box_ok(b)) {
        out.push_back(tag + ".gt_boxes: requires x1 < x2 and y1 < y2");
        break;
      }
    }
  }
  return out;
}

}  // namespace

bool operator==(const FrameRecord& a, const FrameRecord& b) {
  return a.frame_idx == b.frame_idx && a.objects == b.objects && a.subtitle_tokens == b.subtitle_tokens &&
         same_matrix(a.subtitle_features, b.subtitle_features);
}

bool operator==(const QAExample& a, const QAExample& b) {
  if (a.answer_features.size() != b.answer_features.size()) return false;
  for (size_t k = 0; k < a.answer_features.size(); ++k) {
    if (!same_matrix(a.answer_features[k], b.answer_features[k])) return false;
  }
  return a.qid == b.qid && a.clip_id == b.clip_id && a.question_tokens == b.question_tokens &&
         a.answer_tokens == b.answer_tokens && same_matrix(a.question_features, b.question_features) &&
         a.gt_answer_idx == b.gt_answer_idx && a.gt_span == b.gt_span && a.frames == b.frames &&
         a.concept_annotations == b.concept_annotations && a.image_width == b.image_width &&
         a.image_height == b.image_height;
}

Hypothesis make_hypothesis(const QAExample& ex, int answer_idx) {
  const auto k = static_cast<size_t>(answer_idx);
  if (answer_idx < 0 || k >= ex.answer_tokens.size() || k >= ex.answer_features.size()) {
    throw ContractViolation("make_hypothesis: answer index out of range");
  }
  const Matrix& q = ex.question_features;
  const Matrix& a = ex.answer_features[k];
  if (q.rows() > 0 && a.rows() > 0 && q.cols() != a.cols()) throw ShapeError("make_hypothesis: text widths differ");
  Hypothesis h;
  h.tokens = ex.question_tokens;
  h.tokens.insert(h.tokens.end(), ex.answer_tokens[k].begin(), ex.answer_tokens[k].end());
  const Eigen::Index cols = q.rows() > 0 ? q.cols() : a.cols();
  h.features.resize(q.rows() + a.rows(), cols);
  if (q.rows() > 0) h.features.topRows(q.rows()) = q;
  if (a.rows() > 0) h.features.bottomRows(a.rows()) = a;
  return h;
}

std::string concept_word(const QAExample& ex, const ConceptAnnotation& ann) {
  const size_t q = ex.question_tokens.size();
  const auto w = static_cast<size_t>(ann.word_index);
  if (w < q) return ex.question_tokens[w];
  const auto& ans = ex.answer_tokens.at(static_cast<size_t>(ex.gt_answer_idx));
  return ans.at(w - q);
}

std::string question_type(const QAExample& ex) {
  if (ex.question_tokens.empty()) return "";
  std::string w = ex.question_tokens.front();
  std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return w;
}

int ModelOutput::predicted_answer() const {
  return static_cast<int>(std::max_element(answer_probs.begin(), answer_probs.end()) - answer_probs.begin());
}

std::vector<std::string> validate_config(const ModelConfig& c) {
  std::vector<std::string> out;
  auto positive = [&](int v, const char* name) {
    if (v <= 0) out.push_back(std::string(name) + ": must be positive");
  };
  positive(c.d, "d");
  positive(c.d_vis, "d_vis");
  positive(c.d_txt, "d_txt");
  positive(c.max_objects, "max_objects");
  positive(c.batch_size, "batch_size");
  positive(c.max_epochs, "max_epochs");
  positive(c.proposal_top_n, "proposal_top_n");
  positive(c.max_train_proposals, "max_train_proposals");
  if (c.d % 2 != 0) out.push_back("d: must be even for positional encoding");
  if (c.n_conv < 0) out.push_back("n_conv: must be non-negative");
  if (c.kernel_input <= 0 || c.kernel_input % 2 == 0) out.push_back("kernel_input: must be odd and positive");
  if (c.kernel_fusion <= 0 || c.kernel_fusion % 2 == 0) out.push_back("kernel_fusion: must be odd and positive");
  auto unit = [&](double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) out.push_back(std::string(name) + ": must lie in (0, 1)");
  };
  unit(c.box_score_threshold, "box_score_threshold");
  unit(c.iou_positive_threshold, "iou_positive_threshold");
  unit(c.adam_beta1, "adam_beta1");
  unit(c.adam_beta2, "adam_beta2");
  if (c.negatives_per_positive < 0) out.push_back("negatives_per_positive: must be non-negative");
  if (c.early_stop_patience < 0) out.push_back("early_stop_patience: must be non-negative");
  if (!(c.lr > 0.0)) out.push_back("lr: must be positive");
  if (c.weight_decay < 0.0 || c.w_att < 0.0 || c.w_span < 0.0) out.push_back("weights: must be non-negative");
  if (!(c.adam_eps > 0.0)) out.push_back("adam_eps: must be positive");
  return out;
}

std::string format_config(const ModelConfig& cfg) {
  std::ostringstream os;
  for (const ConfigField& f : kConfigFields) {
    os << f.key << " = ";
    std::visit(
        [&](auto ptr) {
          using T = std::remove_cvref_t<decltype(cfg.*ptr)>;
          if constexpr (std::is_same_v<T, double>) {
            os << format_double(cfg.*ptr);
          } else {
            os << cfg.*ptr;
          }
        },
        f.ptr);
    os << '\n';
  }
  return os.str();
}

ModelConfig parse_config(const std::string& text) {
  ModelConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    const size_t eq = sv.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string_view key = trim(sv.substr(0, eq));
    const std::string_view val = trim(sv.substr(eq + 1));
    const auto it = std::find_if(std::begin(kConfigFields), std::end(kConfigFields),
                                 [&](const ConfigField& f) { return key == f.key; });
    if (it == std::end(kConfigFields)) {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + std::string(key) + "'");
    }
    std::visit(
        [&](auto ptr) {
          using T = std::remove_cvref_t<decltype(cfg.*ptr)>;
          cfg.*ptr = parse_number<T>(val, key);
        },
        it->ptr);
  }
  const auto problems = validate_config(cfg);
  if (!problems.empty()) throw ConfigError("config: " + problems.front());
  return cfg;
}

ModelConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<std::string> validate_example(const QAExample& ex, const ModelConfig& cfg) {
  return validate_impl(ex, &cfg);
}

std::vector<std::string> validate_example(const QAExample& ex) { return validate_impl(ex, nullptr); }

}  // namespace stvqa
