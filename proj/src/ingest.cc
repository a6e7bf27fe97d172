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

#include "stvqa/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"
#include "stvqa/errors.hpp"
#include "stvqa/metrics.hpp"
#include "stvqa/packed_file.hpp"
#include "stvqa/rng.hpp"

namespace stvqa {

namespace fs = std::filesystem;
using nlohmann::json;

int seconds_to_frame_idx(double t_sec, int num_frames) {
  if (!(t_sec >= 0.0) || !std::isfinite(t_sec)) throw std::invalid_argument("seconds_to_frame_idx: t_sec must be >= 0");
  if (num_frames < 1) throw std::invalid_argument("seconds_to_frame_idx: need at least one frame");
  const double idx = std::round(t_sec / kSecondsPerFrame);
  return static_cast<int>(std::clamp(idx, 0.0, static_cast<double>(num_frames - 1)));
}

TimeSpan seconds_to_span(double start_sec, double end_sec, int num_frames) {
  int st = seconds_to_frame_idx(start_sec, num_frames);
  int ed = seconds_to_frame_idx(end_sec, num_frames);
  if (st > ed) std::swap(st, ed);
  return {st, ed};
}

std::vector<std::vector<size_t>> align_subtitles(std::span<const double> frame_times,
                                                 std::span<const SubtitleSentence> sentences) {
  // Temporal rank of every sentence; ties resolved by content so the result
  // never depends on input order.
  std::vector<size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const auto& sa = sentences[a];
    const auto& sb = sentences[b];
    return std::tie(sa.start_sec, sa.end_sec, sa.tokens) < std::tie(sb.start_sec, sb.end_sec, sb.tokens);
  });

  std::vector<std::vector<size_t>> windows;
  windows.reserve(frame_times.size());
  for (double t : frame_times) {
    // Positions in `order` of the nearest two midpoints.
    std::vector<size_t> ranks(order.size());
    std::iota(ranks.begin(), ranks.end(), size_t{0});
    const size_t keep = std::min<size_t>(2, ranks.size());
    std::partial_sort(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(keep), ranks.end(),
                      [&](size_t a, size_t b) {
                        const double da = std::abs(sentences[order[a]].midpoint() - t);
                        const double db = std::abs(sentences[order[b]].midpoint() - t);
                        return da != db ? da < db : a < b;
                      });
    ranks.resize(keep);
    std::sort(ranks.begin(), ranks.end());
    std::vector<size_t> w;
    for (size_t r : ranks) w.push_back(order[r]);
    windows.push_back(std::move(w));
  }
  return windows;
}

std::vector<FrameRecord> build_subtitle_frames(int num_frames, std::span<const SubtitleSentence> sentences, int d_txt) {
  std::vector<double> times;
  for (int t = 0; t < num_frames; ++t) times.push_back(frame_time_seconds(t));
  const auto windows = align_subtitles(times, sentences);
  std::vector<FrameRecord> frames(static_cast<size_t>(num_frames));
  for (int t = 0; t < num_frames; ++t) {
    FrameRecord& f = frames[static_cast<size_t>(t)];
    f.frame_idx = t;
    Eigen::Index rows = 0;
    for (size_t i : windows[static_cast<size_t>(t)]) rows += static_cast<Eigen::Index>(sentences[i].tokens.size());
    f.subtitle_features.resize(rows, d_txt);
    Eigen::Index r = 0;
    for (size_t i : windows[static_cast<size_t>(t)]) {
      const SubtitleSentence& s = sentences[i];
      f.subtitle_tokens.insert(f.subtitle_tokens.end(), s.tokens.begin(), s.tokens.end());
      const auto n = static_cast<Eigen::Index>(s.tokens.size());
      if (n > 0) {
        if (s.features.rows() != n || s.features.cols() != d_txt) throw ShapeError("build_subtitle_frames: sentence features");
        f.subtitle_features.middleRows(r, n) = s.features;
      }
      r += n;
    }
  }
  return frames;
}

// ---- Files ------------------------------------------------------------------

namespace {

struct ClipFeatures {
  std::vector<FrameRecord> frames;
  std::optional<double> width;
  std::optional<double> height;
};

struct TextFeatures {
  Matrix question;
  std::vector<Matrix> answers;
};

std::vector<std::string> split_tokens(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

json box_to_json(const BoundingBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be [x1, y1, x2, y2]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

Matrix matrix_from_json(const json& j, Eigen::Index expected_cols = -1) {
  if (!j.is_array()) throw std::invalid_argument("feature matrix must be an array of rows");
  if (j.empty()) return Matrix(0, std::max<Eigen::Index>(expected_cols, 0));
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) throw std::invalid_argument("ragged feature matrix");
    for (size_t c = 0; c < j[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + p.string() + "'");
}

ClipFeatures clip_from_json(const json& j, int d_txt) {
  ClipFeatures c;
  const int T = j.at("T").get<int>();
  const json& frames = j.at("frames");
  if (!frames.is_array() || static_cast<int>(frames.size()) != T) throw std::invalid_argument("frames length differs from T");
  for (int t = 0; t < T; ++t) {
    const json& fj = frames[static_cast<size_t>(t)];
    FrameRecord f;
    f.frame_idx = t;
    for (const json& oj : fj.at("objects")) {
      f.objects.push_back({box_from_json(oj.at("box")), oj.at("feat").get<std::vector<double>>()});
    }
    f.subtitle_tokens = fj.at("sub_tokens").get<std::vector<std::string>>();
    f.subtitle_features = matrix_from_json(fj.at("sub_feats"), d_txt);
    c.frames.push_back(std::move(f));
  }
  if (j.contains("width")) c.width = j["width"].get<double>();
  if (j.contains("height")) c.height = j["height"].get<double>();
  return c;
}

json clip_to_json(const QAExample& ex) {
  json j;
  j["T"] = ex.num_frames();
  if (ex.image_width) j["width"] = *ex.image_width;
  if (ex.image_height) j["height"] = *ex.image_height;
  json frames = json::array();
  for (const FrameRecord& f : ex.frames) {
    json objs = json::array();
    for (const ObjectRegionFeature& o : f.objects) objs.push_back({{"box", box_to_json(o.box)}, {"feat", o.feature}});
    frames.push_back({{"objects", objs}, {"sub_tokens", f.subtitle_tokens}, {"sub_feats", matrix_to_json(f.subtitle_features)}});
  }
  j["frames"] = frames;
  return j;
}

PackedFile clip_to_packed(const QAExample& ex) {
  PackedFile p;
  json meta;
  meta["T"] = ex.num_frames();
  if (ex.image_width) meta["width"] = *ex.image_width;
  if (ex.image_height) meta["height"] = *ex.image_height;
  json frames = json::array();
  for (int t = 0; t < ex.num_frames(); ++t) {
    const FrameRecord& f = ex.frames[static_cast<size_t>(t)];
    frames.push_back({{"sub_tokens", f.subtitle_tokens}});
    const auto n = static_cast<Eigen::Index>(f.objects.size());
    const Eigen::Index dv = n > 0 ? static_cast<Eigen::Index>(f.objects[0].feature.size()) : 0;
    Matrix boxes(n, 4), feats(n, dv);
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto& o = f.objects[static_cast<size_t>(r)];
      boxes.row(r) << o.box.x1, o.box.y1, o.box.x2, o.box.y2;
      feats.row(r) = Eigen::Map<const Eigen::RowVectorXd>(o.feature.data(), dv);
    }
    const std::string prefix = "frame" + std::to_string(t);
    p.arrays.push_back(NamedArray::from_matrix(prefix + ".boxes", boxes, DType::kFloat32));
    p.arrays.push_back(NamedArray::from_matrix(prefix + ".feats", feats, DType::kFloat32));
    p.arrays.push_back(NamedArray::from_matrix(prefix + ".sub_feats", f.subtitle_features, DType::kFloat32));
  }
  meta["frames"] = frames;
  p.metadata = meta.dump();
  return p;
}

ClipFeatures clip_from_packed(const PackedFile& p) {
  const json meta = json::parse(p.metadata);
  ClipFeatures c;
  const int T = meta.at("T").get<int>();
  for (int t = 0; t < T; ++t) {
    const std::string prefix = "frame" + std::to_string(t);
    const NamedArray* boxes = p.find(prefix + ".boxes");
    const NamedArray* feats = p.find(prefix + ".feats");
    const NamedArray* subs = p.find(prefix + ".sub_feats");
    if (!boxes || !feats || !subs) throw std::invalid_argument("packed clip missing arrays for " + prefix);
    FrameRecord f;
    f.frame_idx = t;
    const Matrix bm = boxes->to_matrix();
    const Matrix fm = feats->to_matrix();
    for (Eigen::Index r = 0; r < bm.rows(); ++r) {
      f.objects.push_back({{bm(r, 0), bm(r, 1), bm(r, 2), bm(r, 3)}, std::vector<double>(fm.row(r).begin(), fm.row(r).end())});
    }
    f.subtitle_tokens = meta.at("frames").at(static_cast<size_t>(t)).at("sub_tokens").get<std::vector<std::string>>();
    f.subtitle_features = subs->to_matrix();
    c.frames.push_back(std::move(f));
  }
  if (meta.contains("width")) c.width = meta["width"].get<double>();
  if (meta.contains("height")) c.height = meta["height"].get<double>();
  return c;
}

ClipFeatures load_clip(const fs::path& root, const std::string& clip_id, int d_txt) {
  const fs::path js = root / (clip_id + ".json");
  const fs::path pk = root / (clip_id + ".stgf");
  try {
    if (fs::exists(js)) return clip_from_json(json::parse(read_text(js)), d_txt);
    if (fs::exists(pk)) return clip_from_packed(read_packed_file(pk.string()));
  } catch (const std::exception& e) {
    throw LoadError("feature file for clip '" + clip_id + "' is invalid: " + e.what());
  }
  throw LoadError("missing feature file for clip '" + clip_id + "'");
}

TextFeatures load_text(const fs::path& root, const std::string& qid, int d_txt) {
  const fs::path js = root / "qa" / (qid + ".json");
  const fs::path pk = root / "qa" / (qid + ".stgf");
  try {
    if (fs::exists(js)) {
      const json j = json::parse(read_text(js));
      TextFeatures t{matrix_from_json(j.at("q_feats"), d_txt), {}};
      for (const json& a : j.at("a_feats")) t.answers.push_back(matrix_from_json(a, d_txt));
      return t;
    }
    if (fs::exists(pk)) {
      const PackedFile p = read_packed_file(pk.string());
      const NamedArray* q = p.find("q_feats");
      if (!q) throw std::invalid_argument("missing q_feats");
      TextFeatures t{q->to_matrix(), {}};
      for (int k = 0;; ++k) {
        const NamedArray* a = p.find("a_feats." + std::to_string(k));
        if (!a) break;
        t.answers.push_back(a->to_matrix());
      }
      return t;
    }
  } catch (const std::exception& e) {
    throw LoadError("text feature file for question '" + qid + "' is invalid: " + e.what());
  }
  throw LoadError("missing text feature file for question '" + qid + "'");
}

}  // namespace

namespace {

LoadResult load_impl(const std::string& annotation_file, const std::string& features, const ModelConfig* cfg) {
  std::ifstream in(annotation_file);
  if (!in) throw LoadError("cannot open annotation file '" + annotation_file + "'");
  const fs::path root(features);
  const int d_txt = cfg ? cfg->d_txt : 0;
  std::map<std::string, ClipFeatures> clips;
  LoadResult result;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("malformed JSON: ") + e.what());
    }
    QAExample ex;
    json concepts;
    std::vector<double> span_sec;
    try {
      ex.qid = j.at("qid").get<std::string>();
      ex.clip_id = j.at("clip_id").get<std::string>();
      ex.question_tokens = split_tokens(j.at("question").get<std::string>());
      for (const json& a : j.at("answers")) ex.answer_tokens.push_back(split_tokens(a.get<std::string>()));
      ex.gt_answer_idx = j.at("gt_answer_idx").get<int>();
      span_sec = j.at("gt_span_sec").get<std::vector<double>>();
      concepts = j.at("concepts");
      for (const json& c : concepts) {
        ConceptAnnotation ann;
        ann.word_index = c.at("word_index").get<int>();
        ann.frame_idx = c.at("frame_idx").get<int>();
        for (const json& b : c.at("boxes")) ann.gt_boxes.push_back(box_from_json(b));
        ex.concept_annotations.push_back(std::move(ann));
      }
    } catch (const std::exception& e) {
      throw ParseError(lineno, std::string("invalid annotation: ") + e.what());
    }
    if (span_sec.size() != 2) throw ParseError(lineno, "gt_span_sec must hold [start, end]");

    auto it = clips.find(ex.clip_id);
    if (it == clips.end()) it = clips.emplace(ex.clip_id, load_clip(root, ex.clip_id, d_txt)).first;
    ex.frames = it->second.frames;
    ex.image_width = it->second.width;
    ex.image_height = it->second.height;
    TextFeatures text = load_text(root, ex.qid, d_txt);
    ex.question_features = std::move(text.question);
    ex.answer_features = std::move(text.answers);

    std::vector<std::string> violations;
    try {
      ex.gt_span = seconds_to_span(span_sec[0], span_sec[1], std::max(1, ex.num_frames()));
    } catch (const std::invalid_argument& e) {
      violations.push_back(std::string("gt_span_sec: ") + e.what());
    }
    for (auto& v : cfg ? validate_example(ex, *cfg) : validate_example(ex)) violations.push_back(std::move(v));
    if (violations.empty()) {
      result.examples.push_back(std::move(ex));
    } else {
      result.rejected.push_back({ex.qid, std::move(violations)});
    }
  }
  return result;
}

}  // namespace

LoadResult load_dataset(const std::string& annotation_file, const std::string& features, const ModelConfig& cfg) {
  return load_impl(annotation_file, features, &cfg);
}

std::string annotation_path(const std::string& dataset_dir) { return (fs::path(dataset_dir) / "annotations.jsonl").string(); }

std::string feature_root(const std::string& dataset_dir) { return (fs::path(dataset_dir) / "features").string(); }

LoadResult load_dataset_dir(const std::string& dataset_dir, const ModelConfig& cfg) {
  return load_dataset(annotation_path(dataset_dir), feature_root(dataset_dir), cfg);
}

LoadResult load_dataset_dir(const std::string& dataset_dir) {
  return load_impl(annotation_path(dataset_dir), feature_root(dataset_dir), nullptr);
}

void write_dataset(const std::string& dataset_dir, std::span<const QAExample> examples, bool packed) {
  const fs::path root(dataset_dir);
  const fs::path feats = root / "features";
  fs::create_directories(feats / "qa");
  std::string annotations;
  std::map<std::string, bool> written_clips;
  for (const QAExample& ex : examples) {
    json a;
    a["qid"] = ex.qid;
    a["clip_id"] = ex.clip_id;
    a["question"] = join_tokens(ex.question_tokens);
    json answers = json::array();
    for (const auto& toks : ex.answer_tokens) answers.push_back(join_tokens(toks));
    a["answers"] = answers;
    a["gt_answer_idx"] = ex.gt_answer_idx;
    a["gt_span_sec"] = {frame_time_seconds(ex.gt_span.start_idx), frame_time_seconds(ex.gt_span.end_idx)};
    json concepts = json::array();
    for (const ConceptAnnotation& c : ex.concept_annotations) {
      json boxes = json::array();
      for (const BoundingBox& b : c.gt_boxes) boxes.push_back(box_to_json(b));
      concepts.push_back({{"word_index", c.word_index}, {"frame_idx", c.frame_idx}, {"boxes", boxes}});
    }
    a["concepts"] = concepts;
    annotations += a.dump() + "\n";

    if (!written_clips[ex.clip_id]) {
      written_clips[ex.clip_id] = true;
      if (packed) {
        write_packed_file((feats / (ex.clip_id + ".stgf")).string(), clip_to_packed(ex));
      } else {
        write_text(feats / (ex.clip_id + ".json"), clip_to_json(ex).dump());
      }
    }
    if (packed) {
      PackedFile p;
      p.metadata = "{}";
      p.arrays.push_back(NamedArray::from_matrix("q_feats", ex.question_features, DType::kFloat32));
      for (size_t k = 0; k < ex.answer_features.size(); ++k) {
        p.arrays.push_back(NamedArray::from_matrix("a_feats." + std::to_string(k), ex.answer_features[k], DType::kFloat32));
      }
      write_packed_file((feats / "qa" / (ex.qid + ".stgf")).string(), p);
    } else {
      json t;
      t["q_feats"] = matrix_to_json(ex.question_features);
      json af = json::array();
      for (const Matrix& m : ex.answer_features) af.push_back(matrix_to_json(m));
      t["a_feats"] = af;
      write_text(feats / "qa" / (ex.qid + ".json"), t.dump());
    }
  }
  write_text(root / "annotations.jsonl", annotations);
}

// ---- Statistics ---------------------------------------------------------------

CorpusStats compute_corpus_stats(std::span<const QAExample> examples, double default_width, double default_height) {
  CorpusStats s;
  for (int i = 0; i <= 10; ++i) s.area_ratio_edges.push_back(i / 10.0);
  for (int i = 0; i <= 12; ++i) s.span_length_edges.push_back(5.0 * i);
  s.area_ratio_counts.assign(10, 0);
  s.span_length_counts.assign(13, 0);
  for (const QAExample& ex : examples) {
    ++s.num_questions;
    const double seconds = kSecondsPerFrame * ex.gt_span.length();
    s.span_length_counts[static_cast<size_t>(std::min(12, static_cast<int>(seconds / 5.0)))]++;
    const double image_area = ex.image_width.value_or(default_width) * ex.image_height.value_or(default_height);
    for (const ConceptAnnotation& ann : ex.concept_annotations) {
      const std::string word = concept_word(ex, ann);
      for (const BoundingBox& b : ann.gt_boxes) {
        ++s.num_boxes;
        ++s.boxes_per_category[word];
        const double ratio = b.area() / image_area;
        s.area_ratio_counts[static_cast<size_t>(std::clamp(static_cast<int>(ratio * 10.0), 0, 9))]++;
      }
    }
  }
  return s;
}

std::string corpus_stats_to_json(const CorpusStats& s, int indent) {
  nlohmann::ordered_json j;
  j["num_questions"] = s.num_questions;
  j["num_boxes"] = s.num_boxes;
  j["box_area_ratio"] = {{"edges", s.area_ratio_edges}, {"counts", s.area_ratio_counts}};
  j["span_length_sec"] = {{"edges", s.span_length_edges}, {"counts", s.span_length_counts}};
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (const auto& [word, n] : s.boxes_per_category) cats[word] = n;
  j["boxes_per_category"] = cats;
  return j.dump(indent);
}

// ---- Synthetic data -----------------------------------------------------------

std::vector<std::string> validate_synth_spec(const SynthSpec& s) {
  std::vector<std::string> out;
  if (s.n_examples < 1) out.push_back("n_examples: must be at least 1");
  if (s.min_frames < 1 || s.max_frames < s.min_frames) out.push_back("frames: need 1 <= min <= max");
  if (s.min_objects < 1 || s.max_objects < s.min_objects) out.push_back("objects: need 1 <= min <= max");
  if (s.min_question_tokens < 1 || s.max_question_tokens < s.min_question_tokens) {
    out.push_back("question tokens: need 1 <= min <= max");
  }
  if (s.min_sentence_tokens < 1 || s.max_sentence_tokens < s.min_sentence_tokens) {
    out.push_back("sentence tokens: need 1 <= min <= max");
  }
  if (s.d_vis < 1 || s.d_txt < 1) out.push_back("feature dims: must be positive");
  if (s.concept_vocab < kNumAnswers + 1) out.push_back("concept_vocab: must exceed the number of answers");
  if (!(s.noise >= 0.0)) out.push_back("noise: must be non-negative");
  if (!(s.image_width >= 32.0 && s.image_height >= 32.0)) out.push_back("image size: must be at least 32x32");
  return out;
}

namespace {

constexpr const char* kConceptNames[] = {
    "cup",    "laptop", "phone",  "jacket", "door",   "bottle", "chair",  "book",    "glasses", "couch",
    "table",  "bag",    "tie",    "window", "lamp",   "plate",  "hat",    "pen",     "box",     "guitar",
    "mug",    "paper",  "coffee", "wine",   "sheldon", "leonard", "penny", "howard", "raj",    "amy"};

constexpr const char* kQuestionWords[] = {"what", "who", "where", "why", "how"};

constexpr const char* kFillers[] = {"is", "the", "a", "holding", "when", "after", "before", "did", "say",
                                    "take", "put", "on", "in", "next", "to", "while", "talking", "about",
                                    "room", "walks", "sits", "looks", "at", "he", "she", "they"};

struct Vocab {
  std::vector<std::string> concept_names;
  std::vector<Eigen::RowVectorXd> concept_text;
  std::vector<Eigen::RowVectorXd> concept_vis;
  std::vector<Eigen::RowVectorXd> filler_text;
};

Eigen::RowVectorXd gaussian(int dim, double scale, Rng& rng) {
  Eigen::RowVectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = scale * rng.normal();
  return v;
}

Vocab make_vocab(const SynthSpec& s, Rng& rng) {
  Vocab v;
  constexpr int n_names = static_cast<int>(std::size(kConceptNames));
  for (int c = 0; c < s.concept_vocab; ++c) {
    std::string name = kConceptNames[c % n_names];
    if (c >= n_names) name += std::to_string(c / n_names);
    v.concept_names.push_back(name);
    v.concept_text.push_back(gaussian(s.d_txt, 1.0, rng));
    v.concept_vis.push_back(gaussian(s.d_vis, 1.0, rng));
  }
  for (size_t i = 0; i < std::size(kFillers) + std::size(kQuestionWords); ++i) {
    v.filler_text.push_back(gaussian(s.d_txt, 1.0, rng));
  }
  return v;
}

int filler_id(const std::string& w) {
  for (size_t i = 0; i < std::size(kFillers); ++i) {
    if (w == kFillers[i]) return static_cast<int>(i);
  }
  for (size_t i = 0; i < std::size(kQuestionWords); ++i) {
    if (w == kQuestionWords[i]) return static_cast<int>(std::size(kFillers) + i);
  }
  return -1;
}

// Token features: vocabulary embedding plus isotropic noise.
Matrix embed_tokens(const std::vector<std::string>& tokens, const Vocab& v, const SynthSpec& s, Rng& rng) {
  Matrix m(static_cast<Eigen::Index>(tokens.size()), s.d_txt);
  for (size_t i = 0; i < tokens.size(); ++i) {
    Eigen::RowVectorXd base;
    const int f = filler_id(tokens[i]);
    if (f >= 0) {
      base = v.filler_text[static_cast<size_t>(f)];
    } else {
      const auto it = std::find(v.concept_names.begin(), v.concept_names.end(), tokens[i]);
      base = v.concept_text[static_cast<size_t>(it - v.concept_names.begin())];
    }
    m.row(static_cast<Eigen::Index>(i)) = base + gaussian(s.d_txt, s.noise, rng);
  }
  return m;
}

BoundingBox random_box(const SynthSpec& s, Rng& rng) {
  const double w = rng.uniform(0.15, 0.45) * s.image_width;
  const double h = rng.uniform(0.2, 0.6) * s.image_height;
  const double x = rng.uniform(0.0, s.image_width - w);
  const double y = rng.uniform(0.0, s.image_height - h);
  return {std::round(x), std::round(y), std::round(x + w), std::round(y + h)};
}

std::string filler(Rng& rng) {
  return kFillers[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(std::size(kFillers)) - 1))];
}

}  // namespace

std::vector<QAExample> generate_synthetic_dataset(const SynthSpec& s, uint64_t seed) {
  const auto problems = validate_synth_spec(s);
  if (!problems.empty()) throw std::invalid_argument("synthetic spec: " + problems.front());
  Rng rng(seed);
  const Vocab vocab = make_vocab(s, rng);
  std::vector<QAExample> out;
  for (int n = 0; n < s.n_examples; ++n) {
    QAExample ex;
    char id[32];
    std::snprintf(id, sizeof(id), "%05d", n);
    ex.qid = std::string("q") + id;
    ex.clip_id = std::string("clip") + id;
    ex.image_width = s.image_width;
    ex.image_height = s.image_height;

    const int T = static_cast<int>(rng.uniform_int(s.min_frames, s.max_frames));
    const int span_len = static_cast<int>(rng.uniform_int(std::min(2, T), std::max(std::min(2, T), T / 2)));
    const int st = static_cast<int>(rng.uniform_int(0, T - span_len));
    ex.gt_span = {st, st + span_len - 1};

    // Five distinct answer concepts; the rest of the vocabulary are distractors.
    std::vector<int> concepts = rng.sample_without_replacement(s.concept_vocab, s.concept_vocab);
    const std::vector<int> answer_concepts(concepts.begin(), concepts.begin() + kNumAnswers);
    const std::vector<int> distractors(concepts.begin() + kNumAnswers, concepts.end());
    ex.gt_answer_idx = static_cast<int>(rng.uniform_int(0, kNumAnswers - 1));
    const int gt_concept = answer_concepts[static_cast<size_t>(ex.gt_answer_idx)];

    const int q_len = static_cast<int>(rng.uniform_int(s.min_question_tokens, s.max_question_tokens));
    ex.question_tokens.push_back(kQuestionWords[rng.uniform_int(0, static_cast<int64_t>(std::size(kQuestionWords)) - 1)]);
    while (static_cast<int>(ex.question_tokens.size()) < q_len) ex.question_tokens.push_back(filler(rng));
    ex.question_features = embed_tokens(ex.question_tokens, vocab, s, rng);

    int gt_concept_pos = 0;
    for (int k = 0; k < kNumAnswers; ++k) {
      const int a_len = static_cast<int>(rng.uniform_int(1, 3));
      const int pos = static_cast<int>(rng.uniform_int(0, a_len - 1));
      std::vector<std::string> toks;
      for (int i = 0; i < a_len; ++i) {
        toks.push_back(i == pos ? vocab.concept_names[static_cast<size_t>(answer_concepts[static_cast<size_t>(k)])] : filler(rng));
      }
      if (k == ex.gt_answer_idx) gt_concept_pos = pos;
      ex.answer_features.push_back(embed_tokens(toks, vocab, s, rng));
      ex.answer_tokens.push_back(std::move(toks));
    }

    // Subtitles: consecutive sentences over the clip; those near the span
    // mention the GT concept.
    std::vector<SubtitleSentence> sentences;
    const double clip_end = frame_time_seconds(T - 1) + kSecondsPerFrame;
    for (double t = 0.0; t < clip_end;) {
      SubtitleSentence sent;
      sent.start_sec = t;
      sent.end_sec = std::min(clip_end, t + rng.uniform(1.5, 4.0));
      t = sent.end_sec + rng.uniform(0.0, 1.0);
      const int len = static_cast<int>(rng.uniform_int(s.min_sentence_tokens, s.max_sentence_tokens));
      for (int i = 0; i < len; ++i) sent.tokens.push_back(filler(rng));
      const double mid = sent.midpoint();
      if (mid >= frame_time_seconds(ex.gt_span.start_idx) - 1.0 && mid <= frame_time_seconds(ex.gt_span.end_idx) + 1.0) {
        sent.tokens[static_cast<size_t>(rng.uniform_int(0, len - 1))] = vocab.concept_names[static_cast<size_t>(gt_concept)];
      }
      sent.features = embed_tokens(sent.tokens, vocab, s, rng);
      sentences.push_back(std::move(sent));
    }
    ex.frames = build_subtitle_frames(T, sentences, s.d_txt);

    const int word_index = static_cast<int>(ex.question_tokens.size()) + gt_concept_pos;
    for (int t = 0; t < T; ++t) {
      FrameRecord& f = ex.frames[static_cast<size_t>(t)];
      const int n_obj = static_cast<int>(rng.uniform_int(s.min_objects, s.max_objects));
      const bool in_span = ex.gt_span.contains(t);
      const int planted = in_span ? static_cast<int>(rng.uniform_int(0, n_obj - 1)) : -1;
      const BoundingBox planted_box = random_box(s, rng);
      for (int r = 0; r < n_obj; ++r) {
        ObjectRegionFeature o;
        Eigen::RowVectorXd base;
        if (r == planted) {
          o.box = planted_box;
          base = vocab.concept_vis[static_cast<size_t>(gt_concept)];
        } else {
          // Distractor boxes stay clear of the planted box so positives are unambiguous.
          do {
            o.box = random_box(s, rng);
          } while (in_span && box_iou(o.box, planted_box) >= 0.3);
          base = vocab.concept_vis[static_cast<size_t>(distractors[static_cast<size_t>(
              rng.uniform_int(0, static_cast<int64_t>(distractors.size()) - 1))])];
        }
        const Eigen::RowVectorXd feat = base + gaussian(s.d_vis, s.noise, rng);
        o.feature.assign(feat.data(), feat.data() + feat.size());
        f.objects.push_back(std::move(o));
      }
      if (in_span) ex.concept_annotations.push_back({word_index, t, {planted_box}});
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace stvqa
