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

#ifndef STVQA_INGEST_HPP_
#define STVQA_INGEST_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stvqa/core_types.hpp"

namespace stvqa {

// Frames are sampled at 0.5 FPS: frame t sits at 2t seconds.
inline constexpr double kSecondsPerFrame = 2.0;

inline double frame_time_seconds(int frame_idx) { return kSecondsPerFrame * frame_idx; }

// clamp(round(t_sec / 2), 0, T - 1). Throws std::invalid_argument for
// negative or non-finite t_sec, or T < 1.
int seconds_to_frame_idx(double t_sec, int num_frames);

// Converts both ends independently and swaps them if they come out inverted.
TimeSpan seconds_to_span(double start_sec, double end_sec, int num_frames);

struct SubtitleSentence {
  std::vector<std::string> tokens;
  Matrix features;  // tokens.size() x d_txt (may be empty when only timing matters)
  double start_sec = 0.0;
  double end_sec = 0.0;

  double midpoint() const { return 0.5 * (start_sec + end_sec); }
};

// For each frame time, the indices (into `sentences`) of the <= 2 sentences
// whose midpoints are nearest, listed in temporal order. Distance ties go to
// the earlier sentence. Input order does not affect the chosen sentences.
std::vector<std::vector<size_t>> align_subtitles(std::span<const double> frame_times,
                                                 std::span<const SubtitleSentence> sentences);

// Concatenates each frame's aligned sentences into a FrameRecord subtitle
// window (objects left empty).
std::vector<FrameRecord> build_subtitle_frames(int num_frames, std::span<const SubtitleSentence> sentences, int d_txt);

struct Rejection {
  std::string qid;
  std::vector<std::string> violations;
};

struct LoadResult {
  std::vector<QAExample> examples;  // file order
  std::vector<Rejection> rejected;
};

// Reads a JSON Lines annotation file and the per-clip / per-question feature
// files under `feature_root` (`<clip_id>.json` or `.stgf`, and
// `qa/<qid>.json` or `.stgf`). Malformed lines raise ParseError with the
// 1-based line number; missing feature files raise LoadError naming the id.
// Examples that fail validate_example are returned in `rejected`.
LoadResult load_dataset(const std::string& annotation_path, const std::string& feature_root, const ModelConfig& cfg);

// Directory layout used by the CLI: <dir>/annotations.jsonl, <dir>/features/.
std::string annotation_path(const std::string& dataset_dir);
std::string feature_root(const std::string& dataset_dir);
LoadResult load_dataset_dir(const std::string& dataset_dir, const ModelConfig& cfg);
// Validation without the feature-dimension checks.
LoadResult load_dataset_dir(const std::string& dataset_dir);

// Writes annotations and feature files in the layout above. With
// packed = true feature files use the STGF container (float32 payload).
void write_dataset(const std::string& dataset_dir, std::span<const QAExample> examples, bool packed = false);

// Corpus statistics over the annotated concept boxes and GT spans.
struct CorpusStats {
  int num_questions = 0;
  int num_boxes = 0;
  std::vector<double> area_ratio_edges;  // 11 edges over [0, 1]
  std::vector<int> area_ratio_counts;    // 10 bins; ratios above 1 land in the last
  std::vector<double> span_length_edges;  // seconds, 0, 5, ..., 60; the last bin is open
  std::vector<int> span_length_counts;    // 13 bins
  std::map<std::string, int> boxes_per_category;  // keyed by concept word
};

// Image size falls back to (default_width, default_height) for clips that
// do not record it.
CorpusStats compute_corpus_stats(std::span<const QAExample> examples, double default_width = 640.0,
                                 double default_height = 360.0);
std::string corpus_stats_to_json(const CorpusStats& stats, int indent = 2);

struct SynthSpec {
  int n_examples = 16;
  int min_frames = 6;
  int max_frames = 10;
  int min_objects = 3;
  int max_objects = 6;
  int min_question_tokens = 3;
  int max_question_tokens = 5;
  int min_sentence_tokens = 3;
  int max_sentence_tokens = 5;
  int d_vis = 300;
  int d_txt = 768;
  int concept_vocab = 24;  // must exceed kNumAnswers + 1
  double noise = 0.1;
  double image_width = 640.0;
  double image_height = 360.0;
};

// Empty when the ranges are usable.
std::vector<std::string> validate_synth_spec(const SynthSpec& spec);

// Deterministic under `seed`. Every example carries a recoverable signal:
// inside the GT span one object per frame (the planted positive, annotated
// as the GT concept's box) is the visual embedding of the GT answer's
// concept word, and nearby subtitle sentences mention it; no other answer's
// concept appears in the clip. Throws std::invalid_argument on bad ranges.
std::vector<QAExample> generate_synthetic_dataset(const SynthSpec& spec, uint64_t seed);

}  // namespace stvqa

#endif  // STVQA_INGEST_HPP_
