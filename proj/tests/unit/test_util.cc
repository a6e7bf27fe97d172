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

#include "test_util.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace stvqa::test {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.d = 8;
  cfg.d_vis = 6;
  cfg.d_txt = 10;
  return cfg;
}

SynthSpec small_spec(const ModelConfig& cfg, int n_examples) {
  SynthSpec s;
  s.n_examples = n_examples;
  s.d_vis = cfg.d_vis;
  s.d_txt = cfg.d_txt;
  s.min_frames = 3;
  s.max_frames = 6;
  s.min_objects = 2;
  s.max_objects = 4;
  return s;
}

std::vector<QAExample> small_dataset(int n_examples, uint64_t seed, const ModelConfig& cfg) {
  return generate_synthetic_dataset(small_spec(cfg, n_examples), seed);
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("stvqa_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

GradCheckResult check_gradients(const ScalarFn& fn, std::vector<Matrix> inputs, double step, double tolerance) {
  std::vector<Matrix> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const Matrix& m : inputs) vars.push_back(tape.variable(m));
    tape.backward(fn(tape, vars));
    for (size_t i = 0; i < vars.size(); ++i) {
      analytic.push_back(vars[i].grad().size() ? vars[i].grad() : Matrix::Zero(inputs[i].rows(), inputs[i].cols()));
    }
  }
  auto evaluate = [&](const std::vector<Matrix>& xs) {
    ad::Tape tape(false);
    std::vector<ad::Var> vars;
    for (const Matrix& m : xs) vars.push_back(tape.constant(m));
    return fn(tape, vars).scalar();
  };
  GradCheckResult r;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (Eigen::Index j = 0; j < inputs[i].size(); ++j) {
      const double orig = inputs[i].data()[j];
      inputs[i].data()[j] = orig + step;
      const double up = evaluate(inputs);
      inputs[i].data()[j] = orig - step;
      const double down = evaluate(inputs);
      inputs[i].data()[j] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i].data()[j];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      ++r.coordinates;
      if (rel < tolerance) ++r.passed;
      r.max_rel_err = std::max(r.max_rel_err, rel);
    }
  }
  return r;
}

}  // namespace stvqa::test
