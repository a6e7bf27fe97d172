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

// Shared fixtures for the unit tests.
#ifndef STVQA_TESTS_TEST_UTIL_H_
#define STVQA_TESTS_TEST_UTIL_H_

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "stvqa/autodiff.hpp"
#include "stvqa/core_types.hpp"
#include "stvqa/ingest.hpp"
#include "stvqa/rng.hpp"

namespace stvqa::test {

// Narrow dims so model-level tests stay fast.
ModelConfig small_config();
SynthSpec small_spec(const ModelConfig& cfg, int n_examples);
std::vector<QAExample> small_dataset(int n_examples, uint64_t seed, const ModelConfig& cfg = small_config());

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0);

// Fresh empty directory under the system temp dir.
std::filesystem::path fresh_dir(const std::string& name);
std::string read_file(const std::filesystem::path& path);

struct GradCheckResult {
  int coordinates = 0;
  int passed = 0;
  double max_rel_err = 0.0;
  double pass_fraction() const { return coordinates ? static_cast<double>(passed) / coordinates : 1.0; }
};

// Compares tape gradients of a scalar function against central differences
// for every coordinate of every input.
using ScalarFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;
GradCheckResult check_gradients(const ScalarFn& fn, std::vector<Matrix> inputs, double step = 1e-5,
                                double tolerance = 1e-4);

}  // namespace stvqa::test

#endif  // STVQA_TESTS_TEST_UTIL_H_
