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

#ifndef STVQA_PARAMS_HPP_
#define STVQA_PARAMS_HPP_

#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stvqa/autodiff.hpp"
#include "stvqa/rng.hpp"

namespace stvqa {

// Ordered collection of named parameter matrices.
class ParamStore {
 public:
  void add(std::string name, Matrix value);
  bool contains(std::string_view name) const;
  Matrix& at(std::string_view name);
  const Matrix& at(std::string_view name) const;

  size_t size() const { return entries_.size(); }
  const std::string& name(size_t i) const { return entries_[i].first; }
  Matrix& value(size_t i) { return entries_[i].second; }
  const Matrix& value(size_t i) const { return entries_[i].second; }
  // Total number of scalar parameters.
  Eigen::Index num_scalars() const;

  // Same names and shapes, all zeros.
  ParamStore zeros_like() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::vector<std::pair<std::string, Matrix>> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// Fan-in scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);

// Tape leaves for every entry of a ParamStore.
class BoundParams {
 public:
  BoundParams(ad::Tape& tape, const ParamStore& store);
  ad::Var operator[](std::string_view name) const;
  // Gradients collected after Tape::backward; zeros for unreached entries.
  ParamStore gradients(const ParamStore& store) const;

 private:
  std::vector<ad::Var> vars_;
  const ParamStore* store_;
};

}  // namespace stvqa

#endif  // STVQA_PARAMS_HPP_
