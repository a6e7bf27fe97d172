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

#include "stvqa/params.hpp"

#include <cmath>

#include "stvqa/errors.hpp"

namespace stvqa {

void ParamStore::add(std::string name, Matrix value) {
  if (index_.count(name)) throw ContractViolation("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

bool ParamStore::contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

Matrix& ParamStore::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractViolation("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second].second;
}

const Matrix& ParamStore::at(std::string_view name) const { return const_cast<ParamStore*>(this)->at(name); }

Eigen::Index ParamStore::num_scalars() const {
  Eigen::Index n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& [name, m] : entries_) out.add(name, Matrix::Zero(m.rows(), m.cols()));
  return out;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& [na, ma] = a.entries_[i];
    const auto& [nb, mb] = b.entries_[i];
    if (na != nb || ma.rows() != mb.rows() || ma.cols() != mb.cols()) return false;
    if (ma.size() > 0 && !(ma == mb)) return false;
  }
  return true;
}

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

BoundParams::BoundParams(ad::Tape& tape, const ParamStore& store) : store_(&store) {
  vars_.reserve(store.size());
  for (size_t i = 0; i < store.size(); ++i) vars_.push_back(tape.variable(store.value(i)));
}

ad::Var BoundParams::operator[](std::string_view name) const {
  for (size_t i = 0; i < store_->size(); ++i) {
    if (store_->name(i) == name) return vars_[i];
  }
  throw ContractViolation("unknown parameter '" + std::string(name) + "'");
}

ParamStore BoundParams::gradients(const ParamStore& store) const {
  ParamStore out;
  for (size_t i = 0; i < store.size(); ++i) {
    const Matrix& g = vars_[i].grad();
    out.add(store.name(i), g.size() == 0 ? Matrix::Zero(store.value(i).rows(), store.value(i).cols()) : g);
  }
  return out;
}

}  // namespace stvqa
