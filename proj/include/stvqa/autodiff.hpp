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

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation eagerly: values are computed when an op is
// called, and a backward closure is stored only when at least one operand
// requires a gradient. `Tape::backward` walks nodes in reverse creation order.

#ifndef STVQA_AUTODIFF_HPP_
#define STVQA_AUTODIFF_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace stvqa {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// 1 = valid position, 0 = padding.
using Mask = std::vector<uint8_t>;

namespace ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  // Accumulated gradient; empty (0x0) if nothing flowed into this node.
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  // Value of a 1x1 node.
  double scalar() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool defined() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix&)>;

  // With record == false no backward closures are kept (inference).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Leaf that accumulates a gradient when recording.
  Var variable(Matrix value);

  // Adds an interior node. `backward` receives the gradient of the node and
  // must push gradients into its parents through `accumulate`.
  Var push(Matrix value, std::initializer_list<Var> parents, Backward backward);
  Var push(Matrix value, std::span<const Var> parents, Backward backward);

  bool needs_grad(const Var& v) const { return nodes_[static_cast<size_t>(v.id())].needs_grad; }

  template <typename Expr>
  void accumulate(const Var& v, const Expr& g) {
    Node& n = nodes_[static_cast<size_t>(v.id())];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  // Adds `g` to a sub-block of v's gradient, allocating zeros if needed.
  template <typename Expr>
  void accumulate_block(const Var& v, Eigen::Index row, Eigen::Index col, const Expr& g) {
    Node& n = nodes_[static_cast<size_t>(v.id())];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad.block(row, col, g.rows(), g.cols()) += g;
  }

  // Seeds d(root)/d(root) = 1 for a 1x1 root and propagates to all leaves.
  void backward(const Var& root);

  bool recording() const { return record_; }
  size_t size() const { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool needs_grad = false;
  };

  std::deque<Node> nodes_;
  bool record_;
};

// ---- Elementwise and linear-algebra ops ----------------------------------

Var matmul(const Var& a, const Var& b);
// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
// Adds a 1 x cols row to every row of a.
Var add_row(const Var& a, const Var& row);
Var add_constant(const Var& a, const Matrix& c);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var softplus(const Var& a);
// log(max(x, floor)); zero gradient where clamped.
Var log_clamped(const Var& a, double floor);
Var transpose(const Var& a);
Var sum(const Var& a);

// Zeroes rows whose mask entry is 0.
Var mask_rows(const Var& a, const Mask& row_mask);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
// 1x1 view of element (r, c).
Var element(const Var& a, Eigen::Index r, Eigen::Index c);
// Column vector of the listed elements.
Var gather(const Var& a, std::span<const std::pair<int, int>> coords);

// ---- Sequence ops ----------------------------------------------------------
//
// The row axis is treated as consecutive segments of `segment` rows (or
// columns, for the softmax); operations never mix values across segments.

// Row-wise layer normalization with affine gamma/beta (each 1 x cols).
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps);

// Depthwise 1-D convolution along rows, same (zero) padding inside each
// segment. weight: k x cols (k odd), bias: 1 x cols.
Var depthwise_conv_rows(const Var& x, const Var& weight, const Var& bias, Eigen::Index segment);

// Softmax along each row independently over every block of `segment`
// columns, restricted to columns with col_mask = 1. Blocks with no valid
// column produce zeros.
Var softmax_segments(const Var& x, Eigen::Index segment, const Mask& col_mask);

// probs: L x (S*n), values: (S*n) x d. Output (S*L) x d whose block s is
// probs[:, s*n:(s+1)*n] * values[s*n:(s+1)*n, :].
Var block_attend(const Var& probs, const Var& values, Eigen::Index n);

// Column-wise max over valid rows of each segment: (S*seg) x d -> S x d.
// Throws ContractViolation if a segment has no valid row.
Var max_rows_segments(const Var& x, Eigen::Index segment, const Mask& row_mask);

}  // namespace ad
}  // namespace stvqa

#endif  // STVQA_AUTODIFF_HPP_
