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

#include "stvqa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stvqa/errors.hpp"

namespace stvqa::ad {

const Matrix& Var::value() const { return tape_->nodes_[static_cast<size_t>(id_)].value; }

const Matrix& Var::grad() const { return tape_->nodes_[static_cast<size_t>(id_)].grad; }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("scalar() on non-1x1 value");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, false});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, record_});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::push(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
              std::move(backward));
}

Var Tape::push(Matrix value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  if (record_) {
    for (const Var& p : parents) {
      if (p.tape_ != this) throw ContractViolation("operand belongs to a different tape");
      needs = needs || nodes_[static_cast<size_t>(p.id_)].needs_grad;
    }
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs ? std::move(backward) : nullptr, needs});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::backward(const Var& root) {
  if (root.tape_ != this) throw ContractViolation("backward root from another tape");
  Node& r = nodes_[static_cast<size_t>(root.id_)];
  if (r.value.rows() != 1 || r.value.cols() != 1) throw ShapeError("backward root must be 1x1");
  if (!r.needs_grad) return;
  r.grad = Matrix::Ones(1, 1);
  for (int i = root.id_; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.backward && n.grad.size() != 0) n.backward(*this, n.grad);
  }
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

Tape& tape_of(const Var& a) {
  if (!a.defined()) throw ContractViolation("undefined Var");
  return *a.tape();
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                     std::to_string(b.rows()));
  }
  Matrix v = a.value() * b.value();
  return tape_of(a).push(std::move(v), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.needs_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: feature dimensions differ");
  Matrix v = a.value() * b.value().transpose();
  return tape_of(a).push(std::move(v), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * b.value());
    if (t.needs_grad(b)) t.accumulate(b, g.transpose() * a.value());
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Matrix v = a.value() + b.value();
  return tape_of(a).push(std::move(v), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Matrix v = a.value() - b.value();
  return tape_of(a).push(std::move(v), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: bias shape");
  Matrix v = a.value().rowwise() + row.value().row(0);
  return tape_of(a).push(std::move(v), {a, row}, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var add_constant(const Var& a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) throw ShapeError("add_constant: shape");
  Matrix v = a.value() + c;
  return tape_of(a).push(std::move(v), {a}, [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape(a, b, "hadamard");
  Matrix v = a.value().cwiseProduct(b.value());
  return tape_of(a).push(std::move(v), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(const Var& a, double s) {
  Matrix v = a.value() * s;
  return tape_of(a).push(std::move(v), {a}, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var relu(const Var& a) {
  Matrix v = a.value().cwiseMax(0.0);
  return tape_of(a).push(std::move(v), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0));
  });
}

Var softplus(const Var& a) {
  Matrix v = a.value().unaryExpr([](double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  });
  return tape_of(a).push(std::move(v), {a}, [a](Tape& t, const Matrix& g) {
    Matrix sig = a.value().unaryExpr([](double x) {
      return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    t.accumulate(a, g.cwiseProduct(sig));
  });
}

Var log_clamped(const Var& a, double floor) {
  Matrix v = a.value().unaryExpr([floor](double x) { return std::log(std::max(x, floor)); });
  return tape_of(a).push(std::move(v), {a}, [a, floor](Tape& t, const Matrix& g) {
    Matrix d = a.value().unaryExpr([floor](double x) { return x > floor ? 1.0 / x : 0.0; });
    t.accumulate(a, g.cwiseProduct(d));
  });
}

Var transpose(const Var& a) {
  Matrix v = a.value().transpose();
  return tape_of(a).push(std::move(v), {a},
                         [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var sum(const Var& a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return tape_of(a).push(std::move(v), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mask_rows(const Var& a, const Mask& row_mask) {
  if (static_cast<Eigen::Index>(row_mask.size()) != a.rows()) throw ShapeError("mask_rows: mask length");
  Matrix v = a.value();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    if (!row_mask[static_cast<size_t>(r)]) v.row(r).setZero();
  }
  return tape_of(a).push(std::move(v), {a}, [a, row_mask](Tape& t, const Matrix& g) {
    Matrix d = g;
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      if (!row_mask[static_cast<size_t>(r)]) d.row(r).setZero();
    }
    t.accumulate(a, d);
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows: out of range");
  Matrix v = a.value().middleRows(start, count);
  return tape_of(a).push(std::move(v), {a}, [a, start](Tape& t, const Matrix& g) {
    t.accumulate_block(a, start, 0, g);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  std::vector<Var> ops(parts.begin(), parts.end());
  return tape_of(parts[0]).push(std::move(v), parts, [ops](Tape& t, const Matrix& g) {
    Eigen::Index o = 0;
    for (const Var& p : ops) {
      if (t.needs_grad(p)) t.accumulate(p, g.middleCols(o, p.cols()));
      o += p.cols();
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  std::vector<Var> ops(parts.begin(), parts.end());
  return tape_of(parts[0]).push(std::move(v), parts, [ops](Tape& t, const Matrix& g) {
    Eigen::Index o = 0;
    for (const Var& p : ops) {
      if (t.needs_grad(p)) t.accumulate(p, g.middleRows(o, p.rows()));
      o += p.rows();
    }
  });
}

Var element(const Var& a, Eigen::Index r, Eigen::Index c) {
  if (r < 0 || c < 0 || r >= a.rows() || c >= a.cols()) throw ShapeError("element: out of range");
  Matrix v(1, 1);
  v(0, 0) = a.value()(r, c);
  return tape_of(a).push(std::move(v), {a}, [a, r, c](Tape& t, const Matrix& g) {
    t.accumulate_block(a, r, c, g);
  });
}

Var gather(const Var& a, std::span<const std::pair<int, int>> coords) {
  std::vector<std::pair<int, int>> cs(coords.begin(), coords.end());
  Matrix v(static_cast<Eigen::Index>(cs.size()), 1);
  for (size_t i = 0; i < cs.size(); ++i) {
    const auto [r, c] = cs[i];
    if (r < 0 || c < 0 || r >= a.rows() || c >= a.cols()) throw ShapeError("gather: out of range");
    v(static_cast<Eigen::Index>(i), 0) = a.value()(r, c);
  }
  return tape_of(a).push(std::move(v), {a}, [a, cs](Tape& t, const Matrix& g) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    for (size_t i = 0; i < cs.size(); ++i) d(cs[i].first, cs[i].second) += g(static_cast<Eigen::Index>(i), 0);
    t.accumulate(a, d);
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d) {
    throw ShapeError("layer_norm_rows: affine shape");
  }
  Matrix xhat(n, d);
  Eigen::VectorXd inv_std(n);
  const Matrix& xv = x.value();
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
  }
  Matrix v = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
             beta.value().row(0).array();
  return tape_of(x).push(std::move(v), {x, gamma, beta},
                         [x, gamma, beta, xhat, inv_std](Tape& t, const Matrix& g) {
    if (t.needs_grad(gamma)) t.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
    if (t.needs_grad(beta)) t.accumulate(beta, g.colwise().sum());
    if (!t.needs_grad(x)) return;
    Matrix dxhat = g.array().rowwise() * gamma.value().row(0).array();
    const double inv_d = 1.0 / static_cast<double>(dxhat.cols());
    Matrix dx(dxhat.rows(), dxhat.cols());
    for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
      const double m1 = dxhat.row(r).sum() * inv_d;
      const double m2 = dxhat.row(r).dot(xhat.row(r)) * inv_d;
      dx.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
    }
    t.accumulate(x, dx);
  });
}

Var depthwise_conv_rows(const Var& x, const Var& weight, const Var& bias, Eigen::Index segment) {
  const Eigen::Index k = weight.rows();
  const Eigen::Index d = x.cols();
  if (k % 2 == 0) throw ShapeError("depthwise_conv_rows: kernel size must be odd");
  if (weight.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw ShapeError("depthwise_conv_rows: parameter shape");
  }
  if (segment <= 0 || x.rows() % segment != 0) throw ShapeError("depthwise_conv_rows: segment length");
  const Eigen::Index n_seg = x.rows() / segment;
  const Eigen::Index half = k / 2;
  const Matrix& xv = x.value();
  const Matrix& wv = weight.value();

  // Visits (dst_row, src_row, count, tap) ranges that stay inside a segment.
  auto for_each_tap = [segment, n_seg, half, k](auto&& fn) {
    for (Eigen::Index s = 0; s < n_seg; ++s) {
      const Eigen::Index base = s * segment;
      for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::Index off = j - half;
        const Eigen::Index p0 = std::max<Eigen::Index>(0, -off);
        const Eigen::Index p1 = std::min<Eigen::Index>(segment, segment - off);
        if (p1 <= p0) continue;
        fn(base + p0, base + p0 + off, p1 - p0, j);
      }
    }
  };

  Matrix v(x.rows(), d);
  v.rowwise() = bias.value().row(0);
  for_each_tap([&](Eigen::Index dst, Eigen::Index src, Eigen::Index len, Eigen::Index j) {
    v.middleRows(dst, len).array() += xv.middleRows(src, len).array().rowwise() * wv.row(j).array();
  });
  return tape_of(x).push(std::move(v), {x, weight, bias},
                         [x, weight, bias, for_each_tap](Tape& t, const Matrix& g) {
    const bool gx = t.needs_grad(x);
    const bool gw = t.needs_grad(weight);
    Matrix dx, dw;
    if (gx) dx = Matrix::Zero(x.rows(), x.cols());
    if (gw) dw = Matrix::Zero(weight.rows(), weight.cols());
    const Matrix& xv2 = x.value();
    const Matrix& wv2 = weight.value();
    for_each_tap([&](Eigen::Index dst, Eigen::Index src, Eigen::Index len, Eigen::Index j) {
      if (gx) dx.middleRows(src, len).array() += g.middleRows(dst, len).array().rowwise() * wv2.row(j).array();
      if (gw) dw.row(j) += (g.middleRows(dst, len).array() * xv2.middleRows(src, len).array()).matrix().colwise().sum();
    });
    if (gx) t.accumulate(x, dx);
    if (gw) t.accumulate(weight, dw);
    if (t.needs_grad(bias)) t.accumulate(bias, g.colwise().sum());
  });
}

Var softmax_segments(const Var& x, Eigen::Index segment, const Mask& col_mask) {
  const Eigen::Index cols = x.cols();
  if (static_cast<Eigen::Index>(col_mask.size()) != cols) throw ShapeError("softmax_segments: mask length");
  if (segment <= 0 || cols % segment != 0) throw ShapeError("softmax_segments: segment length");
  const Eigen::Index n_seg = cols / segment;
  const Matrix& xv = x.value();
  Matrix p = Matrix::Zero(x.rows(), cols);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index s = 0; s < n_seg; ++s) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index c = s * segment; c < (s + 1) * segment; ++c) {
        if (col_mask[static_cast<size_t>(c)]) mx = std::max(mx, xv(r, c));
      }
      if (!std::isfinite(mx)) continue;
      double z = 0.0;
      for (Eigen::Index c = s * segment; c < (s + 1) * segment; ++c) {
        if (col_mask[static_cast<size_t>(c)]) {
          p(r, c) = std::exp(xv(r, c) - mx);
          z += p(r, c);
        }
      }
      p.block(r, s * segment, 1, segment) /= z;
    }
  }
  Matrix out = p;
  return tape_of(x).push(std::move(out), {x}, [x, p, segment, n_seg](Tape& t, const Matrix& g) {
    Matrix dx(p.rows(), p.cols());
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      for (Eigen::Index s = 0; s < n_seg; ++s) {
        auto ps = p.block(r, s * segment, 1, segment);
        auto gs = g.block(r, s * segment, 1, segment);
        const double dot = ps.cwiseProduct(gs).sum();
        dx.block(r, s * segment, 1, segment) = ps.array() * (gs.array() - dot);
      }
    }
    t.accumulate(x, dx);
  });
}

Var block_attend(const Var& probs, const Var& values, Eigen::Index n) {
  if (n <= 0 || probs.cols() % n != 0 || probs.cols() != values.rows()) {
    throw ShapeError("block_attend: inconsistent block layout");
  }
  const Eigen::Index n_blocks = probs.cols() / n;
  const Eigen::Index L = probs.rows();
  const Eigen::Index d = values.cols();
  Matrix v(n_blocks * L, d);
  for (Eigen::Index s = 0; s < n_blocks; ++s) {
    v.middleRows(s * L, L).noalias() = probs.value().middleCols(s * n, n) * values.value().middleRows(s * n, n);
  }
  return tape_of(probs).push(std::move(v), {probs, values},
                             [probs, values, n, n_blocks, L](Tape& t, const Matrix& g) {
    const bool gp = t.needs_grad(probs);
    const bool gv = t.needs_grad(values);
    Matrix dp, dv;
    if (gp) dp.resize(probs.rows(), probs.cols());
    if (gv) dv.resize(values.rows(), values.cols());
    for (Eigen::Index s = 0; s < n_blocks; ++s) {
      auto gs = g.middleRows(s * L, L);
      if (gp) dp.middleCols(s * n, n).noalias() = gs * values.value().middleRows(s * n, n).transpose();
      if (gv) dv.middleRows(s * n, n).noalias() = probs.value().middleCols(s * n, n).transpose() * gs;
    }
    if (gp) t.accumulate(probs, dp);
    if (gv) t.accumulate(values, dv);
  });
}

Var max_rows_segments(const Var& x, Eigen::Index segment, const Mask& row_mask) {
  if (static_cast<Eigen::Index>(row_mask.size()) != x.rows()) throw ShapeError("max_rows_segments: mask length");
  if (segment <= 0 || x.rows() % segment != 0) throw ShapeError("max_rows_segments: segment length");
  const Eigen::Index n_seg = x.rows() / segment;
  const Eigen::Index d = x.cols();
  const Matrix& xv = x.value();
  Matrix v(n_seg, d);
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> arg(n_seg, d);
  for (Eigen::Index s = 0; s < n_seg; ++s) {
    bool any = false;
    for (Eigen::Index r = s * segment; r < (s + 1) * segment; ++r) {
      if (!row_mask[static_cast<size_t>(r)]) continue;
      if (!any) {
        v.row(s) = xv.row(r);
        arg.row(s).setConstant(r);
        any = true;
        continue;
      }
      for (Eigen::Index c = 0; c < d; ++c) {
        if (xv(r, c) > v(s, c)) {
          v(s, c) = xv(r, c);
          arg(s, c) = r;
        }
      }
    }
    if (!any) throw ContractViolation("max-pool over a segment with no valid rows");
  }
  return tape_of(x).push(std::move(v), {x}, [x, arg](Tape& t, const Matrix& g) {
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index s = 0; s < arg.rows(); ++s) {
      for (Eigen::Index c = 0; c < arg.cols(); ++c) dx(arg(s, c), c) += g(s, c);
    }
    t.accumulate(x, dx);
  });
}

}  // namespace stvqa::ad
