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

#include "stvqa/nn_blocks.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "stvqa/errors.hpp"

namespace stvqa::nn {

ad::Var linear(const ad::Var& x, const Linear& p) {
  if (x.cols() != p.weight.rows()) {
    throw ShapeError("linear: input width " + std::to_string(x.cols()) + " does not match weight rows " +
                     std::to_string(p.weight.rows()));
  }
  return ad::add_row(ad::matmul(x, p.weight), p.bias);
}

ad::Var linear_relu_project(const ad::Var& x, const Linear& p) { return ad::relu(linear(x, p)); }

Matrix positional_encoding(int length, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw std::invalid_argument("positional_encoding: dimension must be even");
  if (length < 0) throw std::invalid_argument("positional_encoding: negative length");
  Matrix pe(length, dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / dim);
    for (int t = 0; t < length; ++t) {
      pe(t, 2 * i) = std::sin(t * freq);
      pe(t, 2 * i + 1) = std::cos(t * freq);
    }
  }
  return pe;
}

ad::Var add_positional_encoding(const ad::Var& x, Eigen::Index segment) {
  if (segment <= 0 || x.rows() % segment != 0) throw ShapeError("add_positional_encoding: segment length");
  const Matrix pe = positional_encoding(static_cast<int>(segment), static_cast<int>(x.cols()));
  Matrix tiled(x.rows(), x.cols());
  for (Eigen::Index s = 0; s < x.rows() / segment; ++s) tiled.middleRows(s * segment, segment) = pe;
  return ad::add_constant(x, tiled);
}

ad::Var conv_unit(const ad::Var& x, const Mask& row_mask, const ConvUnitParams& p, Eigen::Index segment) {
  const ad::Var xm = ad::mask_rows(x, row_mask);
  const ad::Var dw = ad::depthwise_conv_rows(xm, p.depthwise, p.depthwise_bias, segment);
  const ad::Var pw = ad::add_row(ad::matmul(dw, p.pointwise), p.pointwise_bias);
  return ad::layer_norm_rows(ad::add(ad::relu(pw), xm), p.ln_gamma, p.ln_beta, kLayerNormEps);
}

ad::Var conv_encoder(const ad::Var& x, const Mask& row_mask, std::span<const ConvUnitParams> units, bool use_pe,
                     Eigen::Index segment) {
  if (units.empty() && !use_pe) return x;
  ad::Var h = use_pe ? add_positional_encoding(x, segment) : x;
  for (const ConvUnitParams& u : units) h = conv_unit(h, row_mask, u, segment);
  return ad::mask_rows(h, row_mask);
}

ad::Var masked_softmax(const ad::Var& logits, const Mask& col_mask, Eigen::Index segment) {
  return ad::softmax_segments(logits, segment, col_mask);
}

std::vector<double> masked_softmax(std::span<const double> logits, const Mask& mask) {
  if (mask.size() != logits.size()) throw ShapeError("masked_softmax: mask length");
  std::vector<double> p(logits.size(), 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) mx = std::max(mx, logits[i]);
  }
  if (!std::isfinite(mx)) return p;
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) z += (p[i] = std::exp(logits[i] - mx));
  }
  for (double& v : p) v /= z;
  return p;
}

ad::Var masked_maxpool(const ad::Var& x, const Mask& row_mask) {
  return ad::max_rows_segments(x, x.rows(), row_mask);
}

std::vector<double> masked_maxpool(const Matrix& x, const Mask& row_mask) {
  if (static_cast<Eigen::Index>(row_mask.size()) != x.rows()) throw ShapeError("masked_maxpool: mask length");
  std::vector<double> out(static_cast<size_t>(x.cols()), -std::numeric_limits<double>::infinity());
  bool any = false;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (!row_mask[static_cast<size_t>(r)]) continue;
    any = true;
    for (Eigen::Index c = 0; c < x.cols(); ++c) out[static_cast<size_t>(c)] = std::max(out[static_cast<size_t>(c)], x(r, c));
  }
  if (!any) throw ContractViolation("masked_maxpool: no valid rows");
  return out;
}

void add_linear_params(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng) {
  store.add(prefix + ".weight", uniform_init(in, out, in, rng));
  store.add(prefix + ".bias", uniform_init(1, out, in, rng));
}

void add_conv_unit_params(ParamStore& store, const std::string& prefix, int kernel, int d, Rng& rng) {
  store.add(prefix + ".depthwise", uniform_init(kernel, d, kernel, rng));
  store.add(prefix + ".depthwise_bias", uniform_init(1, d, kernel, rng));
  store.add(prefix + ".pointwise", uniform_init(d, d, d, rng));
  store.add(prefix + ".pointwise_bias", uniform_init(1, d, d, rng));
  store.add(prefix + ".ln_gamma", Matrix::Ones(1, d));
  store.add(prefix + ".ln_beta", Matrix::Zero(1, d));
}

void add_conv_encoder_params(ParamStore& store, const std::string& prefix, int n_conv, int kernel, int d, Rng& rng) {
  for (int i = 0; i < n_conv; ++i) add_conv_unit_params(store, prefix + "." + std::to_string(i), kernel, d, rng);
}

Linear bind_linear(const BoundParams& params, const std::string& prefix) {
  return Linear{params[prefix + ".weight"], params[prefix + ".bias"]};
}

ConvUnitParams bind_conv_unit(const BoundParams& params, const std::string& prefix) {
  return ConvUnitParams{params[prefix + ".depthwise"], params[prefix + ".depthwise_bias"],
                        params[prefix + ".pointwise"], params[prefix + ".pointwise_bias"],
                        params[prefix + ".ln_gamma"],  params[prefix + ".ln_beta"]};
}

std::vector<ConvUnitParams> bind_conv_encoder(const BoundParams& params, const std::string& prefix, int n_conv) {
  std::vector<ConvUnitParams> units;
  for (int i = 0; i < n_conv; ++i) units.push_back(bind_conv_unit(params, prefix + "." + std::to_string(i)));
  return units;
}

}  // namespace stvqa::nn
