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

#ifndef STVQA_NN_BLOCKS_HPP_
#define STVQA_NN_BLOCKS_HPP_

#include <span>
#include <string>
#include <vector>

#include "stvqa/autodiff.hpp"
#include "stvqa/params.hpp"
#include "stvqa/rng.hpp"

namespace stvqa::nn {

inline constexpr double kLayerNormEps = 1e-6;

struct Linear {
  ad::Var weight;  // in x out
  ad::Var bias;    // 1 x out
};

// Depthwise-separable conv (depthwise k x d, then pointwise d x d) followed
// by a residual connection and layer normalization.
struct ConvUnitParams {
  ad::Var depthwise;
  ad::Var depthwise_bias;
  ad::Var pointwise;
  ad::Var pointwise_bias;
  ad::Var ln_gamma;
  ad::Var ln_beta;
};

ad::Var linear(const ad::Var& x, const Linear& p);

// ReLU(x W + b). Throws ShapeError when x's width differs from W's rows.
ad::Var linear_relu_project(const ad::Var& x, const Linear& p);

// Sinusoidal encoding: PE[t, 2i] = sin(t / 10000^(2i/d)),
// PE[t, 2i+1] = cos(t / 10000^(2i/d)). Throws std::invalid_argument for odd d.
Matrix positional_encoding(int length, int dim);

// Adds PE to each segment of `segment` rows, restarting positions at 0.
ad::Var add_positional_encoding(const ad::Var& x, Eigen::Index segment);

// LayerNorm(ReLU(Conv(x)) + x) where masked rows of x are zeroed first.
// Same padding keeps the length; the kernel never reads across segments.
ad::Var conv_unit(const ad::Var& x, const Mask& row_mask, const ConvUnitParams& p, Eigen::Index segment);

// Optional PE, then the conv units in order. Masked rows of the result are
// zero, so padding never leaks into consumers.
ad::Var conv_encoder(const ad::Var& x, const Mask& row_mask, std::span<const ConvUnitParams> units, bool use_pe,
                     Eigen::Index segment);

// Softmax across columns, per block of `segment` columns, over valid columns
// only. Rows with no valid column are all zero.
ad::Var masked_softmax(const ad::Var& logits, const Mask& col_mask, Eigen::Index segment);
std::vector<double> masked_softmax(std::span<const double> logits, const Mask& mask);

// Per-dimension max over valid rows -> 1 x d. ContractViolation if none valid.
ad::Var masked_maxpool(const ad::Var& x, const Mask& row_mask);
std::vector<double> masked_maxpool(const Matrix& x, const Mask& row_mask);

// Parameter layout helpers shared by the model and the tests.
void add_linear_params(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng);
void add_conv_unit_params(ParamStore& store, const std::string& prefix, int kernel, int d, Rng& rng);
void add_conv_encoder_params(ParamStore& store, const std::string& prefix, int n_conv, int kernel, int d, Rng& rng);
Linear bind_linear(const BoundParams& params, const std::string& prefix);
ConvUnitParams bind_conv_unit(const BoundParams& params, const std::string& prefix);
std::vector<ConvUnitParams> bind_conv_encoder(const BoundParams& params, const std::string& prefix, int n_conv);

}  // namespace stvqa::nn

#endif  // STVQA_NN_BLOCKS_HPP_
