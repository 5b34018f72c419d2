/*
 * Copyright 2026 The UDC Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <random>
#include <string>
#include <vector>

#include "udc/numerics/autodiff.hpp"

namespace udc::nn {

enum class Activation { identity, gelu, tanh };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

Var activate(const Var& x, Activation a);
Matrix activate(const Matrix& x, Activation a);

/// Glorot-uniform weight matrix.
Matrix glorot(Index in, Index out, std::mt19937_64& rng);

/// y = x W + b, W is (in x out), b is (1 x out).
struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(const std::string& name, Index in, Index out, std::mt19937_64& rng);

  Var forward(Graph& g, const Var& x);
  Matrix evaluate(const Matrix& x) const;
  Index in_width() const { return weight.value.rows(); }
  Index out_width() const { return weight.value.cols(); }
};

/// Affine layers with an activation between consecutive layers (none after
/// the last one).
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, const std::vector<Index>& widths, Activation act,
      std::mt19937_64& rng);

  Var forward(Graph& g, const Var& x);
  Matrix evaluate(const Matrix& x) const;

  Index in_width() const;
  Index out_width() const;
  Activation activation() const { return act_; }
  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }
  ParameterList parameters();

 private:
  std::vector<Linear> layers_;
  Activation act_ = Activation::gelu;
};

/// Parameter-free scaled dot-product attention on the graph.
Var attend(const Var& query, const Var& key, const Var& value, int heads);

/// Learned multi-head attention: projections Q = q Wq, K = k Wk, V = v Wv
/// to `width`, per-head attention, then output projection Wo.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, Index in_width, Index width, int heads,
                     std::mt19937_64& rng);

  Var forward(Graph& g, const Var& query, const Var& key, const Var& value);
  Index width() const { return wo_.value.cols(); }
  int heads() const { return heads_; }
  ParameterList parameters();

  Parameter& wq() { return wq_; }
  Parameter& wk() { return wk_; }
  Parameter& wv() { return wv_; }
  Parameter& wo() { return wo_; }

 private:
  Parameter wq_, wk_, wv_, wo_;
  int heads_ = 1;
};

/// Gain/bias pair applied after row standardization.
struct LayerNorm {
  Parameter gain;
  Parameter bias;

  LayerNorm() = default;
  LayerNorm(const std::string& name, Index width);
  Var forward(Graph& g, const Var& x);
};

}  // namespace udc::nn
