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

#include "udc/numerics/layers.hpp"

#include <cmath>
#include <numbers>

namespace udc::nn {

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "gelu") return Activation::gelu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::gelu: return "gelu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Var activate(const Var& x, Activation a) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::gelu: return gelu(x);
    case Activation::tanh: return tanh(x);
  }
  return x;
}

Matrix activate(const Matrix& x, Activation a) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::gelu:
      return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); });
    case Activation::tanh: return x.array().tanh();
  }
  return x;
}

Matrix glorot(Index in, Index out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix w(in, out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  return w;
}

Linear::Linear(const std::string& name, Index in, Index out, std::mt19937_64& rng)
    : weight(name + ".weight", glorot(in, out, rng)), bias(name + ".bias", Matrix::Zero(1, out)) {}

Var Linear::forward(Graph& g, const Var& x) {
  if (x.cols() != in_width())
    throw DimensionError(weight.name + ": input width " + std::to_string(x.cols()) +
                         " but layer expects " + std::to_string(in_width()));
  return add(matmul(x, g.param(weight)), g.param(bias));
}

Matrix Linear::evaluate(const Matrix& x) const {
  if (x.cols() != in_width())
    throw DimensionError(weight.name + ": input width " + std::to_string(x.cols()) +
                         " but layer expects " + std::to_string(in_width()));
  Matrix y = x * weight.value;
  y.rowwise() += bias.value.row(0);
  return y;
}

Mlp::Mlp(const std::string& name, const std::vector<Index>& widths, Activation act,
         std::mt19937_64& rng)
    : act_(act) {
  if (widths.size() < 2) throw ConfigError(name + ": an MLP needs at least two widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    layers_.emplace_back(name + "." + std::to_string(i), widths[i], widths[i + 1], rng);
}

Var Mlp::forward(Graph& g, const Var& x) {
  Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(g, h);
    if (i + 1 < layers_.size()) h = activate(h, act_);
  }
  return h;
}

Matrix Mlp::evaluate(const Matrix& x) const {
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].evaluate(h);
    if (i + 1 < layers_.size()) h = activate(h, act_);
  }
  return h;
}

Index Mlp::in_width() const { return layers_.front().in_width(); }
Index Mlp::out_width() const { return layers_.back().out_width(); }

ParameterList Mlp::parameters() {
  ParameterList out;
  for (Linear& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

Var attend(const Var& query, const Var& key, const Var& value, int heads) {
  if (key.rows() != value.rows())
    throw DimensionError("attention key/value row counts differ");
  if (key.rows() == 0) throw ContractError("attention over an empty key set");
  if (query.cols() != key.cols()) throw DimensionError("attention query/key widths differ");
  if (heads <= 0 || query.cols() % heads != 0 || value.cols() % heads != 0)
    throw DimensionError("head count must divide the attention width");
  const Index dk = query.cols() / heads;
  const Index dv = value.cols() / heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(dk));
  if (heads == 1) return matmul(softmax_rows(scale(matmul(query, transpose(key)), s)), value);
  std::vector<Var> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(query, h * dk, dk);
    Var kh = slice_cols(key, h * dk, dk);
    Var vh = slice_cols(value, h * dv, dv);
    outs.push_back(matmul(softmax_rows(scale(matmul(qh, transpose(kh)), s)), vh));
  }
  return concat_cols(outs);
}

MultiHeadAttention::MultiHeadAttention(const std::string& name, Index in_width, Index width,
                                       int heads, std::mt19937_64& rng)
    : wq_(name + ".wq", glorot(in_width, width, rng)),
      wk_(name + ".wk", glorot(in_width, width, rng)),
      wv_(name + ".wv", glorot(in_width, width, rng)),
      wo_(name + ".wo", glorot(width, width, rng)),
      heads_(heads) {
  if (heads <= 0 || width % heads != 0)
    throw ConfigError(name + ": head count must divide the attention width");
}

Var MultiHeadAttention::forward(Graph& g, const Var& query, const Var& key, const Var& value) {
  Var q = matmul(query, g.param(wq_));
  Var k = matmul(key, g.param(wk_));
  Var v = matmul(value, g.param(wv_));
  return matmul(attend(q, k, v, heads_), g.param(wo_));
}

ParameterList MultiHeadAttention::parameters() { return {&wq_, &wk_, &wv_, &wo_}; }

LayerNorm::LayerNorm(const std::string& name, Index width)
    : gain(name + ".gain", Matrix::Ones(1, width)), bias(name + ".bias", Matrix::Zero(1, width)) {}

Var LayerNorm::forward(Graph& g, const Var& x) {
  return add(mul(standardize_rows(x, 1e-5), g.param(gain)), g.param(bias));
}

}  // namespace udc::nn
