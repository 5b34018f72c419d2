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

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "udc/numerics/tensor.hpp"

namespace udc::nn {

/// A trainable tensor. Gradients accumulate into `grad` across backward
/// passes until the optimizer (or the caller) zeroes them.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool requires_grad = true;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

using ParameterList = std::vector<Parameter*>;

class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;
  bool requires_grad() const;

  Graph& graph() const { return *graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so creation
/// order is a topological order; `backward` walks it once in reverse.
/// One graph per training step; it is not thread-safe.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Matrix&)>;

  Graph() = default;
  /// With `grad_enabled == false` every parameter leaf is a constant, so
  /// nothing records a backward closure (inference mode).
  explicit Graph(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  /// Leaf bound to `p`. Repeated calls with the same parameter return the
  /// same node. Frozen parameters (requires_grad == false) become constants.
  Var param(Parameter& p);

  /// Records an op result. `fn` receives the upstream gradient and must
  /// route it to inputs through `accumulate`. Dropped when !requires_grad.
  Var record(const char* op, Matrix value, bool requires_grad, BackwardFn fn);

  /// Backpropagates from a 1x1 loss and adds leaf gradients into their
  /// Parameters. May be called once per graph.
  void backward(const Var& loss);

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  void accumulate(int id, const Matrix& g);
  /// Adds row i of `g` into row rows[i] of node `id`'s gradient.
  void accumulate_rows(int id, std::span<const int> rows, const Matrix& g);
  /// Gradient reaching node `id` in the last backward pass (empty if none).
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> leaves_;
  bool backward_done_ = false;
  bool grad_enabled_ = true;
};

// Ops. Every op requires its inputs to live on the same graph.

Var matmul(const Var& a, const Var& b);
/// Elementwise sum; `b` may be a 1xN row broadcast over the rows of `a`.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Elementwise product; `b` may be a 1xN row broadcast over the rows of `a`.
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var transpose(const Var& a);

Var gelu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);

Var softmax_rows(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
/// Column-wise mean over rows: (R x C) -> (1 x C).
Var mean_over_rows(const Var& a);
Var sum_over_rows(const Var& a);
Var squared_norm(const Var& a);
/// log(sum(exp(a))) over every coefficient, computed with max subtraction.
Var log_sum_exp(const Var& a);

Var gather_rows(const Var& table, std::span<const int> ids);
Var slice_rows(const Var& a, Index start, Index count);
Var slice_cols(const Var& a, Index start, Index count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);

/// Identity forward, zero gradient backward.
Var stop_gradient(const Var& a);
/// Forward value of `quantized`, gradient routed to `input` unchanged.
Var straight_through(const Var& input, const Var& quantized);

/// Per-row (x - mean) / (std + eps) with population std.
Var standardize_rows(const Var& a, double eps);

/// Mean logistic cross-entropy over all labels, evaluated from logits in
/// log-space. Targets must be 0 or 1.
Var bce_with_logits(const Var& logits, const Matrix& targets);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace udc::nn
