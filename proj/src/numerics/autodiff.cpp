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

#include "udc/numerics/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace udc::nn {

const Matrix& Var::value() const { return graph_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1)
    throw ContractError("scalar() on a non-scalar tensor " + shape_string(v));
  return v(0, 0);
}

bool Var::requires_grad() const { return graph_->requires_grad(id_); }

Var Graph::constant(Matrix value) {
  return record("constant", std::move(value), false, nullptr);
}

Var Graph::param(Parameter& p) {
  if (auto it = leaves_.find(&p); it != leaves_.end()) return Var(this, it->second);
  const bool rg = p.requires_grad && grad_enabled_;
  Var v = record(p.name.c_str(), p.value, rg, nullptr);
  nodes_[v.id()].param = rg ? &p : nullptr;
  leaves_.emplace(&p, v.id());
  return v;
}

Var Graph::record(const char* op, Matrix value, bool requires_grad, BackwardFn fn) {
  if (!value.allFinite()) throw NumericError(std::string("non-finite output from op '") + op + "'");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Graph::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Graph::accumulate_rows(int id, std::span<const int> rows, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) n.grad.row(rows[i]) += g.row(static_cast<Index>(i));
}

void Graph::backward(const Var& loss) {
  if (loss.graph_ != this) throw ContractError("loss belongs to another graph");
  const Matrix& lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1)
    throw ContractError("backward needs a scalar loss, got " + shape_string(lv));
  if (backward_done_) throw ContractError("backward already ran on this graph");
  backward_done_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

namespace {

Graph& same_graph(const Var& a, const Var& b) {
  if (&a.graph() != &b.graph()) throw ContractError("op inputs live on different graphs");
  return a.graph();
}

bool is_row_broadcast(const Matrix& a, const Matrix& b) {
  return b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols();
}

void check_elementwise(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return;
  if (is_row_broadcast(a, b)) return;
  throw DimensionError(std::string(op) + ": shapes " + shape_string(a) + " and " +
                       shape_string(b) + " are not compatible");
}

Matrix reduce_to(const Matrix& g, const Matrix& target) {
  if (g.rows() == target.rows()) return g;
  return g.colwise().sum();
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Graph& g = same_graph(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows())
    throw DimensionError("matmul: inner dimensions differ " + shape_string(av) + " x " +
                         shape_string(bv));
  const int ia = a.id(), ib = b.id();
  return g.record("matmul", av * bv, a.requires_grad() || b.requires_grad(),
                  [ia, ib](Graph& gr, const Matrix& up) {
                    if (gr.requires_grad(ia)) gr.accumulate(ia, up * gr.value(ib).transpose());
                    if (gr.requires_grad(ib)) gr.accumulate(ib, gr.value(ia).transpose() * up);
                  });
}

Var add(const Var& a, const Var& b) {
  Graph& g = same_graph(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  check_elementwise("add", av, bv);
  Matrix out = is_row_broadcast(av, bv) ? Matrix(av.rowwise() + bv.row(0)) : Matrix(av + bv);
  const int ia = a.id(), ib = b.id();
  return g.record("add", std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Graph& gr, const Matrix& up) {
                    gr.accumulate(ia, up);
                    if (gr.requires_grad(ib)) gr.accumulate(ib, reduce_to(up, gr.value(ib)));
                  });
}

Var sub(const Var& a, const Var& b) {
  Graph& g = same_graph(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  check_elementwise("sub", av, bv);
  Matrix out = is_row_broadcast(av, bv) ? Matrix(av.rowwise() - bv.row(0)) : Matrix(av - bv);
  const int ia = a.id(), ib = b.id();
  return g.record("sub", std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Graph& gr, const Matrix& up) {
                    gr.accumulate(ia, up);
                    if (gr.requires_grad(ib)) gr.accumulate(ib, -reduce_to(up, gr.value(ib)));
                  });
}

Var mul(const Var& a, const Var& b) {
  Graph& g = same_graph(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  check_elementwise("mul", av, bv);
  const bool bc = is_row_broadcast(av, bv);
  Matrix out = bc ? Matrix(av.array().rowwise() * bv.row(0).array())
                  : Matrix(av.array() * bv.array());
  const int ia = a.id(), ib = b.id();
  return g.record("mul", std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib, bc](Graph& gr, const Matrix& up) {
                    const Matrix& x = gr.value(ia);
                    const Matrix& y = gr.value(ib);
                    if (gr.requires_grad(ia)) {
                      if (bc)
                        gr.accumulate(ia, up.array().rowwise() * y.row(0).array());
                      else
                        gr.accumulate(ia, up.array() * y.array());
                    }
                    if (gr.requires_grad(ib)) {
                      Matrix gy = up.array() * x.array();
                      gr.accumulate(ib, bc ? Matrix(gy.colwise().sum()) : gy);
                    }
                  });
}

Var scale(const Var& a, double s) {
  const int ia = a.id();
  return a.graph().record("scale", a.value() * s, a.requires_grad(),
                          [ia, s](Graph& gr, const Matrix& up) { gr.accumulate(ia, up * s); });
}

Var transpose(const Var& a) {
  const int ia = a.id();
  return a.graph().record("transpose", a.value().transpose(), a.requires_grad(),
                          [ia](Graph& gr, const Matrix& up) { gr.accumulate(ia, up.transpose()); });
}

Var gelu(const Var& a) {
  const Matrix& x = a.value();
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  Matrix out = x.unaryExpr([=](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); });
  const int ia = a.id();
  return a.graph().record("gelu", std::move(out), a.requires_grad(),
                          [ia, inv_sqrt2](Graph& gr, const Matrix& up) {
                            const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
                            Matrix d = gr.value(ia).unaryExpr([=](double v) {
                              const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
                              return cdf + v * inv_sqrt2pi * std::exp(-0.5 * v * v);
                            });
                            gr.accumulate(ia, up.cwiseProduct(d));
                          });
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh();
  const int ia = a.id();
  const int self = static_cast<int>(a.graph().size());
  return a.graph().record("tanh", std::move(out), a.requires_grad(),
                          [ia, self](Graph& gr, const Matrix& up) {
                            const Matrix& y = gr.value(self);
                            gr.accumulate(ia, up.array() * (1.0 - y.array().square()));
                          });
}

Var sigmoid(const Var& a) {
  Matrix out = a.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  const int ia = a.id();
  const int self = static_cast<int>(a.graph().size());
  return a.graph().record("sigmoid", std::move(out), a.requires_grad(),
                          [ia, self](Graph& gr, const Matrix& up) {
                            const Matrix& y = gr.value(self);
                            gr.accumulate(ia, up.array() * y.array() * (1.0 - y.array()));
                          });
}

Var softmax_rows(const Var& a) {
  Matrix out = nn::softmax_rows(a.value());
  const int ia = a.id();
  const int self = static_cast<int>(a.graph().size());
  return a.graph().record("softmax_rows", std::move(out), a.requires_grad(),
                          [ia, self](Graph& gr, const Matrix& up) {
                            const Matrix& y = gr.value(self);
                            Vector dots = (up.array() * y.array()).rowwise().sum();
                            Matrix g = y.array() * (up.colwise() - dots).array();
                            gr.accumulate(ia, g);
                          });
}

Var sum(const Var& a) {
  const int ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return a.graph().record("sum", Matrix::Constant(1, 1, a.value().sum()), a.requires_grad(),
                          [ia, r, c](Graph& gr, const Matrix& up) {
                            gr.accumulate(ia, Matrix::Constant(r, c, up(0, 0)));
                          });
}

Var mean(const Var& a) {
  if (a.value().size() == 0) throw ContractError("mean of an empty tensor");
  const int ia = a.id();
  const Index r = a.rows(), c = a.cols();
  const double n = static_cast<double>(r * c);
  return a.graph().record("mean", Matrix::Constant(1, 1, a.value().mean()), a.requires_grad(),
                          [ia, r, c, n](Graph& gr, const Matrix& up) {
                            gr.accumulate(ia, Matrix::Constant(r, c, up(0, 0) / n));
                          });
}

Var mean_over_rows(const Var& a) {
  if (a.rows() == 0) throw ContractError("mean_over_rows of an empty tensor");
  const int ia = a.id();
  const Index r = a.rows();
  return a.graph().record("mean_over_rows", a.value().colwise().mean(), a.requires_grad(),
                          [ia, r](Graph& gr, const Matrix& up) {
                            gr.accumulate(ia, up.replicate(r, 1) / static_cast<double>(r));
                          });
}

Var sum_over_rows(const Var& a) {
  const int ia = a.id();
  const Index r = a.rows();
  return a.graph().record("sum_over_rows", a.value().colwise().sum(), a.requires_grad(),
                          [ia, r](Graph& gr, const Matrix& up) {
                            gr.accumulate(ia, up.replicate(r, 1));
                          });
}

Var squared_norm(const Var& a) {
  const int ia = a.id();
  return a.graph().record("squared_norm", Matrix::Constant(1, 1, a.value().squaredNorm()),
                          a.requires_grad(), [ia](Graph& gr, const Matrix& up) {
                            gr.accumulate(ia, 2.0 * up(0, 0) * gr.value(ia));
                          });
}

Var log_sum_exp(const Var& a) {
  const Matrix& x = a.value();
  if (x.size() == 0) throw ContractError("log_sum_exp of an empty tensor");
  const double m = x.maxCoeff();
  const double lse = m + std::log((x.array() - m).exp().sum());
  const int ia = a.id();
  return a.graph().record("log_sum_exp", Matrix::Constant(1, 1, lse), a.requires_grad(),
                          [ia, lse](Graph& gr, const Matrix& up) {
                            gr.accumulate(ia, up(0, 0) * (gr.value(ia).array() - lse).exp().matrix());
                          });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
  const Matrix& t = table.value();
  Matrix out(static_cast<Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows())
      throw ContractError("row id " + std::to_string(ids[i]) + " out of range for table with " +
                          std::to_string(t.rows()) + " rows");
    out.row(static_cast<Index>(i)) = t.row(ids[i]);
  }
  const int it = table.id();
  std::vector<int> idx(ids.begin(), ids.end());
  return table.graph().record("gather_rows", std::move(out), table.requires_grad(),
                              [it, idx = std::move(idx)](Graph& gr, const Matrix& up) {
                                gr.accumulate_rows(it, idx, up);
                              });
}

Var slice_rows(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw DimensionError("slice_rows out of range");
  const int ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return a.graph().record("slice_rows", a.value().middleRows(start, count), a.requires_grad(),
                          [ia, r, c, start, count](Graph& gr, const Matrix& up) {
                            Matrix g = Matrix::Zero(r, c);
                            g.middleRows(start, count) = up;
                            gr.accumulate(ia, g);
                          });
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw DimensionError("slice_cols out of range");
  const int ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return a.graph().record("slice_cols", a.value().middleCols(start, count), a.requires_grad(),
                          [ia, r, c, start, count](Graph& gr, const Matrix& up) {
                            Matrix g = Matrix::Zero(r, c);
                            g.middleCols(start, count) = up;
                            gr.accumulate(ia, g);
                          });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows of nothing");
  Graph& g = parts.front().graph();
  const Index c = parts.front().cols();
  Index r = 0;
  bool rg = false;
  for (const Var& p : parts) {
    same_graph(parts.front(), p);
    if (p.cols() != c) throw DimensionError("concat_rows: column counts differ");
    r += p.rows();
    rg = rg || p.requires_grad();
  }
  Matrix out(r, c);
  std::vector<std::pair<int, Index>> spans;
  Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    spans.emplace_back(p.id(), at);
    at += p.rows();
  }
  return g.record("concat_rows", std::move(out), rg,
                  [spans = std::move(spans)](Graph& gr, const Matrix& up) {
                    for (const auto& [id, off] : spans)
                      if (gr.requires_grad(id)) gr.accumulate(id, up.middleRows(off, gr.value(id).rows()));
                  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols of nothing");
  Graph& g = parts.front().graph();
  const Index r = parts.front().rows();
  Index c = 0;
  bool rg = false;
  for (const Var& p : parts) {
    same_graph(parts.front(), p);
    if (p.rows() != r) throw DimensionError("concat_cols: row counts differ");
    c += p.cols();
    rg = rg || p.requires_grad();
  }
  Matrix out(r, c);
  std::vector<std::pair<int, Index>> spans;
  Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    spans.emplace_back(p.id(), at);
    at += p.cols();
  }
  return g.record("concat_cols", std::move(out), rg,
                  [spans = std::move(spans)](Graph& gr, const Matrix& up) {
                    for (const auto& [id, off] : spans)
                      if (gr.requires_grad(id)) gr.accumulate(id, up.middleCols(off, gr.value(id).cols()));
                  });
}

Var stop_gradient(const Var& a) { return a.graph().constant(a.value()); }

Var straight_through(const Var& input, const Var& quantized) {
  Graph& g = same_graph(input, quantized);
  if (input.rows() != quantized.rows() || input.cols() != quantized.cols())
    throw DimensionError("straight_through: shapes differ");
  const int ii = input.id();
  return g.record("straight_through", quantized.value(), input.requires_grad(),
                  [ii](Graph& gr, const Matrix& up) { gr.accumulate(ii, up); });
}

Var standardize_rows(const Var& a, double eps) {
  const Matrix& x = a.value();
  const Index n = x.cols();
  if (n == 0) throw ContractError("standardize_rows of an empty row");
  Vector mu = x.rowwise().mean();
  Matrix centered = x.colwise() - mu;
  Vector sigma = (centered.array().square().rowwise().mean()).sqrt();
  Vector denom = sigma.array() + eps;
  Matrix out = centered.array().colwise() / denom.array();
  const int ia = a.id();
  return a.graph().record(
      "standardize_rows", std::move(out), a.requires_grad(),
      [ia, centered, sigma, denom, n](Graph& gr, const Matrix& up) {
        Matrix g(up.rows(), up.cols());
        for (Index r = 0; r < up.rows(); ++r) {
          const double s = denom(r);
          RowVector gr_row = (up.row(r).array() - up.row(r).mean()) / s;
          if (sigma(r) > 0.0) {
            const double gc = up.row(r).dot(centered.row(r));
            gr_row -= (gc / (s * s * static_cast<double>(n) * sigma(r))) * centered.row(r);
          }
          g.row(r) = gr_row;
        }
        gr.accumulate(ia, g);
      });
}

Var bce_with_logits(const Var& logits, const Matrix& targets) {
  const Matrix& x = logits.value();
  if (x.rows() != targets.rows() || x.cols() != targets.cols())
    throw DimensionError("bce: logits " + shape_string(x) + " vs targets " + shape_string(targets));
  if (x.size() == 0) throw ContractError("bce over zero labels");
  if (!(targets.array() == 0.0 || targets.array() == 1.0).all())
    throw ContractError("bce targets must be 0 or 1");
  const double n = static_cast<double>(x.size());
  double total = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    total += std::max(v, 0.0) - v * targets.data()[i] + std::log1p(std::exp(-std::abs(v)));
  }
  const int il = logits.id();
  return logits.graph().record("bce_with_logits", Matrix::Constant(1, 1, total / n),
                               logits.requires_grad(),
                               [il, targets, n](Graph& gr, const Matrix& up) {
                                 Matrix p = gr.value(il).unaryExpr(
                                     [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
                                 gr.accumulate(il, (up(0, 0) / n) * (p - targets));
                               });
}

}  // namespace udc::nn
