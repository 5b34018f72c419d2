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

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>

#include "udc/error.hpp"

namespace udc::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

inline std::string shape_string(Index rows, Index cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

template <typename Derived>
std::string shape_string(const Eigen::EigenBase<Derived>& m) {
  return shape_string(m.rows(), m.cols());
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const std::string& what) {
  if (!m.derived().allFinite()) throw NumericError("non-finite values in " + what);
}

/// Population mean and standard deviation over every coefficient.
template <typename Derived>
std::pair<typename Derived::Scalar, typename Derived::Scalar> mean_std(
    const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.size() == 0) throw ContractError("mean_std of an empty tensor");
  const Scalar mean = x.mean();
  const Scalar var = (x.derived().array() - mean).square().mean();
  return {mean, std::sqrt(var)};
}

/// Row-wise population mean and standard deviation (one entry per row).
template <typename Derived>
std::pair<Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>,
          Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>>
rowwise_mean_std(const Eigen::DenseBase<Derived>& x) {
  using Col = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>;
  if (x.size() == 0) throw ContractError("rowwise_mean_std of an empty tensor");
  Col mean = x.derived().rowwise().mean();
  Col var = (x.derived().colwise() - mean).array().square().rowwise().mean();
  return {mean, var.array().sqrt().matrix()};
}

/// Row-wise softmax with max subtraction.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> softmax_rows(
    const Eigen::MatrixBase<Derived>& x) {
  using M = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  M out = x.colwise() - x.rowwise().maxCoeff();
  out = out.array().exp();
  out = out.array().colwise() / out.rowwise().sum().array();
  return out;
}

/// Parameter-free multi-head scaled dot-product attention. Each head owns a
/// contiguous slice of width `width / heads`; heads are concatenated.
template <typename DQ, typename DK, typename DV>
Eigen::Matrix<typename DQ::Scalar, Eigen::Dynamic, Eigen::Dynamic> scaled_dot_attention(
    const Eigen::MatrixBase<DQ>& query, const Eigen::MatrixBase<DK>& key,
    const Eigen::MatrixBase<DV>& value, int heads) {
  using M = Eigen::Matrix<typename DQ::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (key.rows() != value.rows())
    throw DimensionError("attention key/value row counts differ: " + shape_string(key) +
                         " vs " + shape_string(value));
  if (key.rows() == 0) throw ContractError("attention over an empty key set");
  if (query.cols() != key.cols())
    throw DimensionError("attention query/key widths differ");
  if (heads <= 0 || query.cols() % heads != 0 || value.cols() % heads != 0)
    throw DimensionError("head count must divide the attention width");
  const Index dk = query.cols() / heads;
  const Index dv = value.cols() / heads;
  M out(query.rows(), value.cols());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  for (int h = 0; h < heads; ++h) {
    M scores = (query.middleCols(h * dk, dk) * key.middleCols(h * dk, dk).transpose()) * scale;
    out.middleCols(h * dv, dv) = softmax_rows(scores) * value.middleCols(h * dv, dv);
  }
  return out;
}

inline double cosine_similarity(const RowVector& a, const RowVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace udc::nn
