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

#include <cstdint>
#include <random>
#include <vector>

#include "udc/numerics/archive.hpp"
#include "udc/numerics/tensor.hpp"

namespace udc::drl {

using nn::Index;
using nn::Matrix;
using nn::RowVector;

/// L levels of code vectors, each level a (codes x dim) matrix. One
/// instance is shared by the collaborative and the textual branch.
class Codebook {
 public:
  Codebook() = default;
  Codebook(int levels, int codes_per_level, Index dim);

  int levels() const { return static_cast<int>(levels_.size()); }
  int codes(int level) const { return static_cast<int>(levels_.at(level).rows()); }
  Index dim() const { return levels_.empty() ? 0 : levels_.front().cols(); }

  Matrix& level(int l) { return levels_.at(static_cast<std::size_t>(l)); }
  const Matrix& level(int l) const { return levels_.at(static_cast<std::size_t>(l)); }

 private:
  std::vector<Matrix> levels_;
};

/// Greedy residual quantization of one vector.
struct QuantizationResult {
  /// Chosen code index per level.
  std::vector<int> indices;
  /// residuals[0] is the encoder output r_0; residuals[l] is what is left
  /// after level l, so level l quantizes residuals[l - 1] (0-based: level
  /// index k consumes residuals[k]).
  std::vector<RowVector> residuals;
  /// Sum of the chosen code vectors.
  RowVector z;

  const RowVector& input_of_level(int level) const { return residuals.at(static_cast<std::size_t>(level)); }
  const RowVector& final_residual() const { return residuals.back(); }
};

/// Nearest code per level (squared Euclidean, ties to the lowest index),
/// subtracting the chosen code before moving to the next level.
QuantizationResult quantize_residual(const RowVector& r0, const Codebook& book);

/// Index of the nearest row of `codes` (ties to the lowest index).
int nearest_code(const RowVector& x, const Matrix& codes);

enum class NormalizerMode {
  /// n_i is an EMA of assignment counts; c_i = o_i / n_i is a centroid.
  count,
  /// n_i is an EMA of summed assigned vectors; c_i = o_i / n_i elementwise.
  literal,
};

enum class EmaTarget {
  /// Level-l codes move toward the level-l residual inputs.
  residual,
  /// Every level moves toward the full quantized vector z.
  literal_z,
};

NormalizerMode parse_normalizer_mode(const std::string& s);
EmaTarget parse_ema_target(const std::string& s);
std::string to_string(NormalizerMode m);
std::string to_string(EmaTarget t);

struct DistillConfig {
  double kappa = 0.99;
  NormalizerMode normalizer = NormalizerMode::count;
  EmaTarget target = EmaTarget::residual;
  /// Blend each assigned vector with the cross-view attention term. When
  /// false, the standard single-branch EMA is used.
  bool co_teacher = true;
  int attention_heads = 4;
  bool dead_code_reset = true;
  double dead_code_threshold = 1e-3;
  /// Guard for the elementwise division in literal mode.
  double literal_eps = 1e-8;
};

/// EMA accumulators per level: numerators o (codes x dim), scalar counts and,
/// for literal mode, vector normalizers.
struct DistillState {
  std::vector<Matrix> numerators;
  std::vector<RowVector> counts;
  std::vector<Matrix> vector_norms;
  std::uint64_t updates = 0;
  std::uint64_t seed = 0;
  std::uint64_t resets = 0;

  /// o = c, n = 1 for every code.
  static DistillState from_codebook(const Codebook& book, std::uint64_t seed);

  void save(nn::TensorArchive& ar, const std::string& prefix) const;
  void load(const nn::TensorArchive& ar, const std::string& prefix);
};

/// One batch member as seen by the codebook update: both branches'
/// quantizations and (for literal_z mode) the vectors z_d, z~_d.
struct EmaSample {
  QuantizationResult co;
  QuantizationResult te;
  RowVector z_co;
  RowVector z_te;
};

/// Co-teacher EMA update of every level.
///
/// For level l, with x_d the CO vector of sample d at that level and x~_d
/// its text counterpart, the cross-view terms are parameter-free attention
/// over the batch: b_d = Attn(x_d, X~, X~) and b~_d = Attn(x~_d, X, X).
/// Then for code i with CO assignees N_i and text assignees N~_i:
///   o_i <- k o_i + (1-k) [ sum_{N_i} (x_d + b~_d)/2 + sum_{N~_i} (x~_d + b_d)/2 ]
///   n_i <- k n_i + (1-k) (|N_i| + |N~_i|)          (count mode)
///   c_i <- o_i / n_i
/// Codes whose count falls below the threshold are re-seeded from a random
/// vector of the batch. Nothing here touches a gradient graph.
void codebook_ema_update(Codebook& book, DistillState& state, const std::vector<EmaSample>& batch,
                         const DistillConfig& cfg);

void save_codebook(nn::TensorArchive& ar, const Codebook& book, const std::string& prefix);
Codebook load_codebook(const nn::TensorArchive& ar, const std::string& prefix);

}  // namespace udc::drl
