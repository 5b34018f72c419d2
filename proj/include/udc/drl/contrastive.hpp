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

#include "udc/numerics/autodiff.hpp"

namespace udc::drl {

using nn::Graph;
using nn::Var;

struct ContrastiveFlags {
  /// Drop the whole contrastive objective.
  bool no_task = false;
  /// Drop the in-batch negatives (keep the synthetic one).
  bool no_batch_negatives = false;
  /// Drop the synthetic negative (keep the in-batch ones).
  bool no_synthetic_negative = false;
  /// Add the positive pair to each denominator (InfoNCE form).
  bool include_positive = false;
};

/// Stacked per-sample rows (B x dim each): quantized+calibrated z / z~,
/// target sums s / s~ and their synthetic-negative counterparts.
struct ContrastiveBatch {
  Var z, zt;
  Var s, st;
  Var s_neg, st_neg;
};

struct ContrastiveTerms {
  Var intra_co, inter_co, intra_te, inter_te;
};

/// Bilinear InfoNCE-style terms. For the intra CO term, sample i scores
///   -log exp(s_i W z_i) / [exp(s'_i W z_i) + sum_{j != i} exp(s_j W z_i)]
/// and the batch mean is taken. The inter term uses the text targets s~
/// against z; the two text-side terms mirror these with z~. Samples whose
/// denominator ends up empty are left out of the mean.
ContrastiveTerms contrastive_losses(Graph& g, const ContrastiveBatch& batch, const Var& w,
                                    const ContrastiveFlags& flags);

/// Replaces each element of `targets` with probability 0.5 by a distinct
/// entity of the same class outside `targets`, conditioned on at least one
/// replacement. Result is sorted.
std::vector<int> synthetic_negative(const std::vector<int>& targets, int vocab_size,
                                    std::mt19937_64& rng);
std::vector<int> synthetic_negative(const std::vector<int>& targets, int vocab_size,
                                    std::uint64_t seed);

}  // namespace udc::drl
