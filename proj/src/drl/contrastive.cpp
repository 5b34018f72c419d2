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

#include "udc/drl/contrastive.hpp"

#include <algorithm>

namespace udc::drl {

namespace {

Var term(Graph& g, const Var& z, const Var& s, const Var& s_neg, const Var& w,
         const ContrastiveFlags& flags) {
  const nn::Index b = z.rows();
  // a(j, i) = s_j W z_i
  const Var a = nn::matmul(nn::matmul(s, w), nn::transpose(z));
  const Var ones = g.constant(nn::Matrix::Ones(z.cols(), 1));
  const Var syn = nn::matmul(nn::mul(nn::matmul(s_neg, w), z), ones);  // B x 1

  std::vector<Var> losses;
  for (nn::Index i = 0; i < b; ++i) {
    const Var col = nn::transpose(nn::slice_cols(a, i, 1));  // 1 x B, entry j = s_j W z_i
    const Var pos = nn::slice_cols(col, i, 1);
    std::vector<Var> parts;
    if (!flags.no_synthetic_negative) parts.push_back(nn::slice_rows(syn, i, 1));
    if (!flags.no_batch_negatives) {
      if (i > 0) parts.push_back(nn::slice_cols(col, 0, i));
      if (i + 1 < b) parts.push_back(nn::slice_cols(col, i + 1, b - i - 1));
    }
    if (flags.include_positive) parts.push_back(pos);
    if (parts.empty()) continue;
    const Var denom = nn::log_sum_exp(parts.size() == 1 ? parts.front() : nn::concat_cols(parts));
    losses.push_back(denom - pos);
  }
  if (losses.empty()) return g.constant(nn::Matrix::Zero(1, 1));
  const Var total = losses.size() == 1 ? losses.front() : nn::sum(nn::concat_rows(losses));
  return nn::scale(total, 1.0 / static_cast<double>(losses.size()));
}

}  // namespace

ContrastiveTerms contrastive_losses(Graph& g, const ContrastiveBatch& batch, const Var& w,
                                    const ContrastiveFlags& flags) {
  if (batch.z.rows() < 1) throw ContractError("contrastive batch is empty");
  for (const Var* v : {&batch.zt, &batch.s, &batch.st, &batch.s_neg, &batch.st_neg})
    if (v->rows() != batch.z.rows() || v->cols() != batch.z.cols())
      throw DimensionError("contrastive batch members differ in shape");
  if (flags.no_task) {
    const Var zero = g.constant(nn::Matrix::Zero(1, 1));
    return {zero, zero, zero, zero};
  }
  return {
      term(g, batch.z, batch.s, batch.s_neg, w, flags),
      term(g, batch.z, batch.st, batch.st_neg, w, flags),
      term(g, batch.zt, batch.st, batch.st_neg, w, flags),
      term(g, batch.zt, batch.s, batch.s_neg, w, flags),
  };
}

std::vector<int> synthetic_negative(const std::vector<int>& targets, int vocab_size,
                                    std::mt19937_64& rng) {
  if (targets.empty()) throw ContractError("synthetic negative of an empty target set");
  std::vector<int> sorted = targets;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> pool;
  for (int e = 0; e < vocab_size; ++e)
    if (!std::binary_search(sorted.begin(), sorted.end(), e)) pool.push_back(e);
  if (pool.empty())
    throw ContractError("vocabulary of size " + std::to_string(vocab_size) +
                        " leaves no entity to substitute");

  std::bernoulli_distribution coin(0.5);
  std::vector<bool> replace(sorted.size());
  std::size_t k = 0;
  do {
    k = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      replace[i] = coin(rng);
      k += replace[i] ? 1 : 0;
    }
  } while (k == 0 || k > pool.size());

  // k distinct substitutes: partial Fisher-Yates over the pool.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::vector<int> out;
  std::size_t next = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) out.push_back(replace[i] ? pool[next++] : sorted[i]);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> synthetic_negative(const std::vector<int>& targets, int vocab_size,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return synthetic_negative(targets, vocab_size, rng);
}

}  // namespace udc::drl
