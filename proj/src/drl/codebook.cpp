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

#include "udc/drl/codebook.hpp"

#include <limits>

#include "udc/ehr/synthetic.hpp"

namespace udc::drl {

Codebook::Codebook(int levels, int codes_per_level, Index dim) {
  if (levels <= 0) throw ConfigError("codebook needs at least one level");
  if (codes_per_level <= 0) throw ConfigError("codebook level needs at least one code");
  if (dim <= 0) throw ConfigError("codebook width must be positive");
  levels_.assign(static_cast<std::size_t>(levels), Matrix::Zero(codes_per_level, dim));
}

int nearest_code(const RowVector& x, const Matrix& codes) {
  if (codes.rows() == 0) throw ContractError("empty codebook level");
  if (codes.cols() != x.size())
    throw ContractError("quantizer width mismatch: input " + std::to_string(x.size()) +
                        ", codes " + std::to_string(codes.cols()));
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < codes.rows(); ++i) {
    const double d = (codes.row(i) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

QuantizationResult quantize_residual(const RowVector& r0, const Codebook& book) {
  if (book.levels() == 0) throw ContractError("empty codebook");
  QuantizationResult q;
  q.indices.reserve(static_cast<std::size_t>(book.levels()));
  q.residuals.reserve(static_cast<std::size_t>(book.levels()) + 1);
  q.residuals.push_back(r0);
  q.z = RowVector::Zero(r0.size());
  for (int l = 0; l < book.levels(); ++l) {
    const int k = nearest_code(q.residuals.back(), book.level(l));
    q.indices.push_back(k);
    q.z += book.level(l).row(k);
    q.residuals.push_back(q.residuals.back() - book.level(l).row(k));
  }
  return q;
}

NormalizerMode parse_normalizer_mode(const std::string& s) {
  if (s == "count") return NormalizerMode::count;
  if (s == "literal") return NormalizerMode::literal;
  throw ConfigError("unknown normalizer mode '" + s + "' (expected count|literal)");
}

EmaTarget parse_ema_target(const std::string& s) {
  if (s == "residual") return EmaTarget::residual;
  if (s == "literal_z") return EmaTarget::literal_z;
  throw ConfigError("unknown ema target '" + s + "' (expected residual|literal_z)");
}

std::string to_string(NormalizerMode m) { return m == NormalizerMode::count ? "count" : "literal"; }
std::string to_string(EmaTarget t) { return t == EmaTarget::residual ? "residual" : "literal_z"; }

DistillState DistillState::from_codebook(const Codebook& book, std::uint64_t seed) {
  DistillState s;
  s.seed = seed;
  for (int l = 0; l < book.levels(); ++l) {
    s.numerators.push_back(book.level(l));
    s.counts.push_back(RowVector::Ones(book.codes(l)));
    s.vector_norms.push_back(Matrix::Ones(book.codes(l), book.dim()));
  }
  return s;
}

void DistillState::save(nn::TensorArchive& ar, const std::string& prefix) const {
  for (std::size_t l = 0; l < numerators.size(); ++l) {
    const std::string k = prefix + ".l" + std::to_string(l);
    ar.put(k + ".o", numerators[l]);
    ar.put(k + ".n", counts[l]);
    ar.put(k + ".nvec", vector_norms[l]);
  }
  Matrix meta(1, 5);
  meta << static_cast<double>(numerators.size()), static_cast<double>(updates),
      static_cast<double>(resets), static_cast<double>(seed >> 32),
      static_cast<double>(seed & 0xffffffffULL);
  ar.put(prefix + ".meta", meta);
}

void DistillState::load(const nn::TensorArchive& ar, const std::string& prefix) {
  const Matrix& meta = ar.get(prefix + ".meta");
  const auto levels = static_cast<std::size_t>(meta(0, 0));
  numerators.clear();
  counts.clear();
  vector_norms.clear();
  for (std::size_t l = 0; l < levels; ++l) {
    const std::string k = prefix + ".l" + std::to_string(l);
    numerators.push_back(ar.get(k + ".o"));
    counts.push_back(ar.get(k + ".n"));
    vector_norms.push_back(ar.get(k + ".nvec"));
  }
  updates = static_cast<std::uint64_t>(meta(0, 1));
  resets = static_cast<std::uint64_t>(meta(0, 2));
  seed = (static_cast<std::uint64_t>(meta(0, 3)) << 32) | static_cast<std::uint64_t>(meta(0, 4));
}

namespace {

// Per-level vectors the update pulls codes toward.
Matrix stack_targets(const std::vector<EmaSample>& batch, int level, bool text, EmaTarget target) {
  const Index dim = (text ? batch.front().te : batch.front().co).z.size();
  Matrix x(static_cast<Index>(batch.size()), dim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    if (target == EmaTarget::residual)
      x.row(static_cast<Index>(i)) = (text ? s.te : s.co).input_of_level(level);
    else
      x.row(static_cast<Index>(i)) = text ? s.z_te : s.z_co;
  }
  return x;
}

}  // namespace

void codebook_ema_update(Codebook& book, DistillState& state, const std::vector<EmaSample>& batch,
                         const DistillConfig& cfg) {
  if (cfg.kappa < 0.0 || cfg.kappa > 1.0) throw ConfigError("kappa must lie in [0, 1]");
  if (static_cast<int>(state.numerators.size()) != book.levels())
    throw ContractError("distill state does not match the codebook");
  if (batch.empty()) return;
  const double k = cfg.kappa;
  std::mt19937_64 rng(ehr::mix_seed(state.seed, state.updates));

  for (int l = 0; l < book.levels(); ++l) {
    const Matrix x = stack_targets(batch, l, false, cfg.target);
    const Matrix xt = stack_targets(batch, l, true, cfg.target);
    Matrix pull_co = x;   // what a CO assignment contributes
    Matrix pull_te = xt;  // what a text assignment contributes
    if (cfg.co_teacher) {
      const Matrix b = nn::scaled_dot_attention(x, xt, xt, cfg.attention_heads);
      const Matrix bt = nn::scaled_dot_attention(xt, x, x, cfg.attention_heads);
      pull_co = 0.5 * (x + bt);
      pull_te = 0.5 * (xt + b);
    }

    const int codes = book.codes(l);
    Matrix sum = Matrix::Zero(codes, book.dim());
    Matrix vec_sum = Matrix::Zero(codes, book.dim());
    RowVector count = RowVector::Zero(codes);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto r = static_cast<Index>(i);
      const int ic = batch[i].co.indices.at(static_cast<std::size_t>(l));
      const int it = batch[i].te.indices.at(static_cast<std::size_t>(l));
      sum.row(ic) += pull_co.row(r);
      sum.row(it) += pull_te.row(r);
      vec_sum.row(ic) += x.row(r);
      vec_sum.row(it) += xt.row(r);
      count(ic) += 1.0;
      count(it) += 1.0;
    }

    Matrix& o = state.numerators[static_cast<std::size_t>(l)];
    RowVector& n = state.counts[static_cast<std::size_t>(l)];
    Matrix& nv = state.vector_norms[static_cast<std::size_t>(l)];
    o = k * o + (1.0 - k) * sum;
    n = k * n + (1.0 - k) * count;
    nv = k * nv + (1.0 - k) * vec_sum;

    Matrix& c = book.level(l);
    for (int i = 0; i < codes; ++i) {
      if (cfg.normalizer == NormalizerMode::count) {
        if (n(i) > 0.0) c.row(i) = o.row(i) / n(i);
      } else {
        for (Index j = 0; j < c.cols(); ++j)
          if (std::abs(nv(i, j)) > cfg.literal_eps) c(i, j) = o(i, j) / nv(i, j);
      }
    }

    if (cfg.dead_code_reset) {
      std::uniform_int_distribution<Index> pick(0, 2 * x.rows() - 1);
      for (int i = 0; i < codes; ++i) {
        if (n(i) >= cfg.dead_code_threshold) continue;
        const Index p = pick(rng);
        c.row(i) = p < x.rows() ? x.row(p) : xt.row(p - x.rows());
        o.row(i) = c.row(i);
        n(i) = 1.0;
        nv.row(i).setOnes();
        ++state.resets;
      }
    }
    nn::require_finite(c, "codebook level " + std::to_string(l) + " after EMA update");
    nn::require_finite(o, "EMA numerators at level " + std::to_string(l));
  }
  ++state.updates;
}

void save_codebook(nn::TensorArchive& ar, const Codebook& book, const std::string& prefix) {
  for (int l = 0; l < book.levels(); ++l) ar.put(prefix + ".l" + std::to_string(l), book.level(l));
}

Codebook load_codebook(const nn::TensorArchive& ar, const std::string& prefix) {
  int levels = 0;
  while (ar.contains(prefix + ".l" + std::to_string(levels))) ++levels;
  if (levels == 0) throw ParseError("checkpoint has no codebook under '" + prefix + "'");
  const Matrix& first = ar.get(prefix + ".l0");
  Codebook book(levels, static_cast<int>(first.rows()), first.cols());
  for (int l = 0; l < levels; ++l) book.level(l) = ar.get(prefix + ".l" + std::to_string(l));
  return book;
}

}  // namespace udc::drl
