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
#include <optional>
#include <span>

#include "udc/ehr/types.hpp"
#include "udc/numerics/archive.hpp"
#include "udc/numerics/layers.hpp"

namespace udc::pcm {

using nn::Graph;
using nn::Matrix;
using nn::Parameter;
using nn::Var;

enum class EncoderKind { transformer, attention_pool, gru };

EncoderKind parse_encoder_kind(const std::string& s);
std::string to_string(EncoderKind k);

struct PcmConfig {
  int dim = 128;
  EncoderKind encoder = EncoderKind::transformer;
  int layers = 2;
  int heads = 4;
  int ffn_multiplier = 2;
  int max_positions = 16;
  nn::Activation activation = nn::Activation::gelu;
  /// Diag Pred scores diseases against the disease table (h W E_D^T + b),
  /// so substituted disease vectors act on both sides of the predictor.
  bool tie_diagnosis_head = true;
  double embedding_init_std = 0.1;
};

/// E_D, E_P, E_M: one (vocab x dim) table per entity class.
struct CollabEmbeddings {
  Parameter diagnosis;
  Parameter procedure;
  Parameter medication;

  Parameter& of(ehr::EntityClass c);
  const Parameter& of(ehr::EntityClass c) const;
};

struct PredictorOutput {
  Matrix logits;  // 1 x target vocab

  Matrix probabilities() const;
};

/// Rows of each entity table used by one visit.
struct VisitEmbeddings {
  Matrix diagnoses;
  Matrix procedures;
  Matrix medications;
};

/// Collaborative sequence predictor F_co with its entity tables.
///
/// A visit vector is the mean of its diagnosis rows plus the mean of its
/// procedure rows plus the mean of its medication rows (empty classes
/// contribute nothing). Visit vectors plus positional embeddings go through
/// the temporal encoder; the final position feeds the task head.
class PcmModel {
 public:
  PcmModel(const PcmConfig& cfg, const ehr::Vocabs& vocabs, ehr::Task task, std::uint64_t seed);

  /// Logits for predicting the visit after `history`. For Med Rec `extra`
  /// carries the target visit's diagnoses and procedures and is appended as
  /// one pseudo-visit.
  Var forward(Graph& g, std::span<const ehr::Visit> history, const ehr::Visit* extra);
  PredictorOutput forward_predict(std::span<const ehr::Visit> history, const ehr::Visit* extra);

  /// Logits for a sample (patient record, 0-based target visit index).
  Var forward_sample(Graph& g, const ehr::PatientRecord& rec, int target_visit);
  PredictorOutput predict_sample(const ehr::PatientRecord& rec, int target_visit);

  VisitEmbeddings embed_entities(const ehr::Visit& visit) const;
  Var embed(Graph& g, ehr::EntityClass cls, std::span<const int> ids);

  /// Replaces disease vectors with a fixed table (substituted embeddings).
  /// The table never receives gradients.
  void set_disease_override(std::optional<Matrix> table);
  const std::optional<Matrix>& disease_override() const { return disease_override_; }

  CollabEmbeddings& embeddings() { return emb_; }
  const CollabEmbeddings& embeddings() const { return emb_; }
  Parameter& positions() { return positions_; }

  /// All trainable state (tables, positions, encoder, head).
  nn::ParameterList parameters();
  /// Everything except E_D.
  nn::ParameterList parameters_except_diagnosis_table();

  void save(nn::TensorArchive& ar) const;
  void load(const nn::TensorArchive& ar);

  const PcmConfig& config() const { return cfg_; }
  ehr::Task task() const { return task_; }
  int output_size() const { return output_size_; }

 private:
  struct TransformerBlock {
    nn::LayerNorm ln_attn;
    nn::MultiHeadAttention attn;
    nn::LayerNorm ln_ffn;
    nn::Mlp ffn;
  };
  struct GruCell {
    nn::Linear update_x, update_h, reset_x, reset_h, cand_x, cand_h;
  };

  Var encode_sequence(Graph& g, const Var& visits);
  Var visit_vector(Graph& g, const ehr::Visit& v);
  Var disease_table(Graph& g);
  template <typename Self, typename F>
  static void for_each_parameter(Self& self, F&& f);

  PcmConfig cfg_;
  ehr::Task task_;
  int output_size_ = 0;
  CollabEmbeddings emb_;
  Parameter positions_;
  std::vector<TransformerBlock> blocks_;
  nn::Parameter pool_query_;
  GruCell gru_;
  nn::LayerNorm ln_final_;
  nn::Linear head_;
  Parameter output_bias_;
  std::optional<Matrix> disease_override_;
};

/// Mean logistic cross-entropy of logits against a multi-hot target.
Var bce_loss(const Var& logits, const Matrix& target);

}  // namespace udc::pcm
