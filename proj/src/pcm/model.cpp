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

#include "udc/pcm/model.hpp"

#include <random>

namespace udc::pcm {

EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "transformer") return EncoderKind::transformer;
  if (s == "attention_pool") return EncoderKind::attention_pool;
  if (s == "gru") return EncoderKind::gru;
  throw ConfigError("unknown PCM encoder '" + s + "'");
}

std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::transformer: return "transformer";
    case EncoderKind::attention_pool: return "attention_pool";
    case EncoderKind::gru: return "gru";
  }
  return "?";
}

Parameter& CollabEmbeddings::of(ehr::EntityClass c) {
  switch (c) {
    case ehr::EntityClass::diagnosis: return diagnosis;
    case ehr::EntityClass::procedure: return procedure;
    case ehr::EntityClass::medication: return medication;
  }
  return diagnosis;
}

const Parameter& CollabEmbeddings::of(ehr::EntityClass c) const {
  return const_cast<CollabEmbeddings*>(this)->of(c);
}

Matrix PredictorOutput::probabilities() const {
  return logits.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

namespace {

Matrix normal_table(nn::Index rows, nn::Index cols, double std, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std);
  Matrix m(rows, cols);
  for (nn::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

PcmModel::PcmModel(const PcmConfig& cfg, const ehr::Vocabs& vocabs, ehr::Task task, std::uint64_t seed)
    : cfg_(cfg), task_(task) {
  if (cfg.dim <= 0 || cfg.layers < 0 || cfg.heads <= 0 || cfg.dim % cfg.heads != 0)
    throw ConfigError("pcm: dim must be positive and divisible by heads");
  if (cfg.max_positions <= 0) throw ConfigError("pcm: max_positions must be positive");
  std::mt19937_64 rng(seed);
  const double s = cfg.embedding_init_std;
  emb_.diagnosis = Parameter("pcm.E_D", normal_table(vocabs.diagnosis.size, cfg.dim, s, rng));
  emb_.procedure = Parameter("pcm.E_P", normal_table(vocabs.procedure.size, cfg.dim, s, rng));
  emb_.medication = Parameter("pcm.E_M", normal_table(vocabs.medication.size, cfg.dim, s, rng));
  positions_ = Parameter("pcm.positions", normal_table(cfg.max_positions, cfg.dim, s, rng));

  const nn::Index d = cfg.dim;
  switch (cfg.encoder) {
    case EncoderKind::transformer:
      for (int l = 0; l < cfg.layers; ++l) {
        const std::string name = "pcm.block" + std::to_string(l);
        TransformerBlock b;
        b.ln_attn = nn::LayerNorm(name + ".ln_attn", d);
        b.attn = nn::MultiHeadAttention(name + ".attn", d, d, cfg.heads, rng);
        b.ln_ffn = nn::LayerNorm(name + ".ln_ffn", d);
        b.ffn = nn::Mlp(name + ".ffn", {d, d * cfg.ffn_multiplier, d}, cfg.activation, rng);
        blocks_.push_back(std::move(b));
      }
      break;
    case EncoderKind::attention_pool:
      pool_query_ = Parameter("pcm.pool_query", normal_table(1, d, 1.0, rng));
      break;
    case EncoderKind::gru:
      gru_.update_x = nn::Linear("pcm.gru.zx", d, d, rng);
      gru_.update_h = nn::Linear("pcm.gru.zh", d, d, rng);
      gru_.reset_x = nn::Linear("pcm.gru.rx", d, d, rng);
      gru_.reset_h = nn::Linear("pcm.gru.rh", d, d, rng);
      gru_.cand_x = nn::Linear("pcm.gru.cx", d, d, rng);
      gru_.cand_h = nn::Linear("pcm.gru.ch", d, d, rng);
      break;
  }
  ln_final_ = nn::LayerNorm("pcm.ln_final", d);
  output_size_ = vocabs.of(ehr::target_class(task)).size;
  const bool tied = cfg.tie_diagnosis_head && task == ehr::Task::diagnosis_prediction;
  head_ = nn::Linear("pcm.head", d, tied ? d : output_size_, rng);
  output_bias_ = Parameter("pcm.output_bias", Matrix::Zero(1, tied ? output_size_ : 0));
}

template <typename Self, typename F>
void PcmModel::for_each_parameter(Self& self, F&& f) {
  f(self.emb_.diagnosis);
  f(self.emb_.procedure);
  f(self.emb_.medication);
  f(self.positions_);
  for (auto& b : self.blocks_) {
    f(b.ln_attn.gain);
    f(b.ln_attn.bias);
    for (Parameter* p : b.attn.parameters()) f(*p);
    f(b.ln_ffn.gain);
    f(b.ln_ffn.bias);
    for (Parameter* p : b.ffn.parameters()) f(*p);
  }
  if (self.cfg_.encoder == EncoderKind::attention_pool) f(self.pool_query_);
  if (self.cfg_.encoder == EncoderKind::gru)
    for (nn::Linear* l : {&self.gru_.update_x, &self.gru_.update_h, &self.gru_.reset_x,
                          &self.gru_.reset_h, &self.gru_.cand_x, &self.gru_.cand_h}) {
      f(l->weight);
      f(l->bias);
    }
  f(self.ln_final_.gain);
  f(self.ln_final_.bias);
  f(self.head_.weight);
  f(self.head_.bias);
  if (self.output_bias_.value.size() > 0) f(self.output_bias_);
}

nn::ParameterList PcmModel::parameters() {
  nn::ParameterList out;
  for_each_parameter(*this, [&](Parameter& p) { out.push_back(&p); });
  return out;
}

nn::ParameterList PcmModel::parameters_except_diagnosis_table() {
  nn::ParameterList out;
  for_each_parameter(*this, [&](Parameter& p) {
    if (&p != &emb_.diagnosis) out.push_back(&p);
  });
  return out;
}

void PcmModel::save(nn::TensorArchive& ar) const {
  for_each_parameter(const_cast<PcmModel&>(*this), [&](Parameter& p) { ar.put(p); });
  if (disease_override_) ar.put("pcm.E_D_substituted", *disease_override_);
}

void PcmModel::load(const nn::TensorArchive& ar) {
  for_each_parameter(*this, [&](Parameter& p) { ar.restore(p); });
  if (ar.contains("pcm.E_D_substituted"))
    set_disease_override(ar.get("pcm.E_D_substituted"));
  else
    disease_override_.reset();
}

void PcmModel::set_disease_override(std::optional<Matrix> table) {
  if (table && (table->rows() != emb_.diagnosis.value.rows() || table->cols() != cfg_.dim))
    throw ContractError("substituted disease table has shape " + nn::shape_string(*table) +
                        ", expected " + nn::shape_string(emb_.diagnosis.value));
  if (table) nn::require_finite(*table, "substituted disease table");
  disease_override_ = std::move(table);
}

Var PcmModel::disease_table(Graph& g) {
  return disease_override_ ? g.constant(*disease_override_) : g.param(emb_.diagnosis);
}

Var PcmModel::embed(Graph& g, ehr::EntityClass cls, std::span<const int> ids) {
  Var table = cls == ehr::EntityClass::diagnosis ? disease_table(g) : g.param(emb_.of(cls));
  return nn::gather_rows(table, ids);
}

VisitEmbeddings PcmModel::embed_entities(const ehr::Visit& visit) const {
  auto rows = [](const Matrix& table, const std::vector<int>& ids) {
    Matrix out(static_cast<nn::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= table.rows())
        throw ContractError("entity id " + std::to_string(ids[i]) + " out of range");
      out.row(static_cast<nn::Index>(i)) = table.row(ids[i]);
    }
    return out;
  };
  const Matrix& d_table = disease_override_ ? *disease_override_ : emb_.diagnosis.value;
  return {rows(d_table, visit.diagnoses), rows(emb_.procedure.value, visit.procedures),
          rows(emb_.medication.value, visit.medications)};
}

Var PcmModel::visit_vector(Graph& g, const ehr::Visit& v) {
  std::optional<Var> acc;
  for (ehr::EntityClass c : {ehr::EntityClass::diagnosis, ehr::EntityClass::procedure,
                             ehr::EntityClass::medication}) {
    const auto& ids = v.of(c);
    if (ids.empty()) continue;
    Var pooled = nn::mean_over_rows(embed(g, c, ids));
    acc = acc ? nn::add(*acc, pooled) : pooled;
  }
  return acc ? *acc : g.constant(Matrix::Zero(1, cfg_.dim));
}

Var PcmModel::encode_sequence(Graph& g, const Var& visits) {
  const nn::Index t = visits.rows();
  switch (cfg_.encoder) {
    case EncoderKind::transformer: {
      Var x = nn::add(visits, nn::slice_rows(g.param(positions_), 0, t));
      for (TransformerBlock& b : blocks_) {
        Var h = b.ln_attn.forward(g, x);
        x = nn::add(x, b.attn.forward(g, h, h, h));
        x = nn::add(x, b.ffn.forward(g, b.ln_ffn.forward(g, x)));
      }
      return ln_final_.forward(g, nn::slice_rows(x, t - 1, 1));
    }
    case EncoderKind::attention_pool: {
      Var x = nn::add(visits, nn::slice_rows(g.param(positions_), 0, t));
      Var h = ln_final_.forward(g, x);
      return nn::attend(g.param(pool_query_), h, h, cfg_.heads);
    }
    case EncoderKind::gru: {
      Var h = g.constant(Matrix::Zero(1, cfg_.dim));
      for (nn::Index i = 0; i < t; ++i) {
        Var x = nn::slice_rows(visits, i, 1);
        Var z = nn::sigmoid(nn::add(gru_.update_x.forward(g, x), gru_.update_h.forward(g, h)));
        Var r = nn::sigmoid(nn::add(gru_.reset_x.forward(g, x), gru_.reset_h.forward(g, h)));
        Var cand = nn::tanh(nn::add(gru_.cand_x.forward(g, x), gru_.cand_h.forward(g, nn::mul(r, h))));
        h = nn::add(h, nn::mul(z, nn::sub(cand, h)));
      }
      return ln_final_.forward(g, h);
    }
  }
  throw ConfigError("unknown encoder");
}

Var PcmModel::forward(Graph& g, std::span<const ehr::Visit> history, const ehr::Visit* extra) {
  std::vector<const ehr::Visit*> seq;
  for (const ehr::Visit& v : history) seq.push_back(&v);
  if (extra != nullptr) seq.push_back(extra);
  if (seq.empty()) throw ContractError("forward_predict needs a nonempty history");
  const std::size_t keep = std::min<std::size_t>(seq.size(), static_cast<std::size_t>(cfg_.max_positions));
  std::vector<Var> rows;
  rows.reserve(keep);
  for (std::size_t i = seq.size() - keep; i < seq.size(); ++i) rows.push_back(visit_vector(g, *seq[i]));
  Var h = encode_sequence(g, nn::concat_rows(rows));
  if (output_bias_.value.size() > 0) {
    Var proj = head_.forward(g, h);
    return nn::add(nn::matmul(proj, nn::transpose(disease_table(g))), g.param(output_bias_));
  }
  return head_.forward(g, h);
}

PredictorOutput PcmModel::forward_predict(std::span<const ehr::Visit> history, const ehr::Visit* extra) {
  Graph g(false);
  return {forward(g, history, extra).value()};
}

Var PcmModel::forward_sample(Graph& g, const ehr::PatientRecord& rec, int target_visit) {
  if (target_visit < 0 || target_visit >= static_cast<int>(rec.visits.size()))
    throw ContractError("target visit out of range");
  std::span<const ehr::Visit> history(rec.visits.data(), static_cast<std::size_t>(target_visit));
  if (task_ == ehr::Task::medication_recommendation) {
    ehr::Visit extra;
    extra.diagnoses = rec.visits[target_visit].diagnoses;
    extra.procedures = rec.visits[target_visit].procedures;
    return forward(g, history, &extra);
  }
  return forward(g, history, nullptr);
}

PredictorOutput PcmModel::predict_sample(const ehr::PatientRecord& rec, int target_visit) {
  Graph g(false);
  return {forward_sample(g, rec, target_visit).value()};
}

Var bce_loss(const Var& logits, const Matrix& target) { return nn::bce_with_logits(logits, target); }

}  // namespace udc::pcm
