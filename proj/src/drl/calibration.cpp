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

#include "udc/drl/calibration.hpp"

namespace udc::drl {

ConditionEncoder parse_condition_encoder(const std::string& s) {
  if (s == "mha") return ConditionEncoder::mha;
  if (s == "mlp") return ConditionEncoder::mlp;
  throw ConfigError("unknown condition encoder '" + s + "' (expected mha|mlp)");
}

std::string to_string(ConditionEncoder e) { return e == ConditionEncoder::mha ? "mha" : "mlp"; }

ConditionCalibrator::ConditionCalibrator(const std::string& name, nn::Index entity_width,
                                         nn::Index dim, int heads, ConditionEncoder encoder,
                                         double eps, std::mt19937_64& rng)
    : encoder_(encoder), entity_width_(entity_width), eps_(eps) {
  if (eps <= 0.0) throw ConfigError("calibration epsilon must be positive");
  if (encoder == ConditionEncoder::mha) {
    attn_p_ = nn::MultiHeadAttention(name + ".mha_p", entity_width, dim, heads, rng);
    attn_m_ = nn::MultiHeadAttention(name + ".mha_m", entity_width, dim, heads, rng);
  } else {
    mlp_p_ = nn::Mlp(name + ".mlp_p", {entity_width, dim, dim}, nn::Activation::gelu, rng);
    mlp_m_ = nn::Mlp(name + ".mlp_m", {entity_width, dim, dim}, nn::Activation::gelu, rng);
  }
  // Start close to the identity map on z_old with a small modulation.
  gamma_ = nn::Linear(name + ".gamma", dim, dim, rng);
  gamma_.weight.value *= 0.1;
  beta_ = nn::Linear(name + ".beta", dim, dim, rng);
  beta_.weight.value = nn::Matrix::Identity(dim, dim);
  std::normal_distribution<double> nd(0.0, 0.1);
  nn::Matrix d(1, dim);
  for (nn::Index j = 0; j < dim; ++j) d(0, j) = nd(rng);
  default_ = Parameter(name + ".default", d);
}

Var ConditionCalibrator::summarize(Graph& g, const nn::Matrix& set, bool procedures) {
  const Var x = g.constant(set);
  if (encoder_ == ConditionEncoder::mha) {
    auto& attn = procedures ? attn_p_ : attn_m_;
    return nn::mean_over_rows(attn.forward(g, x, x, x));
  }
  return nn::mean_over_rows((procedures ? mlp_p_ : mlp_m_).forward(g, x));
}

Var ConditionCalibrator::condition(Graph& g, const nn::Matrix& procedures,
                                   const nn::Matrix& medications) {
  for (const nn::Matrix* m : {&procedures, &medications})
    if (m->rows() > 0 && m->cols() != entity_width_)
      throw ContractError("condition entity width " + std::to_string(m->cols()) + ", expected " +
                          std::to_string(entity_width_));
  const bool has_p = procedures.rows() > 0;
  const bool has_m = medications.rows() > 0;
  if (!has_p && !has_m) return g.param(default_);
  if (has_p && has_m) return summarize(g, procedures, true) + summarize(g, medications, false);
  return has_p ? summarize(g, procedures, true) : summarize(g, medications, false);
}

Var ConditionCalibrator::calibrate(Graph& g, const Var& z_old, const Var& f) {
  if (z_old.cols() != dim() || f.cols() != dim())
    throw ContractError("calibration width mismatch: z " + nn::shape_string(z_old.rows(), z_old.cols()) +
                        ", f " + nn::shape_string(f.rows(), f.cols()));
  ++calls_;
  const Var normalized = nn::standardize_rows(f, eps_);
  return nn::mul(gamma_.forward(g, z_old), normalized) + beta_.forward(g, z_old);
}

ParameterList ConditionCalibrator::parameters() {
  ParameterList out;
  auto append = [&out](ParameterList ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  if (encoder_ == ConditionEncoder::mha) {
    append(attn_p_.parameters());
    append(attn_m_.parameters());
  } else {
    append(mlp_p_.parameters());
    append(mlp_m_.parameters());
  }
  for (nn::Linear* l : {&gamma_, &beta_}) {
    out.push_back(&l->weight);
    out.push_back(&l->bias);
  }
  out.push_back(&default_);
  return out;
}

}  // namespace udc::drl
