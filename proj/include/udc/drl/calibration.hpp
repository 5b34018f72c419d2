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

#include <random>

#include "udc/numerics/layers.hpp"

namespace udc::drl {

using nn::Graph;
using nn::Parameter;
using nn::ParameterList;
using nn::Var;

/// How a visit's procedure/medication set is summarized.
enum class ConditionEncoder { mha, mlp };

ConditionEncoder parse_condition_encoder(const std::string& s);
std::string to_string(ConditionEncoder e);

/// f_d from the procedures and medications of a visit, and the
/// FiLM-style modulation z = gamma(z_old) * standardize(f_d) + beta(z_old).
class ConditionCalibrator {
 public:
  ConditionCalibrator() = default;
  ConditionCalibrator(const std::string& name, nn::Index entity_width, nn::Index dim, int heads,
                      ConditionEncoder encoder, double eps, std::mt19937_64& rng);

  /// Rows of `procedures` / `medications` are entity vectors; either may have
  /// zero rows. An empty set contributes nothing; if both are empty the
  /// learned default vector is returned.
  Var condition(Graph& g, const nn::Matrix& procedures, const nn::Matrix& medications);

  Var calibrate(Graph& g, const Var& z_old, const Var& f);

  ParameterList parameters();

  nn::Linear& gamma() { return gamma_; }
  nn::Linear& beta() { return beta_; }
  Parameter& default_condition() { return default_; }
  nn::MultiHeadAttention& procedure_attention() { return attn_p_; }
  nn::MultiHeadAttention& medication_attention() { return attn_m_; }
  ConditionEncoder encoder() const { return encoder_; }
  nn::Index entity_width() const { return entity_width_; }
  nn::Index dim() const { return default_.value.cols(); }
  double eps() const { return eps_; }

  /// Number of calibrate() invocations since construction.
  long calls() const { return calls_; }

 private:
  Var summarize(Graph& g, const nn::Matrix& set, bool procedures);

  ConditionEncoder encoder_ = ConditionEncoder::mha;
  nn::Index entity_width_ = 0;
  double eps_ = 1e-5;
  nn::MultiHeadAttention attn_p_, attn_m_;
  nn::Mlp mlp_p_, mlp_m_;
  nn::Linear gamma_, beta_;
  Parameter default_;
  long calls_ = 0;
};

}  // namespace udc::drl
