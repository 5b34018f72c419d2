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

#include "udc/ehr/types.hpp"

namespace udc::ehr {

/// Controls the synthetic EHR corpus.
///
/// Entities live in a shared latent space organised around `n_clusters`
/// centres. Disease popularity is Zipf in the disease id (id 0 most common).
/// Each patient drifts through latent space: a visit's diseases are drawn
/// by popularity times affinity to the current state, procedures and
/// medications by affinity to the visit's diseases, and the next state is
/// the mean latent of the current diseases.
struct SyntheticConfig {
  int n_patients = 10000;
  int n_diagnoses = 200;
  int n_procedures = 100;
  int n_medications = 100;
  int latent_dim = 8;
  int n_clusters = 10;
  double zipf_exponent = 1.2;
  /// Exponent of the (milder) popularity law for procedures and medications.
  double side_zipf_exponent = 0.5;
  double mean_visits = 2.5;
  int min_visits = 1;
  int max_visits = 12;
  double diagnoses_per_visit = 2.5;
  double procedures_per_visit = 2.0;
  double medications_per_visit = 8.0;
  /// Spread of entity latents around their cluster centre.
  double cluster_spread = 0.35;
  /// Softmax temperature of the latent affinity (lower = tighter).
  double affinity_temperature = 0.1;
  /// Probability that a patient jumps to a fresh cluster between visits.
  double cluster_switch = 0.1;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticCorpus {
  Vocabs vocabs;
  Dataset patients;
  nn::Matrix diagnosis_latents;
  nn::Matrix procedure_latents;
  nn::Matrix medication_latents;

  const nn::Matrix& latents(EntityClass c) const;
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg);

/// splitmix64 step, used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace udc::ehr
