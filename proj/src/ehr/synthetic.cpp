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

#include "udc/ehr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace udc::ehr {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void SyntheticConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw ConfigError(std::string("synthetic: ") + name + " must be positive");
  };
  positive(n_patients, "n_patients");
  positive(n_diagnoses, "n_diagnoses");
  positive(n_procedures, "n_procedures");
  positive(n_medications, "n_medications");
  positive(latent_dim, "latent_dim");
  positive(n_clusters, "n_clusters");
  positive(zipf_exponent, "zipf_exponent");
  positive(affinity_temperature, "affinity_temperature");
  positive(mean_visits, "mean_visits");
  positive(diagnoses_per_visit, "diagnoses_per_visit");
  if (side_zipf_exponent < 0) throw ConfigError("synthetic: side_zipf_exponent must be >= 0");
  if (procedures_per_visit < 0 || medications_per_visit <= 0)
    throw ConfigError("synthetic: entities per visit must be positive");
  if (min_visits < 1 || max_visits < min_visits)
    throw ConfigError("synthetic: need 1 <= min_visits <= max_visits");
  if (mean_visits < min_visits) throw ConfigError("synthetic: mean_visits below min_visits");
  if (diagnoses_per_visit > n_diagnoses || procedures_per_visit > n_procedures ||
      medications_per_visit > n_medications)
    throw ConfigError("synthetic: entities per visit exceed the vocabulary size");
  if (cluster_switch < 0 || cluster_switch > 1)
    throw ConfigError("synthetic: cluster_switch must be in [0, 1]");
}

const nn::Matrix& SyntheticCorpus::latents(EntityClass c) const {
  switch (c) {
    case EntityClass::diagnosis: return diagnosis_latents;
    case EntityClass::procedure: return procedure_latents;
    case EntityClass::medication: return medication_latents;
  }
  return diagnosis_latents;
}

namespace {

using nn::Matrix;
using nn::RowVector;

RowVector unit_gaussian(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  RowVector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = n(rng);
  return v.normalized();
}

Matrix entity_latents(int count, const Matrix& centres, const std::vector<int>& cluster,
                      double spread, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix out(count, centres.cols());
  for (int i = 0; i < count; ++i) {
    RowVector v = centres.row(cluster[i]);
    for (int k = 0; k < v.size(); ++k) v(k) += spread * n(rng);
    out.row(i) = v.normalized();
  }
  return out;
}

std::vector<double> zipf_weights(int count, double exponent) {
  std::vector<double> w(count);
  for (int i = 0; i < count; ++i) w[i] = std::pow(static_cast<double>(i + 1), -exponent);
  return w;
}

/// Draws `k` distinct ids with probability proportional to weight, without
/// replacement. Returned sorted.
/// When `expected` is given, the probability vector of every draw is added
/// to it, which sums to the expected inclusion count given the draws so far.
std::vector<int> draw_distinct(std::vector<double> weights, int k, std::mt19937_64& rng,
                               std::vector<double>* expected = nullptr) {
  std::vector<int> out;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  k = std::min<int>(k, static_cast<int>(weights.size()));
  for (int n = 0; n < k; ++n) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) break;
    if (expected)
      for (std::size_t i = 0; i < weights.size(); ++i) (*expected)[i] += weights[i] / total;
    double r = u(rng) * total;
    int pick = static_cast<int>(weights.size()) - 1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      r -= weights[i];
      if (r < 0.0) {
        pick = static_cast<int>(i);
        break;
      }
    }
    while (weights[pick] == 0.0 && pick > 0) --pick;
    out.push_back(pick);
    weights[pick] = 0.0;
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> affinity_weights(const Matrix& latents, const std::vector<double>& popularity,
                                     const RowVector& state, double temperature) {
  const RowVector s = state.norm() > 0 ? RowVector(state.normalized()) : state;
  std::vector<double> w(popularity.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = popularity[i] * std::exp((latents.row(static_cast<nn::Index>(i)).dot(s) - 1.0) / temperature);
  return w;
}

int count_draw(double mean, int minimum, int cap, std::mt19937_64& rng) {
  const double extra = mean - minimum;
  int n = minimum;
  if (extra > 0) n += std::poisson_distribution<int>(extra)(rng);
  return std::min(n, cap);
}

struct Weights {
  std::vector<double> diagnosis, procedure, medication;
};

/// Expected per-class inclusion counts accumulated by pilot cohorts.
using Counts = Weights;
PatientRecord generate_patient(const SyntheticConfig& cfg, const SyntheticCorpus& corpus, const Matrix& centres,
                               const std::vector<double>& cluster_mass, const Weights& w, std::uint64_t seed,
                               Counts* expected) {
  std::mt19937_64 prng(seed);
  std::discrete_distribution<int> cluster_of(cluster_mass.begin(), cluster_mass.end());
  std::uniform_real_distribution<double> u(0.0, 1.0);

  int n_visits = cfg.min_visits;
  const double extra_visits = cfg.mean_visits - cfg.min_visits;
  if (extra_visits > 0) n_visits += std::geometric_distribution<int>(1.0 / (extra_visits + 1.0))(prng);
  n_visits = std::min(n_visits, cfg.max_visits);

  const double temp = cfg.affinity_temperature;
  PatientRecord rec;
  RowVector state = centres.row(cluster_of(prng));
  for (int t = 0; t < n_visits; ++t) {
    Visit v;
    const int nd = count_draw(cfg.diagnoses_per_visit, 1, cfg.n_diagnoses, prng);
    v.diagnoses = draw_distinct(affinity_weights(corpus.diagnosis_latents, w.diagnosis, state, temp), nd, prng,
                                expected ? &expected->diagnosis : nullptr);
    RowVector visit_state = RowVector::Zero(cfg.latent_dim);
    for (int d : v.diagnoses) visit_state += corpus.diagnosis_latents.row(d);
    visit_state /= static_cast<double>(v.diagnoses.size());

    const int np = count_draw(cfg.procedures_per_visit, 0, cfg.n_procedures, prng);
    v.procedures = draw_distinct(affinity_weights(corpus.procedure_latents, w.procedure, visit_state, temp), np,
                                 prng, expected ? &expected->procedure : nullptr);
    const int nm = count_draw(cfg.medications_per_visit, 1, cfg.n_medications, prng);
    v.medications =
        draw_distinct(affinity_weights(corpus.medication_latents, w.medication, visit_state, temp), nm, prng,
                      expected ? &expected->medication : nullptr);
    rec.visits.push_back(std::move(v));

    state = u(prng) < cfg.cluster_switch ? RowVector(centres.row(cluster_of(prng))) : visit_state;
  }
  return rec;
}

/// One multiplicative step pulling expected counts toward `target`
/// (both taken up to scale). Entities the pilot never weighed keep theirs.
void rescale(std::vector<double>& w, const std::vector<double>& expected, const std::vector<double>& target) {
  double te = 0.0, tt = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    te += expected[i];
    tt += target[i];
  }
  for (std::size_t i = 0; i < w.size(); ++i)
    if (expected[i] > 0.0) w[i] *= (target[i] / tt) / (expected[i] / te);
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(mix_seed(cfg.seed, 0));

  Matrix centres(cfg.n_clusters, cfg.latent_dim);
  for (int c = 0; c < cfg.n_clusters; ++c) centres.row(c) = unit_gaussian(cfg.latent_dim, rng);

  std::vector<int> d_cluster(cfg.n_diagnoses), p_cluster(cfg.n_procedures), m_cluster(cfg.n_medications);
  for (int i = 0; i < cfg.n_diagnoses; ++i) d_cluster[i] = i % cfg.n_clusters;
  std::uniform_int_distribution<int> pick_cluster(0, cfg.n_clusters - 1);
  for (int& c : p_cluster) c = pick_cluster(rng);
  for (int& c : m_cluster) c = pick_cluster(rng);

  SyntheticCorpus out;
  out.diagnosis_latents = entity_latents(cfg.n_diagnoses, centres, d_cluster, cfg.cluster_spread, rng);
  out.procedure_latents = entity_latents(cfg.n_procedures, centres, p_cluster, cfg.cluster_spread, rng);
  out.medication_latents = entity_latents(cfg.n_medications, centres, m_cluster, cfg.cluster_spread, rng);
  out.vocabs.diagnosis = {EntityClass::diagnosis, cfg.n_diagnoses, {}};
  out.vocabs.procedure = {EntityClass::procedure, cfg.n_procedures, {}};
  out.vocabs.medication = {EntityClass::medication, cfg.n_medications, {}};

  const Weights zipf{zipf_weights(cfg.n_diagnoses, cfg.zipf_exponent),
                     zipf_weights(cfg.n_procedures, cfg.side_zipf_exponent),
                     zipf_weights(cfg.n_medications, cfg.side_zipf_exponent)};
  std::vector<double> cluster_mass(cfg.n_clusters, 0.0);
  for (int i = 0; i < cfg.n_diagnoses; ++i) cluster_mass[d_cluster[i]] += zipf.diagnosis[i];

  // Affinity and distinct draws distort the popularity laws. Pilot cohorts
  // measure expected inclusion counts and the weights are rescaled until the
  // marginal frequencies follow the laws again.
  Weights w = zipf;
  const std::uint64_t pilot_seed = mix_seed(cfg.seed, 0x9110ULL);
  constexpr int kPilotRounds = 8, kPilotPatients = 1000;
  for (int round = 0; round < kPilotRounds; ++round) {
    Counts expected{std::vector<double>(zipf.diagnosis.size(), 0.0), std::vector<double>(zipf.procedure.size(), 0.0),
                    std::vector<double>(zipf.medication.size(), 0.0)};
    for (int k = 0; k < kPilotPatients; ++k)
      generate_patient(cfg, out, centres, cluster_mass, w,
                       mix_seed(pilot_seed, static_cast<std::uint64_t>(round * kPilotPatients + k)), &expected);
    rescale(w.diagnosis, expected.diagnosis, zipf.diagnosis);
    rescale(w.procedure, expected.procedure, zipf.procedure);
    rescale(w.medication, expected.medication, zipf.medication);
  }

  out.patients.reserve(cfg.n_patients);
  for (int k = 0; k < cfg.n_patients; ++k) {
    PatientRecord rec = generate_patient(cfg, out, centres, cluster_mass, w,
                                         mix_seed(cfg.seed, static_cast<std::uint64_t>(k) + 1), nullptr);
    rec.patient_id = "p" + std::to_string(k);
    out.patients.push_back(std::move(rec));
  }
  return out;
}

}  // namespace udc::ehr
