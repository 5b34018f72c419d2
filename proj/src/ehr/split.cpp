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

#include "udc/ehr/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace udc::ehr {

RarityMode parse_rarity_mode(const std::string& s) {
  if (s == "top_fraction") return RarityMode::top_fraction;
  if (s == "per_case") return RarityMode::per_case;
  throw ConfigError("unknown rarity mode '" + s + "'");
}

std::string to_string(RarityMode m) {
  return m == RarityMode::top_fraction ? "top_fraction" : "per_case";
}

std::vector<long> disease_counts(const Dataset& data, int n_diseases) {
  std::vector<long> counts(static_cast<std::size_t>(n_diseases), 0);
  for (const PatientRecord& rec : data)
    for (const Visit& v : rec.visits)
      for (int d : v.diagnoses) {
        if (d < 0 || d >= n_diseases) throw ContractError("disease id " + std::to_string(d) + " out of range");
        ++counts[static_cast<std::size_t>(d)];
      }
  return counts;
}

RaritySplit split_rarity(const Dataset& data, int n_diseases, double eta, RarityMode mode) {
  if (!(eta > 0.0 && eta < 1.0)) throw ContractError("rarity threshold eta must be in (0, 1)");
  if (n_diseases <= 0) throw ContractError("no diseases to split");
  RaritySplit split;
  split.eta = eta;
  split.counts = disease_counts(data, n_diseases);
  if (std::accumulate(split.counts.begin(), split.counts.end(), 0L) == 0)
    throw ContractError("dataset has no diagnosis occurrences");
  split.is_common.assign(static_cast<std::size_t>(n_diseases), false);

  std::vector<int> order(static_cast<std::size_t>(n_diseases));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return split.counts[a] > split.counts[b]; });

  if (mode == RarityMode::top_fraction) {
    const auto n_common = static_cast<std::size_t>(std::ceil(eta * n_diseases - 1e-9));
    for (std::size_t i = 0; i < n_common && i < order.size(); ++i) split.is_common[order[i]] = true;
  } else {
    std::vector<long> patients_with(static_cast<std::size_t>(n_diseases), 0);
    for (const PatientRecord& rec : data) {
      std::vector<bool> seen(static_cast<std::size_t>(n_diseases), false);
      for (const Visit& v : rec.visits)
        for (int d : v.diagnoses) seen[d] = true;
      for (int d = 0; d < n_diseases; ++d) patients_with[d] += seen[d];
    }
    const double n = static_cast<double>(data.size());
    for (int d = 0; d < n_diseases; ++d) split.is_common[d] = patients_with[d] >= eta * n;
  }
  for (int d : order) (split.is_common[d] ? split.common : split.rare).push_back(d);
  std::sort(split.common.begin(), split.common.end());
  std::sort(split.rare.begin(), split.rare.end());
  return split;
}

PatientSplit split_patients(const Dataset& data, std::array<double, 3> ratios, std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0)
    throw ContractError("split ratios must be non-negative and sum to 1");
  if (data.size() < 3) throw ContractError("need at least 3 patients to split into train/val/test");
  const long n = static_cast<long>(data.size());
  long n_train = std::max(1L, std::lround(ratios[0] * n));
  long n_val = std::max(1L, std::lround(ratios[1] * n));
  while (n_train + n_val > n - 1) (n_train > n_val ? n_train : n_val) -= 1;

  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  PatientSplit out;
  for (long i = 0; i < n; ++i) {
    const PatientRecord& rec = data[perm[static_cast<std::size_t>(i)]];
    if (i < n_train)
      out.train.push_back(rec);
    else if (i < n_train + n_val)
      out.val.push_back(rec);
    else
      out.test.push_back(rec);
  }
  return out;
}

std::vector<int> extract_targets(const PatientRecord& record, int t, Task task) {
  const int n = static_cast<int>(record.visits.size());
  const int first = task == Task::diagnosis_prediction ? 1 : 0;
  if (t < first || t >= n)
    throw ContractError("target visit " + std::to_string(t) + " out of range for patient '" +
                        record.patient_id + "' with " + std::to_string(n) + " visits");
  return task == Task::diagnosis_prediction ? record.visits[t].diagnoses : record.visits[t].medications;
}

std::vector<Sample> enumerate_samples(const Dataset& data, Task task) {
  std::vector<Sample> out;
  const int first = task == Task::diagnosis_prediction ? 1 : 0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& visits = data[k].visits;
    for (int t = first; t < static_cast<int>(visits.size()); ++t)
      if (!extract_targets(data[k], t, task).empty()) out.push_back({static_cast<int>(k), t});
  }
  return out;
}

std::vector<ContextEntry> cooccurrence_context(const Dataset& data, int disease) {
  std::vector<ContextEntry> out;
  for (const PatientRecord& rec : data)
    for (const Visit& v : rec.visits)
      if (std::binary_search(v.diagnoses.begin(), v.diagnoses.end(), disease))
        out.push_back({v.procedures, v.medications});
  return out;
}

OccurrenceIndex::OccurrenceIndex(const Dataset& data, int n_diseases)
    : by_disease_(static_cast<std::size_t>(n_diseases)) {
  for (std::size_t k = 0; k < data.size(); ++k)
    for (std::size_t t = 0; t < data[k].visits.size(); ++t)
      for (int d : data[k].visits[t].diagnoses)
        by_disease_.at(static_cast<std::size_t>(d)).push_back({static_cast<int>(k), static_cast<int>(t)});
}

}  // namespace udc::ehr
