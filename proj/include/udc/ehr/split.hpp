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

#include <array>
#include <cstdint>

#include "udc/ehr/types.hpp"

namespace udc::ehr {

enum class RarityMode {
  /// Top ceil(eta * |D|) diseases by occurrence count are common.
  top_fraction,
  /// A disease is common when it appears in at least eta of all patients.
  per_case,
};

RarityMode parse_rarity_mode(const std::string& s);
std::string to_string(RarityMode m);

struct RaritySplit {
  std::vector<int> common;
  std::vector<int> rare;
  double eta = 0.2;
  /// Occurrence count per disease id (number of visits containing it).
  std::vector<long> counts;
  std::vector<bool> is_common;

  bool rare_disease(int d) const { return !is_common.at(static_cast<std::size_t>(d)); }
};

/// Visit-level occurrence count per disease.
std::vector<long> disease_counts(const Dataset& data, int n_diseases);

/// Ranks diseases by count (descending, ties to the lower id) and marks the
/// top ceil(eta * |D|) as common.
RaritySplit split_rarity(const Dataset& data, int n_diseases, double eta,
                         RarityMode mode = RarityMode::top_fraction);

struct PatientSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Patient-level shuffle-and-cut. Sizes are rounded ratios with every
/// partition holding at least one patient.
PatientSplit split_patients(const Dataset& data, std::array<double, 3> ratios, std::uint64_t seed);

/// Target ids for predicting visit t (0-based) from visits [0, t).
/// Diag Pred needs t >= 1; Med Rec accepts t = 0 (the current visit's
/// diagnoses and procedures are inputs).
std::vector<int> extract_targets(const PatientRecord& record, int t, Task task);

/// One prediction instance: patient index and the 0-based target visit.
struct Sample {
  int patient = 0;
  int visit = 0;
};

/// All samples of a task with a nonempty target set.
std::vector<Sample> enumerate_samples(const Dataset& data, Task task);

struct ContextEntry {
  std::vector<int> procedures;
  std::vector<int> medications;
};

/// Same-visit procedures and medications for every visit containing
/// `disease`, in corpus order.
std::vector<ContextEntry> cooccurrence_context(const Dataset& data, int disease);

/// Location of one disease occurrence.
struct Occurrence {
  int patient = 0;
  int visit = 0;
};

/// Per-disease occurrence lists, built in one pass.
class OccurrenceIndex {
 public:
  OccurrenceIndex(const Dataset& data, int n_diseases);
  const std::vector<Occurrence>& of(int disease) const { return by_disease_.at(static_cast<std::size_t>(disease)); }
  int n_diseases() const { return static_cast<int>(by_disease_.size()); }

 private:
  std::vector<std::vector<Occurrence>> by_disease_;
};

}  // namespace udc::ehr
