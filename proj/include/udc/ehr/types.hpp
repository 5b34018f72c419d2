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

#include <map>
#include <string>
#include <vector>

#include "udc/numerics/tensor.hpp"

namespace udc::ehr {

enum class EntityClass { diagnosis, procedure, medication };

std::string to_string(EntityClass c);
EntityClass parse_entity_class(const std::string& s);

/// Dense id space 0..size-1 for one entity class, with optional display text.
struct EntityVocab {
  EntityClass cls = EntityClass::diagnosis;
  int size = 0;
  std::map<int, std::string> text;

  bool contains(int id) const { return id >= 0 && id < size; }
};

struct Vocabs {
  EntityVocab diagnosis{EntityClass::diagnosis, 0, {}};
  EntityVocab procedure{EntityClass::procedure, 0, {}};
  EntityVocab medication{EntityClass::medication, 0, {}};

  const EntityVocab& of(EntityClass c) const;
};

/// One encounter. Each id list is sorted ascending without duplicates.
struct Visit {
  std::vector<int> diagnoses;
  std::vector<int> procedures;
  std::vector<int> medications;

  const std::vector<int>& of(EntityClass c) const;
  bool operator==(const Visit&) const = default;
};

struct PatientRecord {
  std::string patient_id;
  std::vector<Visit> visits;

  bool operator==(const PatientRecord&) const = default;
};

using Dataset = std::vector<PatientRecord>;

enum class Task { diagnosis_prediction, medication_recommendation };

std::string to_string(Task t);
Task parse_task(const std::string& s);

/// Class of entities a task predicts (diagnoses for Diag Pred, medications
/// for Med Rec).
EntityClass target_class(Task t);

/// Checks every id against its vocab and the sorted/unique rule. Throws
/// ParseError listing the offenders.
void validate(const Dataset& data, const Vocabs& vocabs);

/// Sorts and deduplicates an id list.
std::vector<int> normalized_ids(std::vector<int> ids);

nn::RowVector multi_hot(const std::vector<int>& ids, int size);
std::vector<int> ids_from_multi_hot(const nn::RowVector& v);

}  // namespace udc::ehr
