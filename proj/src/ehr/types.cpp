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

#include "udc/ehr/types.hpp"

#include <algorithm>

namespace udc::ehr {

std::string to_string(EntityClass c) {
  switch (c) {
    case EntityClass::diagnosis: return "diagnosis";
    case EntityClass::procedure: return "procedure";
    case EntityClass::medication: return "medication";
  }
  return "?";
}

EntityClass parse_entity_class(const std::string& s) {
  if (s == "diagnosis") return EntityClass::diagnosis;
  if (s == "procedure") return EntityClass::procedure;
  if (s == "medication") return EntityClass::medication;
  throw ParseError("unknown entity class '" + s + "'");
}

const EntityVocab& Vocabs::of(EntityClass c) const {
  switch (c) {
    case EntityClass::diagnosis: return diagnosis;
    case EntityClass::procedure: return procedure;
    case EntityClass::medication: return medication;
  }
  return diagnosis;
}

const std::vector<int>& Visit::of(EntityClass c) const {
  switch (c) {
    case EntityClass::diagnosis: return diagnoses;
    case EntityClass::procedure: return procedures;
    case EntityClass::medication: return medications;
  }
  return diagnoses;
}

std::string to_string(Task t) {
  return t == Task::diagnosis_prediction ? "diag" : "med";
}

Task parse_task(const std::string& s) {
  if (s == "diag" || s == "diagnosis") return Task::diagnosis_prediction;
  if (s == "med" || s == "medication") return Task::medication_recommendation;
  throw ConfigError("unknown task '" + s + "' (expected diag or med)");
}

EntityClass target_class(Task t) {
  return t == Task::diagnosis_prediction ? EntityClass::diagnosis : EntityClass::medication;
}

void validate(const Dataset& data, const Vocabs& vocabs) {
  std::vector<std::string> problems;
  for (std::size_t k = 0; k < data.size() && problems.size() < 20; ++k) {
    const PatientRecord& rec = data[k];
    if (rec.visits.empty()) problems.push_back("patient '" + rec.patient_id + "' has no visits");
    for (std::size_t t = 0; t < rec.visits.size(); ++t) {
      for (EntityClass c : {EntityClass::diagnosis, EntityClass::procedure, EntityClass::medication}) {
        const auto& ids = rec.visits[t].of(c);
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (!vocabs.of(c).contains(ids[i]))
            problems.push_back("patient '" + rec.patient_id + "' visit " + std::to_string(t) +
                               ": unknown " + to_string(c) + " id " + std::to_string(ids[i]));
          if (i > 0 && ids[i] <= ids[i - 1])
            problems.push_back("patient '" + rec.patient_id + "' visit " + std::to_string(t) +
                               ": " + to_string(c) + " ids not strictly increasing");
        }
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid dataset:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ParseError(msg);
  }
}

std::vector<int> normalized_ids(std::vector<int> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

nn::RowVector multi_hot(const std::vector<int>& ids, int size) {
  nn::RowVector v = nn::RowVector::Zero(size);
  for (int id : ids) {
    if (id < 0 || id >= size)
      throw ContractError("id " + std::to_string(id) + " outside vocab of size " + std::to_string(size));
    v(id) = 1.0;
  }
  return v;
}

std::vector<int> ids_from_multi_hot(const nn::RowVector& v) {
  std::vector<int> ids;
  for (nn::Index i = 0; i < v.size(); ++i)
    if (v(i) != 0.0) ids.push_back(static_cast<int>(i));
  return ids;
}

}  // namespace udc::ehr
