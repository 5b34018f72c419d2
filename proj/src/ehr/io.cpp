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

#include "udc/ehr/io.hpp"

#include <fstream>

#include <json.hpp>

namespace udc::ehr {

using nlohmann::json;

namespace {

std::vector<int> read_ids(const json& visit, const char* key, EntityClass cls,
                          const Vocabs& vocabs, std::size_t line) {
  std::vector<int> ids;
  if (!visit.contains(key)) return ids;
  const json& arr = visit.at(key);
  if (!arr.is_array())
    throw ParseError("line " + std::to_string(line) + ": field '" + key + "' is not an array");
  for (const json& v : arr) {
    if (!v.is_number_integer())
      throw ParseError("line " + std::to_string(line) + ": non-integer id in '" + key + "'");
    const int id = v.get<int>();
    if (!vocabs.of(cls).contains(id))
      throw ParseError("line " + std::to_string(line) + ": unknown " + to_string(cls) + " id " +
                       std::to_string(id) + " (vocab size " + std::to_string(vocabs.of(cls).size) + ")");
    if (!ids.empty() && id <= ids.back())
      throw ParseError("line " + std::to_string(line) + ": " + to_string(cls) +
                       " ids must be strictly increasing (saw " + std::to_string(id) + " after " +
                       std::to_string(ids.back()) + ")");
    ids.push_back(id);
  }
  return ids;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, const Vocabs& vocabs) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset " + path.string());
  Dataset data;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("patient_id") || !j.contains("visits") ||
        !j["visits"].is_array())
      throw ParseError("line " + std::to_string(line) + ": expected {\"patient_id\", \"visits\"}");
    PatientRecord rec;
    rec.patient_id = j["patient_id"].is_string() ? j["patient_id"].get<std::string>()
                                                 : j["patient_id"].dump();
    for (const json& v : j["visits"]) {
      if (!v.is_object()) throw ParseError("line " + std::to_string(line) + ": visit is not an object");
      Visit visit;
      visit.diagnoses = read_ids(v, "d", EntityClass::diagnosis, vocabs, line);
      visit.procedures = read_ids(v, "p", EntityClass::procedure, vocabs, line);
      visit.medications = read_ids(v, "m", EntityClass::medication, vocabs, line);
      rec.visits.push_back(std::move(visit));
    }
    if (rec.visits.empty())
      throw ParseError("line " + std::to_string(line) + ": patient has no visits");
    data.push_back(std::move(rec));
  }
  return data;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  for (const PatientRecord& rec : data) {
    json visits = json::array();
    for (const Visit& v : rec.visits)
      visits.push_back({{"d", v.diagnoses}, {"p", v.procedures}, {"m", v.medications}});
    out << json{{"patient_id", rec.patient_id}, {"visits", visits}}.dump() << '\n';
  }
}

EntityVocab load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open vocab " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  EntityVocab v;
  try {
    v.cls = parse_entity_class(j.at("class").get<std::string>());
    v.size = j.at("size").get<int>();
    if (j.contains("text"))
      for (const auto& [k, s] : j["text"].items()) v.text[std::stoi(k)] = s.get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (v.size <= 0) throw ParseError(path.string() + ": vocab size must be positive");
  for (const auto& [id, s] : v.text)
    if (!v.contains(id)) throw ParseError(path.string() + ": text for unknown id " + std::to_string(id));
  return v;
}

void save_vocab(const std::filesystem::path& path, const EntityVocab& vocab) {
  json j{{"class", to_string(vocab.cls)}, {"size", vocab.size}};
  if (!vocab.text.empty()) {
    json t = json::object();
    for (const auto& [id, s] : vocab.text) t[std::to_string(id)] = s;
    j["text"] = t;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Vocabs load_vocabs(const std::filesystem::path& dir) {
  Vocabs v;
  v.diagnosis = load_vocab(dir / "vocab_diagnosis.json");
  v.procedure = load_vocab(dir / "vocab_procedure.json");
  v.medication = load_vocab(dir / "vocab_medication.json");
  if (v.diagnosis.cls != EntityClass::diagnosis || v.procedure.cls != EntityClass::procedure ||
      v.medication.cls != EntityClass::medication)
    throw ParseError("vocab sidecar class does not match its file name in " + dir.string());
  return v;
}

void save_vocabs(const std::filesystem::path& dir, const Vocabs& vocabs) {
  save_vocab(dir / "vocab_diagnosis.json", vocabs.diagnosis);
  save_vocab(dir / "vocab_procedure.json", vocabs.procedure);
  save_vocab(dir / "vocab_medication.json", vocabs.medication);
}

}  // namespace udc::ehr
