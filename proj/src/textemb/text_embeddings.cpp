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

#include "udc/textemb/text_embeddings.hpp"

#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "udc/numerics/archive.hpp"

namespace udc::textemb {

using nn::Matrix;

TextEmbeddings::TextEmbeddings(Matrix diagnosis, Matrix procedure, Matrix medication, Source source)
    : diagnosis_(std::move(diagnosis)),
      procedure_(std::move(procedure)),
      medication_(std::move(medication)),
      source_(source) {
  if (procedure_.cols() != diagnosis_.cols() || medication_.cols() != diagnosis_.cols())
    throw DimensionError("text embedding tables must share one dimension");
  nn::require_finite(diagnosis_, "text embeddings");
  nn::require_finite(procedure_, "text embeddings");
  nn::require_finite(medication_, "text embeddings");
}

const Matrix& TextEmbeddings::table(ehr::EntityClass c) const {
  switch (c) {
    case ehr::EntityClass::diagnosis: return diagnosis_;
    case ehr::EntityClass::procedure: return procedure_;
    case ehr::EntityClass::medication: return medication_;
  }
  return diagnosis_;
}

std::uint64_t TextEmbeddings::checksum() const {
  std::uint64_t h = nn::checksum(diagnosis_);
  h ^= nn::checksum(procedure_) * 31;
  h ^= nn::checksum(medication_) * 131;
  return h;
}

Matrix load_table(const std::filesystem::path& path, const ehr::EntityVocab& vocab) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open text embeddings " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw ParseError(path.string() + ": empty file");
  std::istringstream hs(header);
  std::string cls;
  long dim = 0, count = 0;
  if (!(hs >> cls >> dim >> count) || dim <= 0 || count < 0)
    throw ParseError(path.string() + ": header must be `class dim count`");
  if (ehr::parse_entity_class(cls) != vocab.cls)
    throw ParseError(path.string() + ": class '" + cls + "' does not match vocab class '" +
                     ehr::to_string(vocab.cls) + "'");
  Matrix table = Matrix::Zero(vocab.size, dim);
  std::vector<bool> seen(static_cast<std::size_t>(vocab.size), false);
  std::string text;
  long line = 1, rows = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(text);
    long id;
    if (!(ls >> id)) throw ParseError(path.string() + ":" + std::to_string(line) + ": missing id");
    if (!vocab.contains(static_cast<int>(id)))
      throw ParseError(path.string() + ":" + std::to_string(line) + ": unknown entity " + std::to_string(id));
    if (seen[id]) throw ParseError(path.string() + ":" + std::to_string(line) + ": duplicate entity " + std::to_string(id));
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (!ls.eof()) throw ParseError(path.string() + ":" + std::to_string(line) + ": non-numeric value");
    if (static_cast<long>(vals.size()) != dim)
      throw ParseError(path.string() + ":" + std::to_string(line) + ": entity " + std::to_string(id) +
                       " has " + std::to_string(vals.size()) + " values, header says " + std::to_string(dim));
    for (long k = 0; k < dim; ++k) table(id, k) = vals[static_cast<std::size_t>(k)];
    seen[id] = true;
    ++rows;
  }
  if (rows != count)
    throw ParseError(path.string() + ": header count " + std::to_string(count) + " but " +
                     std::to_string(rows) + " rows");
  for (int id = 0; id < vocab.size; ++id)
    if (!seen[id]) throw ParseError(path.string() + ": entity " + std::to_string(id) + " has no embedding");
  return table;
}

void save_table(const std::filesystem::path& path, ehr::EntityClass cls, const Matrix& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  out << ehr::to_string(cls) << ' ' << table.cols() << ' ' << table.rows() << '\n';
  out << std::setprecision(17);
  for (nn::Index r = 0; r < table.rows(); ++r) {
    out << r;
    for (nn::Index c = 0; c < table.cols(); ++c) out << ' ' << table(r, c);
    out << '\n';
  }
}

TextEmbeddings load_text_embeddings(const std::filesystem::path& dir, const ehr::Vocabs& vocabs) {
  return TextEmbeddings(load_table(dir / "text_diagnosis.emb", vocabs.diagnosis),
                        load_table(dir / "text_procedure.emb", vocabs.procedure),
                        load_table(dir / "text_medication.emb", vocabs.medication), Source::file);
}

void save_text_embeddings(const std::filesystem::path& dir, const TextEmbeddings& emb) {
  save_table(dir / "text_diagnosis.emb", ehr::EntityClass::diagnosis, emb.diagnosis());
  save_table(dir / "text_procedure.emb", ehr::EntityClass::procedure, emb.procedure());
  save_table(dir / "text_medication.emb", ehr::EntityClass::medication, emb.medication());
}

Matrix text_projection(int latent_dim, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(ehr::mix_seed(seed, 0x7e47));
  std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(latent_dim)));
  Matrix a(latent_dim, dim);
  for (nn::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  return a;
}

TextEmbeddings synthesize_text_embeddings(const ehr::SyntheticCorpus& corpus, double noise_level,
                                          std::uint64_t seed, int dim) {
  if (dim <= 0) throw ConfigError("text embedding dimension must be positive");
  if (noise_level < 0) throw ConfigError("text noise level must be non-negative");
  const int latent_dim = static_cast<int>(corpus.diagnosis_latents.cols());
  const Matrix a = text_projection(latent_dim, dim, seed);
  std::mt19937_64 rng(ehr::mix_seed(seed, 0x70153));
  std::normal_distribution<double> n(0.0, 1.0);
  auto make = [&](const Matrix& latents) {
    Matrix t = latents * a;
    if (noise_level > 0)
      for (nn::Index i = 0; i < t.size(); ++i) t.data()[i] += noise_level * n(rng);
    return t;
  };
  Matrix d = make(corpus.diagnosis_latents);
  Matrix p = make(corpus.procedure_latents);
  Matrix m = make(corpus.medication_latents);
  return TextEmbeddings(std::move(d), std::move(p), std::move(m), Source::synthetic);
}

}  // namespace udc::textemb
