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
#include <filesystem>

#include "udc/ehr/synthetic.hpp"
#include "udc/ehr/types.hpp"

namespace udc::textemb {

enum class Source { file, synthetic };

/// Frozen per-entity text vectors, one table per entity class. The tables
/// are plain matrices: nothing in the library binds them to a graph
/// parameter, so they cannot receive gradients.
class TextEmbeddings {
 public:
  TextEmbeddings() = default;
  TextEmbeddings(nn::Matrix diagnosis, nn::Matrix procedure, nn::Matrix medication, Source source);

  const nn::Matrix& table(ehr::EntityClass c) const;
  const nn::Matrix& diagnosis() const { return diagnosis_; }
  const nn::Matrix& procedure() const { return procedure_; }
  const nn::Matrix& medication() const { return medication_; }
  nn::Index dim() const { return diagnosis_.cols(); }
  Source source() const { return source_; }
  std::uint64_t checksum() const;

 private:
  nn::Matrix diagnosis_, procedure_, medication_;
  Source source_ = Source::synthetic;
};

/// Reads one table. Format: header `class dim count`, then `id v1 .. vdim`
/// rows. Every id of `vocab` must be present exactly once.
nn::Matrix load_table(const std::filesystem::path& path, const ehr::EntityVocab& vocab);
void save_table(const std::filesystem::path& path, ehr::EntityClass cls, const nn::Matrix& table);

/// text_<class>.emb for each class inside `dir`.
TextEmbeddings load_text_embeddings(const std::filesystem::path& dir, const ehr::Vocabs& vocabs);
void save_text_embeddings(const std::filesystem::path& dir, const TextEmbeddings& emb);

/// Fixed random linear map of the generator latents (one map shared by all
/// classes) plus Gaussian noise of standard deviation `noise_level`.
TextEmbeddings synthesize_text_embeddings(const ehr::SyntheticCorpus& corpus, double noise_level,
                                          std::uint64_t seed, int dim);

/// The linear map used by synthesize_text_embeddings, exposed for tests.
nn::Matrix text_projection(int latent_dim, int dim, std::uint64_t seed);

}  // namespace udc::textemb
