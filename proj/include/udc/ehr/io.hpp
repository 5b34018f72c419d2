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

#include <filesystem>

#include "udc/ehr/types.hpp"

namespace udc::ehr {

/// Reads one patient per line:
///   {"patient_id": str, "visits": [{"d": [int], "p": [int], "m": [int]}]}
/// Blank lines are skipped. Malformed lines and unknown ids raise ParseError
/// naming the line number and the offending id.
Dataset load_dataset(const std::filesystem::path& path, const Vocabs& vocabs);
void save_dataset(const std::filesystem::path& path, const Dataset& data);

/// Sidecar: {"class": str, "size": int, "text": {id: str}?}
EntityVocab load_vocab(const std::filesystem::path& path);
void save_vocab(const std::filesystem::path& path, const EntityVocab& vocab);

/// vocab_<class>.json for each class inside `dir`.
Vocabs load_vocabs(const std::filesystem::path& dir);
void save_vocabs(const std::filesystem::path& dir, const Vocabs& vocabs);

}  // namespace udc::ehr
