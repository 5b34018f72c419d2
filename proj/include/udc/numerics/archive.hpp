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
#include <map>
#include <string>

#include "udc/numerics/autodiff.hpp"

namespace udc::nn {

/// Flat key -> array container used for every checkpoint.
///
/// Binary layout (little-endian):
///   "UDCK" | u32 version | u64 array count | u64 text count
///   per array (sorted by key): u32 key length | key | u64 rows | u64 cols |
///                              rows*cols f64, row-major
///   per text  (sorted by key): u32 key length | key | u32 length | bytes
///   u64 FNV-1a checksum of every preceding byte
class TensorArchive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void put(const std::string& key, const Matrix& m) { arrays_[key] = m; }
  void put_text(const std::string& key, const std::string& s) { texts_[key] = s; }
  void put(const Parameter& p) { put(p.name, p.value); }

  bool contains(const std::string& key) const { return arrays_.count(key) != 0; }
  const Matrix& get(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  bool has_text(const std::string& key) const { return texts_.count(key) != 0; }
  /// Copies the stored array into `p`, checking the shape.
  void restore(Parameter& p) const;

  const std::map<std::string, Matrix>& arrays() const { return arrays_; }

  std::string serialize() const;
  static TensorArchive deserialize(const std::string& bytes);

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

  /// Checksum of the serialized content (stable across save/load).
  std::uint64_t checksum() const;

 private:
  std::map<std::string, Matrix> arrays_;
  std::map<std::string, std::string> texts_;
};

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 1469598103934665603ULL);
std::uint64_t fnv1a_file(const std::filesystem::path& path);
std::uint64_t checksum(const Matrix& m);

}  // namespace udc::nn
