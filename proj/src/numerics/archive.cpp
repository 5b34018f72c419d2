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

#include "udc/numerics/archive.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace udc::nn {

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string s = ss.str();
  return fnv1a(s.data(), s.size());
}

std::uint64_t checksum(const Matrix& m) {
  std::uint64_t h = 1469598103934665603ULL;
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(m.rows()),
                                 static_cast<std::uint64_t>(m.cols())};
  h = fnv1a(dims, sizeof dims, h);
  return fnv1a(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()), h);
}

const Matrix& TensorArchive::get(const std::string& key) const {
  auto it = arrays_.find(key);
  if (it == arrays_.end()) throw ParseError("checkpoint has no array '" + key + "'");
  return it->second;
}

const std::string& TensorArchive::text(const std::string& key) const {
  auto it = texts_.find(key);
  if (it == texts_.end()) throw ParseError("checkpoint has no entry '" + key + "'");
  return it->second;
}

void TensorArchive::restore(Parameter& p) const {
  const Matrix& m = get(p.name);
  if (m.rows() != p.value.rows() || m.cols() != p.value.cols())
    throw DimensionError("checkpoint array '" + p.name + "' has shape " + shape_string(m) +
                         ", expected " + shape_string(p.value));
  p.value = m;
  p.zero_grad();
}

namespace {

template <typename T>
void put_pod(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_str(std::string& out, const std::string& s) {
  put_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, s_.data() + at_, sizeof v);
    at_ += sizeof v;
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string v = s_.substr(at_, n);
    at_ += n;
    return v;
  }
  void bytes(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, s_.data() + at_, n);
    at_ += n;
  }
  std::size_t offset() const { return at_; }

 private:
  void need(std::size_t n) const {
    if (at_ + n > s_.size()) throw ParseError("checkpoint truncated");
  }
  const std::string& s_;
  std::size_t at_ = 0;
};

}  // namespace

std::string TensorArchive::serialize() const {
  std::string out = "UDCK";
  put_pod<std::uint32_t>(out, kVersion);
  put_pod<std::uint64_t>(out, arrays_.size());
  put_pod<std::uint64_t>(out, texts_.size());
  for (const auto& [key, m] : arrays_) {
    put_str(out, key);
    put_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) put_pod<double>(out, m(r, c));
  }
  for (const auto& [key, s] : texts_) {
    put_str(out, key);
    put_str(out, s);
  }
  put_pod<std::uint64_t>(out, fnv1a(out.data(), out.size()));
  return out;
}

TensorArchive TensorArchive::deserialize(const std::string& bytes) {
  if (bytes.size() < 4 + 4 + 16 + 8 || bytes.compare(0, 4, "UDCK") != 0)
    throw ParseError("not a checkpoint file (bad magic)");
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof stored);
  if (stored != fnv1a(bytes.data(), body)) throw ParseError("checkpoint checksum mismatch");

  Reader rd(bytes);
  char magic[4];
  rd.bytes(magic, 4);
  const auto version = rd.pod<std::uint32_t>();
  if (version != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const auto n_arrays = rd.pod<std::uint64_t>();
  const auto n_texts = rd.pod<std::uint64_t>();
  TensorArchive a;
  for (std::uint64_t i = 0; i < n_arrays; ++i) {
    std::string key = rd.str();
    const auto rows = rd.pod<std::uint64_t>();
    const auto cols = rd.pod<std::uint64_t>();
    if (rows * cols * sizeof(double) > bytes.size()) throw ParseError("checkpoint array too large");
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = rd.pod<double>();
    a.arrays_.emplace(std::move(key), std::move(m));
  }
  for (std::uint64_t i = 0; i < n_texts; ++i) {
    std::string key = rd.str();
    a.texts_.emplace(std::move(key), rd.str());
  }
  if (rd.offset() != body) throw ParseError("trailing bytes in checkpoint");
  return a;
}

void TensorArchive::save(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StageError("checkpoint not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

std::uint64_t TensorArchive::checksum() const {
  const std::string s = serialize();
  return fnv1a(s.data(), s.size());
}

}  // namespace udc::nn
