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

#include <stdexcept>
#include <string>

namespace udc {

/// Base class of every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Shapes that do not agree (inner dimensions, layer widths, ...).
struct DimensionError : Error {
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

/// A documented precondition was violated by the caller.
struct ContractError : Error {
  explicit ContractError(const std::string& what) : Error("contract", what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

/// Malformed input files. Messages carry the offending line where known.
struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error("parse", what) {}
};

/// NaN/Inf reached a state that must stay finite.
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

/// A pipeline stage was asked to run before the stage it depends on.
struct StageError : Error {
  explicit StageError(const std::string& what) : Error("stage", what) {}
};

}  // namespace udc
