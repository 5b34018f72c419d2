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

#include <unordered_map>

#include "udc/numerics/autodiff.hpp"

namespace udc::nn {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay and bias-corrected moments. Frozen
/// parameters are skipped. A non-finite gradient aborts the whole step
/// before anything is modified.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void step(const ParameterList& params);
  static void zero_grad(const ParameterList& params);

  long step_count() const { return step_; }
  AdamWConfig& config() { return cfg_; }

 private:
  struct Moments {
    Matrix m;
    Matrix v;
  };
  AdamWConfig cfg_;
  long step_ = 0;
  std::unordered_map<const Parameter*, Moments> state_;
};

}  // namespace udc::nn
