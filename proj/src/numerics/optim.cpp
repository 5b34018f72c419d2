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

#include "udc/numerics/optim.hpp"

#include <cmath>

namespace udc::nn {

void AdamW::step(const ParameterList& params) {
  for (const Parameter* p : params) {
    if (!p->requires_grad) continue;
    if (!p->grad.allFinite()) {
      throw NumericError("AdamW: non-finite gradient in '" + p->name + "' (max |g| = " +
                         std::to_string(p->grad.cwiseAbs().maxCoeff()) + ") at step " +
                         std::to_string(step_ + 1));
    }
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (Parameter* p : params) {
    if (!p->requires_grad) continue;
    Moments& s = state_[p];
    if (s.m.size() == 0) {
      s.m = Matrix::Zero(p->value.rows(), p->value.cols());
      s.v = Matrix::Zero(p->value.rows(), p->value.cols());
    }
    if (cfg_.weight_decay != 0.0) p->value *= (1.0 - cfg_.lr * cfg_.weight_decay);
    s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * p->grad;
    s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * p->grad.cwiseAbs2();
    p->value.array() -= cfg_.lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + cfg_.eps);
  }
}

void AdamW::zero_grad(const ParameterList& params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace udc::nn
