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

#include <functional>
#include <optional>

#include "udc/ehr/split.hpp"
#include "udc/numerics/optim.hpp"
#include "udc/pcm/model.hpp"

namespace udc::pcm {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 16;
  double lr = 1e-3;
  double weight_decay = 0.01;
  std::uint64_t seed = 1;
  /// Keep the parameters of the epoch with the lowest validation loss.
  bool keep_best = true;
};

using LogFn = std::function<void(const std::string&)>;

struct TrainResult {
  /// Mean training BCE per epoch, in the order batches were seen.
  std::vector<double> train_loss;
  /// Validation BCE before training (index 0) and after every epoch.
  std::vector<double> val_loss;
  int best_epoch = 0;
};

/// Mean BCE over all task samples of `data` (fixed order, no gradient).
double evaluate_loss(PcmModel& model, const ehr::Dataset& data);

/// Stage 1: AdamW on the BCE objective over every trainable parameter.
/// A non-finite loss aborts with NumericError.
TrainResult pretrain(PcmModel& model, const ehr::Dataset& train, const ehr::Dataset& val,
                     const TrainConfig& cfg, const LogFn& log = {});

/// Stage 3: installs `substituted` as the fixed disease table, freezes E_D,
/// and tunes the remaining predictor parameters. `epochs == 0` (or
/// `cfg.lr == 0`) leaves the predictor as is. Throws ContractError when the
/// substituted table does not match E_D's shape.
TrainResult finetune(PcmModel& model, const Matrix& substituted, const ehr::Dataset& train,
                     const ehr::Dataset& val, const TrainConfig& cfg, const LogFn& log = {});

/// Per-sample logits/targets over every task sample in `data`.
struct Predictions {
  std::vector<ehr::Sample> samples;
  Matrix scores;   // probabilities, one row per sample
  Matrix targets;  // multi-hot, one row per sample
};

Predictions predict_dataset(PcmModel& model, const ehr::Dataset& data);

}  // namespace udc::pcm
