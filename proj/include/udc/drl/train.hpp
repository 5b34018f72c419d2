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

#include "udc/drl/model.hpp"
#include "udc/ehr/split.hpp"

namespace udc::drl {

using LogFn = std::function<void(const std::string&)>;

struct DrlEpochLog {
  int epoch = 0;
  LossBreakdown loss;  // mean over the epoch's batches
  /// Fraction of level-1 codes hit by the epoch's training quantizations.
  double utilization = 0.0;
  /// Mean cos(z_d, z~_d) over common diseases at the end of the epoch.
  double cosine = 0.0;
  /// Reconstruction loss on the fixed probe set at the end of the epoch.
  double probe_recon = 0.0;
  long skipped_targets = 0;
};

struct DrlTrainResult {
  /// Entry 0 is the probe evaluation before any update.
  std::vector<DrlEpochLog> epochs;

  double initial_recon() const { return epochs.front().probe_recon; }
  double final_recon() const { return epochs.back().probe_recon; }
};

/// One sampled visit occurrence per common disease in `diseases`.
std::vector<DrlSample> draw_samples(const ehr::Dataset& train, const ehr::OccurrenceIndex& index,
                                    const std::vector<int>& diseases, ehr::Task task,
                                    const ehr::Vocabs& vocabs, std::mt19937_64& rng);

/// Seeds every level from the pooled encoder outputs of `diseases` (both
/// branches), level by level on the running residuals.
void initialize_codebook(DrlModel& model, const EntityTables& co, const EntityTables& text,
                         const std::vector<int>& diseases);

/// Mean cos(z_d, z~_d) of the quantized sums.
double mean_branch_cosine(DrlModel& model, const EntityTables& co, const EntityTables& text,
                          const std::vector<int>& diseases);

DrlTrainResult train_drl(DrlModel& model, const EntityTables& co, const EntityTables& text,
                         const ehr::Dataset& train, const ehr::RaritySplit& rarity,
                         const ehr::Vocabs& vocabs, ehr::Task task, const LogFn& log = {});

/// Mean condition vector over every visit containing each disease (CO
/// calibrator, CO tables). Rows for diseases with no visit hold the learned
/// default.
nn::Matrix aggregate_conditions(DrlModel& model, const EntityTables& co, const ehr::Dataset& train,
                                int n_diseases);

/// e^_d: rare diseases go through the text encoder, common ones through the
/// CO encoder; both are quantized, calibrated with the aggregated condition
/// (unless NCO) and decoded by the CO decoder.
nn::RowVector substitute_embedding(int disease, DrlModel& model, const EntityTables& co,
                                   const EntityTables& text, const ehr::RaritySplit& rarity,
                                   const nn::Matrix& conditions);

nn::Matrix substitute_embeddings(DrlModel& model, const EntityTables& co, const EntityTables& text,
                                 const ehr::RaritySplit& rarity, const ehr::Dataset& train);

}  // namespace udc::drl
