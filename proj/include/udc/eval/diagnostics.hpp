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

#include "udc/drl/model.hpp"

namespace udc::eval {

struct LevelDiagnostics {
  double utilization = 0.0;  // fraction of codes assigned at least once
  double entropy = 0.0;      // of the usage distribution, in nats
  double agreement = 0.0;    // share of diseases whose CO and text index coincide
  std::vector<long> usage;   // assignments per code, both branches
};

struct CodebookDiagnostics {
  std::vector<LevelDiagnostics> levels;
  /// Share of diseases whose full CO and text code tuples are equal.
  double tuple_agreement = 0.0;
  double mean_cosine = 0.0;
  long diseases = 0;
};

/// Quantizes every listed disease through both branches.
CodebookDiagnostics codebook_diagnostics(drl::DrlModel& model, const drl::EntityTables& co,
                                         const drl::EntityTables& text, const std::vector<int>& diseases);

/// Same report from precomputed quantizations (CO and text, paired by index).
CodebookDiagnostics codebook_diagnostics(const drl::Codebook& book,
                                         const std::vector<drl::QuantizationResult>& co,
                                         const std::vector<drl::QuantizationResult>& te);

}  // namespace udc::eval
