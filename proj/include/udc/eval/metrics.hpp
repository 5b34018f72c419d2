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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "udc/ehr/types.hpp"

namespace udc::eval {

using nn::Matrix;
using nn::RowVector;

struct TopK {
  int hits = 0;
  /// hits / min(K, |truth|), i.e. recall within the top K.
  double acc = 0.0;
  /// hits / K.
  double pres = 0.0;
};

/// Labels ordered by descending score, ties to the lower id.
std::vector<int> rank_labels(const RowVector& scores);

/// Throws ContractError for K < 1 or an empty truth set.
TopK topk_metrics(const RowVector& scores, const std::vector<int>& truth, int k);

struct SetScores {
  double jaccard = 0.0;
  double f1 = 0.0;
};

SetScores set_metrics_from_counts(long tp, long fp, long fn);
/// nullopt when both sets are empty.
std::optional<SetScores> set_metrics(const std::vector<int>& predicted, const std::vector<int>& truth);

std::vector<int> threshold_predictions(const RowVector& probabilities, double threshold = 0.5);

struct Curves {
  std::optional<double> auroc;
  std::optional<double> auprc;
};

/// Micro-pooled over every (row, label) cell. Ties share their average rank
/// (AUROC) and form a single threshold step (AUPRC).
Curves ranking_curves(const Matrix& scores, const Matrix& truth);

struct MetricsReport {
  ehr::Task task = ehr::Task::diagnosis_prediction;
  std::vector<int> ks;
  std::vector<double> acc_at_k;
  std::vector<double> pres_at_k;
  std::optional<double> auroc;
  std::optional<double> auprc;
  double jaccard = 0.0;
  double f1 = 0.0;
  long samples = 0;
  long excluded_topk = 0;
  long excluded_set = 0;

  double acc(int k) const;
  double pres(int k) const;
  /// Flat name -> value view ("acc@20", "auroc", ...); absent curves omitted.
  std::map<std::string, double> values() const;
};

MetricsReport evaluate(const Matrix& scores, const Matrix& targets, ehr::Task task,
                       const std::vector<int>& ks, double threshold = 0.5);

/// Quintile index 0..4 (G1..G5) per disease; G1 holds the rarest. Diseases
/// are ranked by ascending count, equal counts by descending id, so the
/// order agrees with the rarity split's tie rule.
std::vector<int> prevalence_groups(const std::vector<long>& counts);

struct GroupMetrics {
  /// Diagnosis prediction: (sample, true disease) pairs; medication
  /// recommendation: samples.
  long support = 0;
  std::map<std::string, double> values;
};

struct GroupReport {
  ehr::Task task = ehr::Task::diagnosis_prediction;
  std::vector<int> ks;
  std::vector<GroupMetrics> groups;  // G1..G5
};

/// `samples[i]` is the (patient, target visit) behind row i of the score
/// and target matrices.
///
/// Diagnosis prediction: each true disease of each sample counts toward its
/// own group; acc@K is the share of those that appear in the top K.
/// Medication recommendation: each sample is placed in the group of the
/// rarest disease seen up to and including the target visit, and its
/// per-sample metrics are averaged there. Samples without any disease go to
/// G5.
GroupReport group_analysis(const Matrix& scores, const Matrix& targets,
                           const std::vector<std::pair<int, int>>& samples, const ehr::Dataset& data,
                           const std::vector<long>& counts, ehr::Task task, const std::vector<int>& ks,
                           double threshold = 0.5);

}  // namespace udc::eval
