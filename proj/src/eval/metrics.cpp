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

#include "udc/eval/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace udc::eval {

std::vector<int> rank_labels(const RowVector& scores) {
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) > scores(b); });
  return order;
}

TopK topk_metrics(const RowVector& scores, const std::vector<int>& truth, int k) {
  if (k < 1) throw ContractError("top-K needs K >= 1");
  if (truth.empty()) throw ContractError("top-K of an empty truth set");
  const std::vector<int> order = rank_labels(scores);
  std::vector<int> sorted_truth = truth;
  std::sort(sorted_truth.begin(), sorted_truth.end());
  TopK r;
  const auto limit = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  for (std::size_t i = 0; i < limit; ++i)
    if (std::binary_search(sorted_truth.begin(), sorted_truth.end(), order[i])) ++r.hits;
  r.acc = static_cast<double>(r.hits) / static_cast<double>(std::min<std::size_t>(static_cast<std::size_t>(k), truth.size()));
  r.pres = static_cast<double>(r.hits) / static_cast<double>(k);
  return r;
}

SetScores set_metrics_from_counts(long tp, long fp, long fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw ContractError("negative confusion counts");
  if (tp + fp + fn == 0) throw ContractError("set metrics of two empty sets");
  SetScores s;
  s.jaccard = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
  s.f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  return s;
}

std::optional<SetScores> set_metrics(const std::vector<int>& predicted, const std::vector<int>& truth) {
  std::vector<int> p = predicted, t = truth;
  std::sort(p.begin(), p.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  if (p.empty() && t.empty()) return std::nullopt;
  std::vector<int> both;
  std::set_intersection(p.begin(), p.end(), t.begin(), t.end(), std::back_inserter(both));
  const auto tp = static_cast<long>(both.size());
  return set_metrics_from_counts(tp, static_cast<long>(p.size()) - tp, static_cast<long>(t.size()) - tp);
}

std::vector<int> threshold_predictions(const RowVector& probabilities, double threshold) {
  std::vector<int> out;
  for (nn::Index j = 0; j < probabilities.size(); ++j)
    if (probabilities(j) >= threshold) out.push_back(static_cast<int>(j));
  return out;
}

Curves ranking_curves(const Matrix& scores, const Matrix& truth) {
  if (scores.rows() != truth.rows() || scores.cols() != truth.cols())
    throw DimensionError("score and truth matrices differ in shape");
  const auto n = static_cast<std::size_t>(scores.size());
  std::vector<std::pair<double, bool>> cells(n);
  long pos = 0;
  for (nn::Index i = 0; i < scores.rows(); ++i)
    for (nn::Index j = 0; j < scores.cols(); ++j) {
      const bool y = truth(i, j) > 0.5;
      cells[static_cast<std::size_t>(i * scores.cols() + j)] = {scores(i, j), y};
      pos += y ? 1 : 0;
    }
  const long neg = static_cast<long>(n) - pos;
  Curves c;
  if (pos == 0 || neg == 0) return c;
  std::sort(cells.begin(), cells.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  // Walk tie blocks from the highest score down.
  double auc_pairs = 0.0;  // positive-over-negative pairs, ties counted half
  double ap = 0.0;
  long tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    long bp = 0, bn = 0;
    while (j < n && cells[j].first == cells[i].first) {
      (cells[j].second ? bp : bn) += 1;
      ++j;
    }
    // Positives in this block beat every negative strictly below.
    auc_pairs += static_cast<double>(bp) * (static_cast<double>(neg - fp - bn) + 0.5 * static_cast<double>(bn));
    tp += bp;
    fp += bn;
    if (bp > 0)
      ap += (static_cast<double>(bp) / static_cast<double>(pos)) *
            (static_cast<double>(tp) / static_cast<double>(tp + fp));
    i = j;
  }
  c.auroc = auc_pairs / (static_cast<double>(pos) * static_cast<double>(neg));
  c.auprc = ap;
  return c;
}

namespace {

std::size_t k_index(const std::vector<int>& ks, int k) {
  const auto it = std::find(ks.begin(), ks.end(), k);
  if (it == ks.end()) throw ContractError("K=" + std::to_string(k) + " was not evaluated");
  return static_cast<std::size_t>(it - ks.begin());
}

}  // namespace

double MetricsReport::acc(int k) const { return acc_at_k.at(k_index(ks, k)); }
double MetricsReport::pres(int k) const { return pres_at_k.at(k_index(ks, k)); }

std::map<std::string, double> MetricsReport::values() const {
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    out["acc@" + std::to_string(ks[i])] = acc_at_k[i];
    out["pres@" + std::to_string(ks[i])] = pres_at_k[i];
  }
  if (auroc) out["auroc"] = *auroc;
  if (auprc) out["auprc"] = *auprc;
  out["jaccard"] = jaccard;
  out["f1"] = f1;
  return out;
}

MetricsReport evaluate(const Matrix& scores, const Matrix& targets, ehr::Task task,
                       const std::vector<int>& ks, double threshold) {
  if (scores.rows() != targets.rows() || scores.cols() != targets.cols())
    throw DimensionError("score and target matrices differ in shape");
  for (int k : ks)
    if (k < 1) throw ConfigError("K values must be >= 1");
  MetricsReport r;
  r.task = task;
  r.ks = ks;
  r.acc_at_k.assign(ks.size(), 0.0);
  r.pres_at_k.assign(ks.size(), 0.0);
  long topk_n = 0, set_n = 0;
  for (nn::Index i = 0; i < scores.rows(); ++i) {
    const RowVector s = scores.row(i);
    const std::vector<int> truth = ehr::ids_from_multi_hot(targets.row(i));
    ++r.samples;
    if (truth.empty()) {
      ++r.excluded_topk;
    } else {
      ++topk_n;
      for (std::size_t k = 0; k < ks.size(); ++k) {
        const TopK t = topk_metrics(s, truth, ks[k]);
        r.acc_at_k[k] += t.acc;
        r.pres_at_k[k] += t.pres;
      }
    }
    const auto set = set_metrics(threshold_predictions(s, threshold), truth);
    if (!set) {
      ++r.excluded_set;
    } else {
      ++set_n;
      r.jaccard += set->jaccard;
      r.f1 += set->f1;
    }
  }
  if (topk_n > 0)
    for (std::size_t k = 0; k < ks.size(); ++k) {
      r.acc_at_k[k] /= static_cast<double>(topk_n);
      r.pres_at_k[k] /= static_cast<double>(topk_n);
    }
  if (set_n > 0) {
    r.jaccard /= static_cast<double>(set_n);
    r.f1 /= static_cast<double>(set_n);
  }
  const Curves c = ranking_curves(scores, targets);
  r.auroc = c.auroc;
  r.auprc = c.auprc;
  return r;
}

std::vector<int> prevalence_groups(const std::vector<long>& counts) {
  const auto n = counts.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const long ca = counts[static_cast<std::size_t>(a)];
    const long cb = counts[static_cast<std::size_t>(b)];
    return ca != cb ? ca < cb : a > b;
  });
  std::vector<int> group(n, 0);
  for (std::size_t r = 0; r < n; ++r)
    group[static_cast<std::size_t>(order[r])] = static_cast<int>((5 * r) / n);
  return group;
}

GroupReport group_analysis(const Matrix& scores, const Matrix& targets,
                           const std::vector<std::pair<int, int>>& samples, const ehr::Dataset& data,
                           const std::vector<long>& counts, ehr::Task task, const std::vector<int>& ks,
                           double threshold) {
  if (static_cast<nn::Index>(samples.size()) != scores.rows())
    throw DimensionError("one sample reference per score row is required");
  const std::vector<int> group = prevalence_groups(counts);
  GroupReport rep;
  rep.task = task;
  rep.ks = ks;
  rep.groups.assign(5, {});

  if (task == ehr::Task::diagnosis_prediction) {
    std::vector<std::vector<long>> hits(5, std::vector<long>(ks.size(), 0));
    for (nn::Index i = 0; i < scores.rows(); ++i) {
      const std::vector<int> order = rank_labels(scores.row(i));
      std::vector<int> rank(order.size());
      for (std::size_t r = 0; r < order.size(); ++r) rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r);
      for (int d : ehr::ids_from_multi_hot(targets.row(i))) {
        const int g = group.at(static_cast<std::size_t>(d));
        ++rep.groups[static_cast<std::size_t>(g)].support;
        for (std::size_t k = 0; k < ks.size(); ++k)
          if (rank[static_cast<std::size_t>(d)] < ks[k]) ++hits[static_cast<std::size_t>(g)][k];
      }
    }
    for (std::size_t g = 0; g < 5; ++g)
      for (std::size_t k = 0; k < ks.size(); ++k) {
        const long s = rep.groups[g].support;
        rep.groups[g].values["acc@" + std::to_string(ks[k])] =
            s ? static_cast<double>(hits[g][k]) / static_cast<double>(s) : 0.0;
      }
    return rep;
  }

  std::vector<std::map<std::string, double>> sums(5);
  std::vector<long> set_support(5, 0);
  for (nn::Index i = 0; i < scores.rows(); ++i) {
    const auto [patient, visit] = samples[static_cast<std::size_t>(i)];
    const auto& rec = data.at(static_cast<std::size_t>(patient));
    int g = 4;
    for (int t = 0; t <= visit; ++t)
      for (int d : rec.visits.at(static_cast<std::size_t>(t)).diagnoses)
        g = std::min(g, group.at(static_cast<std::size_t>(d)));
    auto& out = sums[static_cast<std::size_t>(g)];
    ++rep.groups[static_cast<std::size_t>(g)].support;
    const std::vector<int> truth = ehr::ids_from_multi_hot(targets.row(i));
    if (!truth.empty())
      for (int k : ks) out["acc@" + std::to_string(k)] += topk_metrics(scores.row(i), truth, k).acc;
    if (const auto s = set_metrics(threshold_predictions(scores.row(i), threshold), truth)) {
      out["jaccard"] += s->jaccard;
      out["f1"] += s->f1;
      ++set_support[static_cast<std::size_t>(g)];
    }
  }
  for (std::size_t g = 0; g < 5; ++g) {
    const double n = static_cast<double>(rep.groups[g].support);
    const double ns = static_cast<double>(set_support[g]);
    for (int k : ks) {
      const std::string key = "acc@" + std::to_string(k);
      rep.groups[g].values[key] = n > 0 ? sums[g][key] / n : 0.0;
    }
    rep.groups[g].values["jaccard"] = ns > 0 ? sums[g]["jaccard"] / ns : 0.0;
    rep.groups[g].values["f1"] = ns > 0 ? sums[g]["f1"] / ns : 0.0;
  }
  return rep;
}

}  // namespace udc::eval
