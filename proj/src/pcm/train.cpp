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

#include "udc/pcm/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace udc::pcm {

namespace {

Matrix target_row(const PcmModel& model, const ehr::PatientRecord& rec, int visit) {
  return ehr::multi_hot(ehr::extract_targets(rec, visit, model.task()), model.output_size());
}

struct Snapshot {
  std::vector<Matrix> values;

  static Snapshot take(const nn::ParameterList& params) {
    Snapshot s;
    for (const Parameter* p : params) s.values.push_back(p->value);
    return s;
  }
  void restore(const nn::ParameterList& params) const {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
  }
};

TrainResult run_training(PcmModel& model, const nn::ParameterList& trainable, const ehr::Dataset& train,
                         const ehr::Dataset& val, const TrainConfig& cfg, const LogFn& log,
                         const char* stage) {
  if (cfg.batch_size <= 0) throw ConfigError("batch size must be positive");
  const std::vector<ehr::Sample> samples = ehr::enumerate_samples(train, model.task());
  if (samples.empty()) throw ContractError(std::string(stage) + ": training set has no samples");

  nn::AdamW opt({cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  const nn::ParameterList all = model.parameters();
  nn::AdamW::zero_grad(all);

  TrainResult res;
  const bool has_val = !ehr::enumerate_samples(val, model.task()).empty();
  double best = has_val ? evaluate_loss(model, val) : 0.0;
  res.val_loss.push_back(best);
  Snapshot best_params = Snapshot::take(all);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Graph g;
      std::vector<Var> losses;
      for (std::size_t i = start; i < end; ++i) {
        const ehr::Sample& s = samples[order[i]];
        const ehr::PatientRecord& rec = train[s.patient];
        losses.push_back(bce_loss(model.forward_sample(g, rec, s.visit), target_row(model, rec, s.visit)));
      }
      Var loss = nn::mean(nn::concat_rows(losses));
      if (!std::isfinite(loss.scalar()))
        throw NumericError(std::string(stage) + ": non-finite loss at epoch " + std::to_string(epoch));
      g.backward(loss);
      opt.step(trainable);
      nn::AdamW::zero_grad(all);
      total += loss.scalar();
      ++batches;
    }
    res.train_loss.push_back(total / batches);
    const double v = has_val ? evaluate_loss(model, val) : res.train_loss.back();
    res.val_loss.push_back(v);
    if (!cfg.keep_best || v < best || !has_val) {
      best = v;
      res.best_epoch = epoch;
      best_params = Snapshot::take(all);
    }
    if (log) {
      std::ostringstream os;
      os << stage << " epoch " << epoch << " train_bce " << res.train_loss.back() << " val_bce " << v;
      log(os.str());
    }
  }
  best_params.restore(all);
  return res;
}

}  // namespace

double evaluate_loss(PcmModel& model, const ehr::Dataset& data) {
  const auto samples = ehr::enumerate_samples(data, model.task());
  if (samples.empty()) throw ContractError("no samples to evaluate");
  double total = 0.0;
  for (const ehr::Sample& s : samples) {
    Graph g(false);
    const ehr::PatientRecord& rec = data[s.patient];
    total += bce_loss(model.forward_sample(g, rec, s.visit), target_row(model, rec, s.visit)).scalar();
  }
  return total / static_cast<double>(samples.size());
}

TrainResult pretrain(PcmModel& model, const ehr::Dataset& train, const ehr::Dataset& val,
                     const TrainConfig& cfg, const LogFn& log) {
  nn::ParameterList trainable;
  for (Parameter* p : model.parameters())
    if (p->requires_grad) trainable.push_back(p);
  return run_training(model, trainable, train, val, cfg, log, "pretrain");
}

TrainResult finetune(PcmModel& model, const Matrix& substituted, const ehr::Dataset& train,
                     const ehr::Dataset& val, const TrainConfig& cfg, const LogFn& log) {
  model.set_disease_override(substituted);
  Parameter& e_d = model.embeddings().diagnosis;
  const bool was = e_d.requires_grad;
  e_d.requires_grad = false;
  nn::ParameterList trainable;
  for (Parameter* p : model.parameters_except_diagnosis_table())
    if (p->requires_grad) trainable.push_back(p);
  TrainResult res;
  try {
    res = run_training(model, trainable, train, val, cfg, log, "finetune");
  } catch (...) {
    e_d.requires_grad = was;
    throw;
  }
  e_d.requires_grad = was;
  return res;
}

Predictions predict_dataset(PcmModel& model, const ehr::Dataset& data) {
  Predictions out;
  out.samples = ehr::enumerate_samples(data, model.task());
  const auto n = static_cast<nn::Index>(out.samples.size());
  out.scores.resize(n, model.output_size());
  out.targets.resize(n, model.output_size());
  for (nn::Index i = 0; i < n; ++i) {
    const ehr::Sample& s = out.samples[static_cast<std::size_t>(i)];
    const ehr::PatientRecord& rec = data[s.patient];
    out.scores.row(i) = model.predict_sample(rec, s.visit).probabilities();
    out.targets.row(i) = target_row(model, rec, s.visit);
  }
  return out;
}

}  // namespace udc::pcm
