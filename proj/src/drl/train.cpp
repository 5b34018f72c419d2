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

#include "udc/drl/train.hpp"

#include <algorithm>
#include <cstdio>

#include "udc/ehr/synthetic.hpp"
#include "udc/numerics/optim.hpp"

namespace udc::drl {

std::vector<DrlSample> draw_samples(const ehr::Dataset& train, const ehr::OccurrenceIndex& index,
                                    const std::vector<int>& diseases, ehr::Task task,
                                    const ehr::Vocabs& vocabs, std::mt19937_64& rng) {
  const int vocab = vocabs.of(ehr::target_class(task)).size;
  std::vector<DrlSample> out;
  out.reserve(diseases.size());
  for (int d : diseases) {
    const auto& occ = index.of(d);
    if (occ.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, occ.size() - 1);
    const ehr::Occurrence o = occ[pick(rng)];
    const auto& rec = train.at(static_cast<std::size_t>(o.patient));
    const auto& visit = rec.visits.at(static_cast<std::size_t>(o.visit));
    DrlSample s;
    s.disease = d;
    s.procedures = visit.procedures;
    s.medications = visit.medications;
    if (task == ehr::Task::medication_recommendation)
      s.targets = ehr::extract_targets(rec, o.visit, task);
    else if (o.visit + 1 < static_cast<int>(rec.visits.size()))
      s.targets = ehr::extract_targets(rec, o.visit + 1, task);
    if (!s.targets.empty()) s.negatives = synthetic_negative(s.targets, vocab, rng);
    out.push_back(std::move(s));
  }
  return out;
}

void initialize_codebook(DrlModel& model, const EntityTables& co, const EntityTables& text,
                         const std::vector<int>& diseases) {
  if (diseases.empty()) throw ConfigError("codebook initialization needs at least one disease");
  const nn::Matrix a = model.encode_values(Branch::co, gather_table_rows(co.diagnosis, diseases));
  const nn::Matrix b = model.encode_values(Branch::te, gather_table_rows(text.diagnosis, diseases));
  nn::Matrix residual(a.rows() + b.rows(), a.cols());
  residual << a, b;

  Codebook& book = model.codebook();
  std::mt19937_64 rng(ehr::mix_seed(model.config().seed, 0xc0deb00cULL));
  std::normal_distribution<double> noise(0.0, 1.0);
  const nn::Index pool = residual.rows();
  for (int l = 0; l < book.levels(); ++l) {
    const int codes = book.codes(l);
    std::vector<nn::Index> order(static_cast<std::size_t>(pool));
    for (nn::Index i = 0; i < pool; ++i) order[static_cast<std::size_t>(i)] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<nn::Index> any(0, pool - 1);
    const double jitter = 1e-3 * std::sqrt(residual.squaredNorm() / static_cast<double>(residual.size())) + 1e-6;
    nn::Matrix& level = book.level(l);
    for (int i = 0; i < codes; ++i) {
      const nn::Index src = i < pool ? order[static_cast<std::size_t>(i)] : any(rng);
      level.row(i) = residual.row(src);
      for (nn::Index j = 0; j < level.cols(); ++j) level(i, j) += jitter * noise(rng);
    }
    for (nn::Index r = 0; r < pool; ++r) residual.row(r) -= level.row(nearest_code(residual.row(r), level));
  }
  model.distill_state() = DistillState::from_codebook(book, model.distill_state().seed);
}

double mean_branch_cosine(DrlModel& model, const EntityTables& co, const EntityTables& text,
                          const std::vector<int>& diseases) {
  if (diseases.empty()) return 0.0;
  const nn::Matrix a = model.encode_values(Branch::co, gather_table_rows(co.diagnosis, diseases));
  const nn::Matrix b = model.encode_values(Branch::te, gather_table_rows(text.diagnosis, diseases));
  double total = 0.0;
  for (nn::Index i = 0; i < a.rows(); ++i)
    total += nn::cosine_similarity(quantize_residual(a.row(i), model.codebook()).z,
                                   quantize_residual(b.row(i), model.codebook()).z);
  return total / static_cast<double>(a.rows());
}

namespace {

std::vector<std::vector<DrlSample>> make_batches(std::vector<DrlSample> samples, int batch_size) {
  std::vector<std::vector<DrlSample>> out;
  for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(samples.size(), i + static_cast<std::size_t>(batch_size));
    std::vector<DrlSample> b(std::make_move_iterator(samples.begin() + static_cast<long>(i)),
                             std::make_move_iterator(samples.begin() + static_cast<long>(end)));
    std::sort(b.begin(), b.end(), [](const DrlSample& x, const DrlSample& y) { return x.disease < y.disease; });
    out.push_back(std::move(b));
  }
  return out;
}

double probe_recon(DrlModel& model, const std::vector<std::vector<DrlSample>>& probe,
                   const EntityTables& co, const EntityTables& text, ehr::Task task) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& batch : probe) {
    Graph g(false);
    const BatchForward f = forward_batch(g, model, batch, co, text, task);
    total += (f.recon_co.scalar() + f.recon_te.scalar()) * static_cast<double>(batch.size());
    n += batch.size();
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

std::string format_epoch(const DrlEpochLog& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "drl epoch %d total %.5f recon %.5f con %.5f com %.5f util %.3f cos %.4f probe %.5f",
                e.epoch, e.loss.total, e.loss.recon(), e.loss.con(), e.loss.com, e.utilization,
                e.cosine, e.probe_recon);
  return buf;
}

}  // namespace

DrlTrainResult train_drl(DrlModel& model, const EntityTables& co, const EntityTables& text,
                         const ehr::Dataset& train, const ehr::RaritySplit& rarity,
                         const ehr::Vocabs& vocabs, ehr::Task task, const LogFn& log) {
  const DrlConfig& cfg = model.config();
  if (rarity.common.empty()) throw ConfigError("the common-disease set is empty; nothing to train DRL on");
  if (co.diagnosis.rows() != text.diagnosis.rows())
    throw ContractError("CO and text disease tables differ in row count");

  std::vector<int> common = rarity.common;
  std::sort(common.begin(), common.end());
  const ehr::OccurrenceIndex index(train, static_cast<int>(co.diagnosis.rows()));

  initialize_codebook(model, co, text, common);

  std::mt19937_64 probe_rng(ehr::mix_seed(cfg.seed, 0x9e0beULL));
  const auto probe = make_batches(draw_samples(train, index, common, task, vocabs, probe_rng), cfg.batch_size);

  DrlTrainResult result;
  DrlEpochLog start;
  start.cosine = mean_branch_cosine(model, co, text, common);
  start.probe_recon = probe_recon(model, probe, co, text, task);
  result.epochs.push_back(start);
  if (log) log(format_epoch(start));

  nn::AdamW opt({cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  const nn::ParameterList params = model.parameters();
  const DistillConfig distill = cfg.distill();
  std::mt19937_64 rng(ehr::mix_seed(cfg.seed, 0xd41ULL));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> order = common;
    std::shuffle(order.begin(), order.end(), rng);
    auto samples = draw_samples(train, index, order, task, vocabs, rng);
    DrlEpochLog e;
    e.epoch = epoch;
    for (const auto& s : samples) e.skipped_targets += s.targets.empty() ? 1 : 0;
    std::vector<bool> used(static_cast<std::size_t>(model.codebook().codes(0)), false);
    std::size_t seen = 0;
    for (const auto& batch : make_batches(std::move(samples), cfg.batch_size)) {
      Graph g;
      const BatchForward f = forward_batch(g, model, batch, co, text, task);
      nn::AdamW::zero_grad(params);
      g.backward(f.total);
      opt.step(params);
      codebook_ema_update(model.codebook(), model.distill_state(), f.ema, distill);
      e.loss += f.breakdown().scaled(static_cast<double>(batch.size()));
      seen += batch.size();
      for (const auto& q : f.ema) {
        used[static_cast<std::size_t>(q.co.indices.front())] = true;
        used[static_cast<std::size_t>(q.te.indices.front())] = true;
      }
    }
    if (seen) e.loss = e.loss.scaled(1.0 / static_cast<double>(seen));
    e.utilization = static_cast<double>(std::count(used.begin(), used.end(), true)) /
                    static_cast<double>(used.size());
    e.cosine = mean_branch_cosine(model, co, text, common);
    e.probe_recon = probe_recon(model, probe, co, text, task);
    result.epochs.push_back(e);
    if (log) log(format_epoch(e));
  }
  return result;
}

nn::Matrix aggregate_conditions(DrlModel& model, const EntityTables& co, const ehr::Dataset& train,
                                int n_diseases) {
  ConditionCalibrator& cal = model.calibrator(Branch::co);
  const nn::Index dim = cal.dim();
  nn::Matrix sum = nn::Matrix::Zero(n_diseases, dim);
  std::vector<long> count(static_cast<std::size_t>(n_diseases), 0);
  for (const auto& rec : train) {
    for (const auto& v : rec.visits) {
      if (v.diagnoses.empty()) continue;
      Graph g(false);
      const nn::RowVector f = cal.condition(g, gather_table_rows(co.procedure, v.procedures),
                                            gather_table_rows(co.medication, v.medications))
                                  .value()
                                  .row(0);
      for (int d : v.diagnoses) {
        sum.row(d) += f;
        ++count[static_cast<std::size_t>(d)];
      }
    }
  }
  for (int d = 0; d < n_diseases; ++d) {
    const long c = count[static_cast<std::size_t>(d)];
    if (c > 0) sum.row(d) /= static_cast<double>(c);
    else sum.row(d) = cal.default_condition().value.row(0);
  }
  return sum;
}

nn::RowVector substitute_embedding(int disease, DrlModel& model, const EntityTables& co,
                                   const EntityTables& text, const ehr::RaritySplit& rarity,
                                   const nn::Matrix& conditions) {
  if (disease < 0 || disease >= co.diagnosis.rows() ||
      disease >= static_cast<int>(rarity.is_common.size()))
    throw ContractError("unknown disease id " + std::to_string(disease));
  const bool rare = rarity.rare_disease(disease);
  const Branch b = rare ? Branch::te : Branch::co;
  const nn::Matrix& table = rare ? text.diagnosis : co.diagnosis;
  Graph g(false);
  const Var r0 = model.encode(g, b, g.constant(table.row(disease)));
  Var z = g.constant(quantize_residual(r0.value().row(0), model.codebook()).z);
  if (!model.config().flags.nco)
    z = model.calibrator(Branch::co).calibrate(g, z, g.constant(conditions.row(disease)));
  return model.decode(g, Branch::co, z).value().row(0);
}

nn::Matrix substitute_embeddings(DrlModel& model, const EntityTables& co, const EntityTables& text,
                                 const ehr::RaritySplit& rarity, const ehr::Dataset& train) {
  const int n = static_cast<int>(co.diagnosis.rows());
  const nn::Matrix cond = model.config().flags.nco
                              ? nn::Matrix::Zero(n, model.config().dim)
                              : aggregate_conditions(model, co, train, n);
  nn::Matrix out(n, model.co_width());
  for (int d = 0; d < n; ++d) out.row(d) = substitute_embedding(d, model, co, text, rarity, cond);
  return out;
}

}  // namespace udc::drl
