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

#include "udc/drl/model.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace udc::drl {

std::string AblationFlags::name() const {
  std::vector<std::string> parts;
  if (nco) parts.emplace_back("NCO");
  if (nt) parts.emplace_back("NT");
  if (nm) parts.emplace_back("NM");
  if (ns) parts.emplace_back("NS");
  if (ncd) parts.emplace_back("NCD");
  if (parts.empty()) return "UDC";
  std::string out = "UDC-" + parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) out += "+" + parts[i];
  return out;
}

AblationFlags AblationFlags::parse(const std::string& s) {
  AblationFlags f;
  // Also accepts the display form, "UDC-NM+NS".
  std::string spec = s;
  if (spec.rfind("UDC-", 0) == 0) spec = spec.substr(4);
  std::replace(spec.begin(), spec.end(), '+', ',');
  std::stringstream in(spec);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    std::string t;
    for (char c : tok)
      if (!std::isspace(static_cast<unsigned char>(c))) t += static_cast<char>(std::toupper(c));
    if (t.empty() || t == "NONE" || t == "UDC") continue;
    if (t == "NCO") f.nco = true;
    else if (t == "NT") f.nt = true;
    else if (t == "NM") f.nm = true;
    else if (t == "NS") f.ns = true;
    else if (t == "NCD") f.ncd = true;
    else throw ConfigError("unknown ablation flag '" + tok + "' (expected NCO|NT|NM|NS|NCD)");
  }
  return f;
}

void DrlConfig::validate() const {
  if (levels <= 0) throw ConfigError("drl.levels must be positive");
  if (codes_per_level <= 0) throw ConfigError("drl.codes must be positive");
  if (dim <= 0) throw ConfigError("drl.dim must be positive");
  if (hidden < 0) throw ConfigError("drl.hidden must be non-negative");
  if (!(alpha > 0.0)) throw ConfigError("drl.alpha must be positive");
  if (kappa < 0.0 || kappa > 1.0) throw ConfigError("drl.kappa must lie in [0, 1]");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in (0, 1]");
  if (!(calibration_eps > 0.0)) throw ConfigError("drl.eps must be positive");
  if (epochs < 0) throw ConfigError("drl.epochs must be non-negative");
  if (batch_size <= 0) throw ConfigError("drl.batch must be positive");
  if (!(lr >= 0.0)) throw ConfigError("drl.lr must be non-negative");
  if (heads <= 0 || dim % heads != 0) throw ConfigError("drl.heads must divide drl.dim");
}

DistillConfig DrlConfig::distill() const {
  DistillConfig d;
  d.kappa = kappa;
  d.normalizer = ema_normalizer_mode;
  d.target = ema_target;
  d.co_teacher = !flags.ncd;
  d.attention_heads = heads;
  d.dead_code_reset = dead_code_reset;
  d.dead_code_threshold = dead_code_threshold;
  return d;
}

ContrastiveFlags DrlConfig::contrastive() const {
  ContrastiveFlags c;
  c.no_task = flags.nt;
  c.no_batch_negatives = flags.nm;
  c.no_synthetic_negative = flags.ns;
  c.include_positive = include_positive_in_denominator;
  return c;
}

const nn::Matrix& EntityTables::of(ehr::EntityClass c) const {
  switch (c) {
    case ehr::EntityClass::diagnosis: return diagnosis;
    case ehr::EntityClass::procedure: return procedure;
    case ehr::EntityClass::medication: return medication;
  }
  throw ContractError("unknown entity class");
}

namespace {

std::vector<nn::Index> mlp_widths(nn::Index in, int hidden, nn::Index out) {
  if (hidden == 0) return {in, out};
  return {in, hidden, out};
}

}  // namespace

DrlModel::DrlModel(const DrlConfig& cfg, nn::Index co_width, nn::Index text_width)
    : cfg_(cfg), co_width_(co_width), text_width_(text_width) {
  cfg_.validate();
  if (co_width <= 0 || text_width <= 0) throw ConfigError("entity widths must be positive");
  std::mt19937_64 rng(cfg.seed);
  phi_co_ = nn::Mlp("drl.phi_co", mlp_widths(co_width, cfg.hidden, cfg.dim), cfg.activation, rng);
  phi_te_ = nn::Mlp("drl.phi_te", mlp_widths(text_width, cfg.hidden, cfg.dim), cfg.activation, rng);
  psi_co_ = nn::Mlp("drl.psi_co", mlp_widths(cfg.dim, cfg.hidden, co_width), cfg.activation, rng);
  psi_te_ = nn::Mlp("drl.psi_te", mlp_widths(cfg.dim, cfg.hidden, text_width), cfg.activation, rng);
  cal_co_ = ConditionCalibrator("drl.cal_co", co_width, cfg.dim, cfg.heads, cfg.condition_encoder,
                                cfg.calibration_eps, rng);
  cal_te_ = ConditionCalibrator("drl.cal_te", text_width, cfg.dim, cfg.heads,
                                cfg.condition_encoder, cfg.calibration_eps, rng);
  w_ = Parameter("drl.W", nn::glorot(cfg.dim, cfg.dim, rng));
  codebook_ = Codebook(cfg.levels, cfg.codes_per_level, cfg.dim);
  distill_ = DistillState::from_codebook(codebook_, cfg.seed ^ 0x5eedc0deULL);
}

Var DrlModel::encode(Graph& g, Branch b, const Var& x) {
  const nn::Index want = b == Branch::co ? co_width_ : text_width_;
  if (x.cols() != want)
    throw ContractError(std::string(b == Branch::co ? "co" : "text") + " encoder expects width " +
                        std::to_string(want) + ", got " + std::to_string(x.cols()));
  return encoder(b).forward(g, x);
}

Var DrlModel::decode(Graph& g, Branch b, const Var& z) {
  if (z.cols() != cfg_.dim)
    throw ContractError("decoder expects width " + std::to_string(cfg_.dim) + ", got " +
                        std::to_string(z.cols()));
  return decoder(b).forward(g, z);
}

nn::Matrix DrlModel::encode_values(Branch b, const nn::Matrix& x) {
  Graph g(false);
  return encode(g, b, g.constant(x)).value();
}

ParameterList DrlModel::parameters() {
  ParameterList out;
  auto append = [&out](ParameterList ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  append(phi_co_.parameters());
  append(phi_te_.parameters());
  append(psi_co_.parameters());
  append(psi_te_.parameters());
  append(cal_co_.parameters());
  append(cal_te_.parameters());
  out.push_back(&w_);
  return out;
}

void DrlModel::save(nn::TensorArchive& ar) const {
  for (Parameter* p : const_cast<DrlModel*>(this)->parameters()) ar.put(*p);
  save_codebook(ar, codebook_, "drl.codebook");
  distill_.save(ar, "drl.distill");
  nn::Matrix widths(1, 2);
  widths << static_cast<double>(co_width_), static_cast<double>(text_width_);
  ar.put("drl.widths", widths);
  ar.put_text("drl.flags", cfg_.flags.name());
}

void DrlModel::load(const nn::TensorArchive& ar) {
  const nn::Matrix& widths = ar.get("drl.widths");
  if (widths(0, 0) != static_cast<double>(co_width_) || widths(0, 1) != static_cast<double>(text_width_))
    throw ParseError("DRL checkpoint was written for different entity widths");
  for (Parameter* p : parameters()) ar.restore(*p);
  Codebook book = load_codebook(ar, "drl.codebook");
  if (book.levels() != codebook_.levels() || book.dim() != codebook_.dim() ||
      book.codes(0) != codebook_.codes(0))
    throw ParseError("DRL checkpoint codebook shape differs from the configuration");
  codebook_ = std::move(book);
  distill_.load(ar, "drl.distill");
}

std::uint64_t DrlModel::checksum() const {
  nn::TensorArchive ar;
  save(ar);
  return ar.checksum();
}

Var commitment_loss(const Var& r_co, const Var& r_te, const Var& z, const Var& zt, double alpha) {
  const Var sz = nn::stop_gradient(z);
  const Var szt = nn::stop_gradient(zt);
  const Var own = nn::squared_norm(r_co - sz) + nn::squared_norm(r_te - szt);
  const Var cross = nn::squared_norm(r_co - szt) + nn::squared_norm(r_te - sz);
  return nn::scale(own, alpha) + nn::scale(cross, alpha / 2.0);
}

double LossBreakdown::sum_of_parts() const {
  return recon_co + recon_te + con_intra_co + con_inter_co + con_intra_te + con_inter_te + com;
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  recon_co += o.recon_co;
  recon_te += o.recon_te;
  con_intra_co += o.con_intra_co;
  con_inter_co += o.con_inter_co;
  con_intra_te += o.con_intra_te;
  con_inter_te += o.con_inter_te;
  com += o.com;
  total = sum_of_parts();
  return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const {
  LossBreakdown b = *this;
  b.recon_co *= s;
  b.recon_te *= s;
  b.con_intra_co *= s;
  b.con_inter_co *= s;
  b.con_intra_te *= s;
  b.con_inter_te *= s;
  b.com *= s;
  b.total = b.sum_of_parts();
  return b;
}

LossBreakdown BatchForward::breakdown() const {
  LossBreakdown b;
  b.recon_co = recon_co.scalar();
  b.recon_te = recon_te.scalar();
  b.con_intra_co = con_intra_co.scalar();
  b.con_inter_co = con_inter_co.scalar();
  b.con_intra_te = con_intra_te.scalar();
  b.con_inter_te = con_inter_te.scalar();
  b.com = com.scalar();
  b.total = total.scalar();
  return b;
}

nn::Matrix gather_table_rows(const nn::Matrix& table, const std::vector<int>& ids) {
  nn::Matrix out(static_cast<nn::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows())
      throw ContractError("entity id " + std::to_string(ids[i]) + " outside a table of " +
                          std::to_string(table.rows()) + " rows");
    out.row(static_cast<nn::Index>(i)) = table.row(ids[i]);
  }
  return out;
}

Var target_sums(Graph& g, DrlModel& model, Branch b, const nn::Matrix& table,
                const std::vector<const std::vector<int>*>& sets) {
  std::vector<int> all;
  for (const auto* s : sets) all.insert(all.end(), s->begin(), s->end());
  const Var enc = model.encode(g, b, g.constant(gather_table_rows(table, all)));
  std::vector<Var> rows;
  nn::Index off = 0;
  for (const auto* s : sets) {
    const auto n = static_cast<nn::Index>(s->size());
    rows.push_back(nn::sum_over_rows(nn::slice_rows(enc, off, n)));
    off += n;
  }
  return rows.size() == 1 ? rows.front() : nn::concat_rows(rows);
}

namespace {

Var select_rows(const Var& x, const std::vector<int>& rows) {
  if (static_cast<nn::Index>(rows.size()) == x.rows()) return x;
  return nn::gather_rows(x, rows);
}

}  // namespace

BatchForward forward_batch(Graph& g, DrlModel& model, const std::vector<DrlSample>& batch,
                           const EntityTables& co, const EntityTables& text, ehr::Task task,
                           const QuantizationPlan* frozen) {
  if (batch.empty()) throw ContractError("empty DRL batch");
  const DrlConfig& cfg = model.config();
  const auto n = static_cast<nn::Index>(batch.size());
  std::vector<int> diseases;
  for (const auto& s : batch) diseases.push_back(s.disease);

  const nn::Matrix e_co = gather_table_rows(co.diagnosis, diseases);
  const nn::Matrix e_te = gather_table_rows(text.diagnosis, diseases);
  const Var r_co = model.encode(g, Branch::co, g.constant(e_co));
  const Var r_te = model.encode(g, Branch::te, g.constant(e_te));

  BatchForward out;
  if (frozen) {
    out.plan = *frozen;
  } else {
    out.plan.co_offset.resize(n, cfg.dim);
    out.plan.te_offset.resize(n, cfg.dim);
    for (nn::Index i = 0; i < n; ++i) {
      out.plan.co.push_back(quantize_residual(r_co.value().row(i), model.codebook()));
      out.plan.te.push_back(quantize_residual(r_te.value().row(i), model.codebook()));
      out.plan.co_offset.row(i) = out.plan.co.back().z - r_co.value().row(i);
      out.plan.te_offset.row(i) = out.plan.te.back().z - r_te.value().row(i);
    }
  }
  nn::Matrix zq_co(n, cfg.dim), zq_te(n, cfg.dim);
  for (nn::Index i = 0; i < n; ++i) {
    zq_co.row(i) = out.plan.co.at(static_cast<std::size_t>(i)).z;
    zq_te.row(i) = out.plan.te.at(static_cast<std::size_t>(i)).z;
  }
  const Var zq_co_v = g.constant(zq_co);
  const Var zq_te_v = g.constant(zq_te);
  const Var z_co = frozen ? r_co + g.constant(out.plan.co_offset) : nn::straight_through(r_co, zq_co_v);
  const Var z_te = frozen ? r_te + g.constant(out.plan.te_offset) : nn::straight_through(r_te, zq_te_v);

  Var zc_co = z_co;
  Var zc_te = z_te;
  if (!cfg.flags.nco) {
    std::vector<Var> f_co, f_te;
    for (const auto& s : batch) {
      f_co.push_back(model.calibrator(Branch::co)
                         .condition(g, gather_table_rows(co.procedure, s.procedures),
                                    gather_table_rows(co.medication, s.medications)));
      f_te.push_back(model.calibrator(Branch::te)
                         .condition(g, gather_table_rows(text.procedure, s.procedures),
                                    gather_table_rows(text.medication, s.medications)));
    }
    const Var fc = f_co.size() == 1 ? f_co.front() : nn::concat_rows(f_co);
    const Var ft = f_te.size() == 1 ? f_te.front() : nn::concat_rows(f_te);
    zc_co = model.calibrator(Branch::co).calibrate(g, z_co, fc);
    zc_te = model.calibrator(Branch::te).calibrate(g, z_te, ft);
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  out.recon_co = nn::scale(nn::squared_norm(g.constant(e_co) - model.decode(g, Branch::co, zc_co)), inv_n);
  out.recon_te = nn::scale(nn::squared_norm(g.constant(e_te) - model.decode(g, Branch::te, zc_te)), inv_n);
  out.com = nn::scale(commitment_loss(r_co, r_te, zq_co_v, zq_te_v, cfg.alpha), inv_n);

  for (std::size_t i = 0; i < batch.size(); ++i)
    if (!batch[i].targets.empty()) out.contrastive_rows.push_back(static_cast<int>(i));
  const Var zero = g.constant(nn::Matrix::Zero(1, 1));
  out.con_intra_co = out.con_inter_co = out.con_intra_te = out.con_inter_te = zero;
  if (!out.contrastive_rows.empty() && !cfg.flags.nt) {
    std::vector<const std::vector<int>*> pos, neg;
    for (int r : out.contrastive_rows) {
      const auto& s = batch[static_cast<std::size_t>(r)];
      if (s.negatives.empty()) throw ContractError("sample with targets but no synthetic negative");
      pos.push_back(&s.targets);
      neg.push_back(&s.negatives);
    }
    const auto cls = ehr::target_class(task);
    ContrastiveBatch cb;
    cb.z = select_rows(zc_co, out.contrastive_rows);
    cb.zt = select_rows(zc_te, out.contrastive_rows);
    cb.s = target_sums(g, model, Branch::co, co.of(cls), pos);
    cb.st = target_sums(g, model, Branch::te, text.of(cls), pos);
    cb.s_neg = target_sums(g, model, Branch::co, co.of(cls), neg);
    cb.st_neg = target_sums(g, model, Branch::te, text.of(cls), neg);
    const ContrastiveTerms t = contrastive_losses(g, cb, g.param(model.contrastive_weight()), cfg.contrastive());
    out.con_intra_co = t.intra_co;
    out.con_inter_co = t.inter_co;
    out.con_intra_te = t.intra_te;
    out.con_inter_te = t.inter_te;
  }
  out.total = out.recon_co + out.recon_te + out.con_intra_co + out.con_inter_co + out.con_intra_te +
              out.con_inter_te + out.com;

  const bool post = cfg.ema_post_calibration;
  for (nn::Index i = 0; i < n; ++i) {
    EmaSample e;
    e.co = out.plan.co.at(static_cast<std::size_t>(i));
    e.te = out.plan.te.at(static_cast<std::size_t>(i));
    e.z_co = post ? nn::RowVector(zc_co.value().row(i)) : e.co.z;
    e.z_te = post ? nn::RowVector(zc_te.value().row(i)) : e.te.z;
    out.ema.push_back(std::move(e));
  }
  return out;
}

}  // namespace udc::drl
