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

#include "udc/pipeline/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "udc/ehr/io.hpp"
#include "udc/eval/diagnostics.hpp"

namespace udc::pipeline {

namespace {

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string short_num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string primary_group_metric(const RunConfig& cfg) {
  return cfg.task == ehr::Task::diagnosis_prediction ? "acc@" + std::to_string(cfg.primary_k) : "jaccard";
}

// Columns of the DRL training log stored in the checkpoint.
const std::vector<std::string> kLogColumns = {
    "epoch",        "recon_co",     "recon_te",    "con_intra_co", "con_inter_co",
    "con_intra_te", "con_inter_te", "com",         "total",        "utilization",
    "cosine",       "probe_recon",  "skipped_targets"};

nn::Matrix log_matrix(const drl::DrlTrainResult& r) {
  nn::Matrix m(static_cast<nn::Index>(r.epochs.size()), static_cast<nn::Index>(kLogColumns.size()));
  for (std::size_t i = 0; i < r.epochs.size(); ++i) {
    const auto& e = r.epochs[i];
    m.row(static_cast<nn::Index>(i)) << e.epoch, e.loss.recon_co, e.loss.recon_te, e.loss.con_intra_co,
        e.loss.con_inter_co, e.loss.con_intra_te, e.loss.con_inter_te, e.loss.com, e.loss.total,
        e.utilization, e.cosine, e.probe_recon, static_cast<double>(e.skipped_targets);
  }
  return m;
}

std::uint64_t pcm_disease_checksum(const pcm::PcmModel& m) {
  return nn::checksum(m.embeddings().diagnosis.value);
}

}  // namespace

RunPaths::RunPaths(fs::path run_dir)
    : dir(std::move(run_dir)), stage1(dir / "stage1.ckpt"), data(dir / "data") {}

void generate_data(const RunConfig& cfg, const fs::path& dir) {
  const RunConfig c = cfg.resolved();
  const ehr::SyntheticCorpus corpus = ehr::generate_synthetic(c.synthetic);
  fs::create_directories(dir);
  ehr::save_vocabs(dir, corpus.vocabs);
  ehr::save_dataset(dir / "patients.jsonl", corpus.patients);
  const auto text = textemb::synthesize_text_embeddings(corpus, c.text_noise, ehr::mix_seed(c.seed, 5), c.text_dim);
  textemb::save_text_embeddings(dir, text);
}

Workspace load_workspace(const RunConfig& cfg, const fs::path& data_dir) {
  const RunConfig c = cfg.resolved();
  Workspace ws;
  if (!fs::exists(data_dir / "patients.jsonl"))
    throw StageError("no data under " + data_dir.string() + "; run gen-data first");
  ws.vocabs = ehr::load_vocabs(data_dir);
  ws.patients = ehr::load_dataset(data_dir / "patients.jsonl", ws.vocabs);
  ws.text = textemb::load_text_embeddings(data_dir, ws.vocabs);
  ws.split = ehr::split_patients(ws.patients, c.split, ehr::mix_seed(c.seed, 4));
  ws.rarity = ehr::split_rarity(ws.split.train, ws.vocabs.diagnosis.size, c.eta, c.rarity_mode);
  return ws;
}

drl::EntityTables co_tables(const pcm::PcmModel& model) {
  const auto& e = model.embeddings();
  return {e.diagnosis.value, e.procedure.value, e.medication.value};
}

drl::EntityTables text_tables(const textemb::TextEmbeddings& text) {
  return {text.diagnosis(), text.procedure(), text.medication()};
}

Pipeline::Pipeline(RunConfig cfg, RunPaths paths, bool resume, LogFn log)
    : cfg_(cfg.resolved()), paths_(std::move(paths)), resume_(resume), log_(std::move(log)) {
  cfg_.validate();
  if (cfg_.source == DataSource::files) paths_.data = cfg_.data_dir;
}

void Pipeline::note(const std::string& msg) const {
  fs::create_directories(paths_.dir);
  std::ofstream(paths_.log(), std::ios::app) << msg << '\n';
  if (log_) log_(msg);
}

void Pipeline::write_config() const {
  eval::write_text(paths_.config(), cfg_.to_text());
}

Workspace& Pipeline::workspace() {
  if (!ws_) ws_ = load_workspace(cfg_, paths_.data);
  return *ws_;
}

pcm::PcmModel Pipeline::fresh_pcm() {
  return pcm::PcmModel(cfg_.pcm, workspace().vocabs, cfg_.task, cfg_.pretrain.seed);
}

drl::DrlModel Pipeline::fresh_drl() {
  return drl::DrlModel(cfg_.drl, cfg_.pcm.dim, workspace().text.dim());
}

pcm::PcmModel Pipeline::load_stage1() {
  if (!fs::exists(paths_.stage1))
    throw StageError("missing stage-1 checkpoint " + paths_.stage1.string() + "; run pretrain first");
  pcm::PcmModel m = fresh_pcm();
  m.load(nn::TensorArchive::load(paths_.stage1));
  return m;
}

drl::DrlModel Pipeline::load_drl() {
  if (!fs::exists(paths_.drl()))
    throw StageError("missing DRL checkpoint " + paths_.drl().string() + "; run train-drl first");
  drl::DrlModel m = fresh_drl();
  m.load(nn::TensorArchive::load(paths_.drl()));
  return m;
}

pcm::PcmModel Pipeline::load_stage3() {
  if (!fs::exists(paths_.stage3()))
    throw StageError("missing fine-tuned checkpoint " + paths_.stage3().string() + "; run finetune first");
  pcm::PcmModel m = fresh_pcm();
  m.load(nn::TensorArchive::load(paths_.stage3()));
  return m;
}

StageStatus Pipeline::gen_data() {
  StageStatus st;
  if (cfg_.source == DataSource::files) return st;
  if (resume_ && fs::exists(paths_.data / "patients.jsonl")) return st;
  Timer t;
  write_config();
  generate_data(cfg_, paths_.data);
  ws_.reset();
  st.ran = true;
  st.seconds = t.seconds();
  note("gen-data: " + short_num(st.seconds) + " s");
  return st;
}

StageStatus Pipeline::pretrain() {
  StageStatus st;
  if (resume_ && fs::exists(paths_.stage1)) return st;
  Timer t;
  write_config();
  auto& ws = workspace();
  pcm::PcmModel model = fresh_pcm();
  const auto res = pcm::pretrain(model, ws.split.train, ws.split.val, cfg_.pretrain,
                                 [this](const std::string& m) { note(m); });
  nn::TensorArchive ar;
  model.save(ar);
  nn::Matrix curve(2, static_cast<nn::Index>(res.val_loss.size()));
  for (std::size_t i = 0; i < res.val_loss.size(); ++i) {
    curve(0, static_cast<nn::Index>(i)) = i < res.train_loss.size() + 1 && i > 0 ? res.train_loss[i - 1] : 0.0;
    curve(1, static_cast<nn::Index>(i)) = res.val_loss[i];
  }
  if (curve.cols() > 0) ar.put("stage1.curve", curve);
  fs::create_directories(paths_.stage1.parent_path());
  ar.save(paths_.stage1);
  st.ran = true;
  st.seconds = t.seconds();
  note("pretrain: best epoch " + std::to_string(res.best_epoch) + ", " + short_num(st.seconds) + " s");
  return st;
}

StageStatus Pipeline::train_drl() {
  StageStatus st;
  if (resume_ && fs::exists(paths_.drl())) return st;
  Timer t;
  write_config();
  auto& ws = workspace();
  const pcm::PcmModel stage1 = load_stage1();
  const auto co = co_tables(stage1);
  const auto text = text_tables(ws.text);
  const std::uint64_t ed_before = nn::checksum(co.diagnosis);
  const std::uint64_t text_before = ws.text.checksum();

  drl::DrlModel model = fresh_drl();
  const auto res = drl::train_drl(model, co, text, ws.split.train, ws.rarity, ws.vocabs, cfg_.task,
                                  [this](const std::string& m) { note(m); });

  nn::TensorArchive ar;
  model.save(ar);
  ar.put("drl.log", log_matrix(res));
  ar.put("drl.calibration_calls", nn::Matrix::Constant(1, 1, static_cast<double>(model.calibration_calls())));
  ar.save(paths_.drl());

  const pcm::PcmModel reread = load_stage1();
  Json freeze;
  if (fs::exists(paths_.freeze())) freeze = Json::parse(eval::read_text(paths_.freeze()));
  freeze["stage2"] = {{"E_D_before", ed_before},
                      {"E_D_after", pcm_disease_checksum(reread)},
                      {"text_before", text_before},
                      {"text_after", ws.text.checksum()}};
  eval::write_text(paths_.freeze(), freeze.dump(2) + "\n");
  st.ran = true;
  st.seconds = t.seconds();
  note("train-drl: " + short_num(st.seconds) + " s");
  return st;
}

StageStatus Pipeline::finetune() {
  StageStatus st;
  if (resume_ && fs::exists(paths_.stage3())) return st;
  Timer t;
  write_config();
  auto& ws = workspace();
  pcm::PcmModel model = load_stage1();
  drl::DrlModel drl_model = load_drl();
  const std::uint64_t ed_before = pcm_disease_checksum(model);
  const std::uint64_t drl_before = drl_model.checksum();

  const nn::Matrix substituted =
      drl::substitute_embeddings(drl_model, co_tables(model), text_tables(ws.text), ws.rarity, ws.split.train);
  if (cfg_.no_finetune) {
    model.set_disease_override(substituted);
  } else {
    pcm::finetune(model, substituted, ws.split.train, ws.split.val, cfg_.finetune,
                  [this](const std::string& m) { note(m); });
  }
  nn::TensorArchive ar;
  model.save(ar);
  ar.save(paths_.stage3());

  Json freeze;
  if (fs::exists(paths_.freeze())) freeze = Json::parse(eval::read_text(paths_.freeze()));
  freeze["stage3"] = {{"E_D_before", ed_before},
                      {"E_D_after", pcm_disease_checksum(model)},
                      {"drl_before", drl_before},
                      {"drl_after", drl_model.checksum()}};
  eval::write_text(paths_.freeze(), freeze.dump(2) + "\n");
  st.ran = true;
  st.seconds = t.seconds();
  note("finetune: " + short_num(st.seconds) + " s");
  return st;
}

Json Pipeline::evaluate() {
  Timer t;
  auto& ws = workspace();
  pcm::PcmModel base = load_stage1();
  pcm::PcmModel tuned = load_stage3();
  drl::DrlModel drl_model = load_drl();
  const nn::TensorArchive drl_ar = nn::TensorArchive::load(paths_.drl());

  Json out;
  out["task"] = ehr::to_string(cfg_.task);
  out["seed"] = cfg_.seed;
  out["variant"] = cfg_.drl.flags.name();
  out["finetuned"] = !cfg_.no_finetune;

  std::string csv = "model,scope,group,metric,value,support\n";
  const std::string g1 = primary_group_metric(cfg_);
  double g1_values[2] = {0.0, 0.0};
  int idx = 0;
  for (auto* m : {&base, &tuned}) {
    const std::string name = idx == 0 ? "baseline" : "udc";
    const pcm::Predictions p = pcm::predict_dataset(*m, ws.split.test);
    std::vector<std::pair<int, int>> refs;
    for (const auto& s : p.samples) refs.emplace_back(s.patient, s.visit);
    const eval::MetricsReport rep = eval::evaluate(p.scores, p.targets, cfg_.task, cfg_.ks, cfg_.threshold);
    const eval::GroupReport grp = eval::group_analysis(p.scores, p.targets, refs, ws.split.test,
                                                       ws.rarity.counts, cfg_.task, cfg_.ks, cfg_.threshold);
    out[name] = {{"overall", eval::to_json(rep)}, {"groups", eval::to_json(grp)}};
    g1_values[idx] = grp.groups.front().values.at(g1);
    std::stringstream lines(eval::metrics_csv(rep, grp));
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) csv += name + "," + line + "\n";
    ++idx;
  }
  out["g1"] = {{"metric", g1}, {"baseline", g1_values[0]}, {"udc", g1_values[1]},
               {"lift", g1_values[1] - g1_values[0]}};

  const nn::Matrix& log = drl_ar.get("drl.log");
  const auto col = [&](const std::string& c) {
    return static_cast<nn::Index>(std::find(kLogColumns.begin(), kLogColumns.end(), c) - kLogColumns.begin());
  };
  const nn::Index last = log.rows() - 1;
  const double con_final = log(last, col("con_intra_co")) + log(last, col("con_inter_co")) +
                           log(last, col("con_intra_te")) + log(last, col("con_inter_te"));
  double con_max = 0.0;
  for (nn::Index r = 1; r < log.rows(); ++r)
    for (const char* c : {"con_intra_co", "con_inter_co", "con_intra_te", "con_inter_te"})
      con_max = std::max(con_max, std::abs(log(r, col(c))));
  std::vector<int> all(static_cast<std::size_t>(ws.vocabs.diagnosis.size));
  for (std::size_t d = 0; d < all.size(); ++d) all[d] = static_cast<int>(d);
  const auto diag = eval::codebook_diagnostics(drl_model, co_tables(base), text_tables(ws.text), all);
  out["drl"] = {
      {"epochs", last},
      {"initial_recon", log(0, col("probe_recon"))},
      {"final_recon", log(last, col("probe_recon"))},
      {"recon_ratio", log(last, col("probe_recon")) / log(0, col("probe_recon"))},
      {"cosine_epoch1", log.rows() > 1 ? log(1, col("cosine")) : log(0, col("cosine"))},
      {"cosine_final", log(last, col("cosine"))},
      {"l_con_final", con_final},
      {"l_con_max_abs", con_max},
      {"calibration_calls", drl_ar.get("drl.calibration_calls")(0, 0)},
      {"common_diseases", ws.rarity.common.size()},
      {"rare_diseases", ws.rarity.rare.size()},
  };
  out["codebook"] = eval::to_json(diag);

  eval::write_text(paths_.metrics_json(), out.dump(2) + "\n");
  eval::write_text(paths_.metrics_csv(), csv);

  std::string log_csv;
  for (std::size_t c = 0; c < kLogColumns.size(); ++c) log_csv += (c ? "," : "") + kLogColumns[c];
  log_csv += "\n";
  for (nn::Index r = 0; r < log.rows(); ++r) {
    for (nn::Index c = 0; c < log.cols(); ++c) log_csv += (c ? "," : "") + num(log(r, c));
    log_csv += "\n";
  }
  eval::write_text(paths_.drl_log(), log_csv);
  eval::write_text(paths_.codebook_csv(), codebook_csv(drl_model, co_tables(base), text_tables(ws.text)));
  note("eval: " + short_num(t.seconds()) + " s; G1 " + g1 + " baseline " + short_num(g1_values[0]) +
       " udc " + short_num(g1_values[1]));
  return out;
}

Json Pipeline::run_all() {
  gen_data();
  pretrain();
  train_drl();
  finetune();
  return evaluate();
}

std::string codebook_csv(drl::DrlModel& model, const drl::EntityTables& co, const drl::EntityTables& text) {
  std::vector<int> all(static_cast<std::size_t>(co.diagnosis.rows()));
  for (std::size_t d = 0; d < all.size(); ++d) all[d] = static_cast<int>(d);
  const auto diag = eval::codebook_diagnostics(model, co, text, all);
  const drl::Codebook& book = model.codebook();
  std::string out = "level,code,usage";
  for (nn::Index j = 0; j < book.dim(); ++j) out += ",v" + std::to_string(j);
  out += "\n";
  for (int l = 0; l < book.levels(); ++l)
    for (int i = 0; i < book.codes(l); ++i) {
      out += std::to_string(l) + "," + std::to_string(i) + "," +
             std::to_string(diag.levels[static_cast<std::size_t>(l)].usage[static_cast<std::size_t>(i)]);
      for (nn::Index j = 0; j < book.dim(); ++j) out += "," + num(book.level(l)(i, j));
      out += "\n";
    }
  return out;
}

std::string dump_embeddings(const RunConfig& cfg, const RunPaths& paths, const std::string& which) {
  Pipeline p(cfg, paths, true);
  auto& ws = p.workspace();
  const pcm::PcmModel base = p.load_stage1();
  nn::Matrix table;
  if (which == "original") {
    table = base.embeddings().diagnosis.value;
  } else if (which == "substituted") {
    const pcm::PcmModel tuned = p.load_stage3();
    if (!tuned.disease_override()) throw StageError("fine-tuned checkpoint holds no substituted table");
    table = *tuned.disease_override();
  } else if (which == "quantized") {
    drl::DrlModel m = p.load_drl();
    const auto co = co_tables(base);
    const auto text = text_tables(ws.text);
    table.resize(co.diagnosis.rows(), m.config().dim);
    for (nn::Index d = 0; d < table.rows(); ++d) {
      const bool rare = ws.rarity.rare_disease(static_cast<int>(d));
      const nn::RowVector r0 = m.encode_values(rare ? drl::Branch::te : drl::Branch::co,
                                               (rare ? text.diagnosis : co.diagnosis).row(d));
      table.row(d) = drl::quantize_residual(r0, m.codebook()).z;
    }
  } else {
    throw ConfigError("unknown dump kind '" + which + "' (expected original|substituted|quantized)");
  }
  std::string out = "id,rarity";
  for (nn::Index j = 0; j < table.cols(); ++j) out += ",v" + std::to_string(j);
  out += "\n";
  for (nn::Index d = 0; d < table.rows(); ++d) {
    out += std::to_string(d) + (ws.rarity.rare_disease(static_cast<int>(d)) ? ",rare" : ",common");
    for (nn::Index j = 0; j < table.cols(); ++j) out += "," + num(table(d, j));
    out += "\n";
  }
  return out;
}

namespace {

RunPaths shared_paths(const fs::path& dir, const fs::path& shared, const std::string& name) {
  RunPaths p(dir / name);
  p.stage1 = shared / "stage1.ckpt";
  p.data = shared / "data";
  return p;
}

std::map<std::string, double> summary_values(const Json& m) {
  std::map<std::string, double> v;
  for (const auto& [k, x] : m["udc"]["overall"]["metrics"].items())
    if (x.is_number()) v[k] = x.get<double>();
  v["g1_" + m["g1"]["metric"].get<std::string>()] = m["g1"]["udc"].get<double>();
  v["g1_baseline"] = m["g1"]["baseline"].get<double>();
  v["l_con_final"] = m["drl"]["l_con_final"].get<double>();
  v["l_con_max_abs"] = m["drl"]["l_con_max_abs"].get<double>();
  v["calibration_calls"] = m["drl"]["calibration_calls"].get<double>();
  return v;
}

}  // namespace

std::vector<AblationRow> run_ablation(const RunConfig& base, const fs::path& dir, bool resume, const LogFn& log) {
  const fs::path shared = dir / "shared";
  Pipeline root(base, shared_paths(dir, shared, "shared"), resume, log);
  root.gen_data();
  root.pretrain();
  const std::uint64_t stage1_sum = nn::fnv1a_file(shared / "stage1.ckpt");

  std::vector<AblationRow> rows;
  for (const char* variant : {"none", "NCO", "NT", "NM", "NS", "NCD"}) {
    RunConfig cfg = base;
    cfg.drl.flags = drl::AblationFlags::parse(variant);
    AblationRow row;
    row.variant = cfg.drl.flags.name();
    try {
      Pipeline p(cfg, shared_paths(dir, shared, row.variant), resume, log);
      p.train_drl();
      p.finetune();
      row.values = summary_values(p.evaluate());
      row.values["stage1_checksum_matches"] = nn::fnv1a_file(shared / "stage1.ckpt") == stage1_sum ? 1.0 : 0.0;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
      if (log) log("ablation variant " + row.variant + " failed: " + row.error);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::vector<std::string> cols;
  for (const auto& r : rows)
    for (const auto& [k, v] : r.values)
      if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
  std::sort(cols.begin(), cols.end());
  std::string out = "variant,status";
  for (const auto& c : cols) out += "," + c;
  out += "\n";
  for (const auto& r : rows) {
    out += r.variant + (r.ok ? ",ok" : ",failed");
    for (const auto& c : cols) {
      const auto it = r.values.find(c);
      out += "," + (it == r.values.end() ? std::string() : num(it->second));
    }
    out += "\n";
  }
  return out;
}

std::string run_sweep(const RunConfig& base, const fs::path& dir, const std::string& parameter,
                      const std::vector<std::string>& values, bool resume, const LogFn& log) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const fs::path shared = dir / "shared";
  std::string out;
  if (parameter == "K") {
    std::vector<int> ks;
    for (const auto& v : values) {
      try {
        const int k = std::stoi(v);
        if (k < 1) throw std::invalid_argument(v);
        ks.push_back(k);
      } catch (const std::exception&) {
        if (log) log("sweep: skipping invalid K '" + v + "'");
      }
    }
    if (ks.empty()) throw ConfigError("no valid K values");
    Pipeline p(base, shared_paths(dir, shared, "shared"), resume, log);
    p.run_all();
    auto& ws = p.workspace();
    out = "K,model,acc,pres,g1_acc\n";
    pcm::PcmModel b = p.load_stage1();
    pcm::PcmModel t = p.load_stage3();
    for (auto [name, m] : {std::pair<const char*, pcm::PcmModel*>{"baseline", &b}, {"udc", &t}}) {
      const auto pred = pcm::predict_dataset(*m, ws.split.test);
      std::vector<std::pair<int, int>> refs;
      for (const auto& s : pred.samples) refs.emplace_back(s.patient, s.visit);
      const auto rep = eval::evaluate(pred.scores, pred.targets, p.config().task, ks, p.config().threshold);
      const auto grp = eval::group_analysis(pred.scores, pred.targets, refs, ws.split.test, ws.rarity.counts,
                                            p.config().task, ks, p.config().threshold);
      for (int k : ks)
        out += std::to_string(k) + "," + name + "," + num(rep.acc(k)) + "," + num(rep.pres(k)) + "," +
               num(grp.groups.front().values.at("acc@" + std::to_string(k))) + "\n";
    }
    return out;
  }

  const std::string key = parameter == "codebook_size" ? "drl.codes"
                          : parameter == "alpha"       ? "drl.alpha"
                          : parameter == "eta"         ? "eta"
                                                       : "";
  if (key.empty()) throw ConfigError("unknown sweep parameter '" + parameter + "' (expected K|codebook_size|alpha|eta)");
  Pipeline root(base, shared_paths(dir, shared, "shared"), resume, log);
  root.gen_data();
  root.pretrain();
  std::vector<std::pair<std::string, std::map<std::string, double>>> rows;
  for (const auto& v : values) {
    RunConfig cfg = base;
    try {
      apply_setting(cfg, key, v);
      Pipeline p(cfg, shared_paths(dir, shared, parameter + "_" + v), resume, log);
      p.train_drl();
      p.finetune();
      rows.emplace_back(v, summary_values(p.evaluate()));
    } catch (const ConfigError& e) {
      if (log) log("sweep: skipping " + parameter + "=" + v + ": " + e.what());
    }
  }
  std::vector<std::string> cols;
  for (const auto& [v, m] : rows)
    for (const auto& [k, x] : m)
      if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
  std::sort(cols.begin(), cols.end());
  out = parameter;
  for (const auto& c : cols) out += "," + c;
  out += "\n";
  for (const auto& [v, m] : rows) {
    out += v;
    for (const auto& c : cols) {
      const auto it = m.find(c);
      out += "," + (it == m.end() ? std::string() : num(it->second));
    }
    out += "\n";
  }
  return out;
}

}  // namespace udc::pipeline
