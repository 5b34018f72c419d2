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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Arguments select a subset, e.g.
// `udc_acceptance 1 2 4`.

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>

#include "drl_fixtures.hpp"
#include "oracles.hpp"
#include "udc/pipeline/pipeline.hpp"

using namespace udc;
using nn::Matrix;
using nn::RowVector;
using pipeline::Json;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

fs::path output_root() {
  const char* env = std::getenv("UDC_ACCEPTANCE_ROOT");
  return env && *env ? fs::path(env) : fs::temp_directory_path() / "udc_acceptance";
}

// ---- 1: set metrics against the worked example --------------------------------

Verdict table_metrics() {
  const auto a = eval::set_metrics_from_counts(9, 1, 3);
  const auto b = eval::set_metrics_from_counts(9, 3, 3);
  const bool ok = std::abs(a.jaccard - 0.6923) < 1e-4 && std::abs(a.f1 - 0.8181) < 1e-4 &&
                  std::abs(b.jaccard - 0.6000) < 1e-4 && std::abs(b.f1 - 0.7500) < 1e-4;
  return {ok, "jaccard " + fmt(a.jaccard) + "/" + fmt(b.jaccard) + ", f1 " + fmt(a.f1) + "/" + fmt(b.f1)};
}

// ---- 2: quantizer against exhaustive search ---------------------------------------

Verdict quantizer() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  int index_mismatches = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    drl::Codebook book(2, 8, 6);
    for (int l = 0; l < 2; ++l) book.level(l) = oracle::random_matrix(8, 6, rng, l == 0 ? 1.0 : 0.5);
    const RowVector r0 = oracle::random_matrix(1, 6, rng);
    const auto q = drl::quantize_residual(r0, book);
    std::vector<double> r(r0.data(), r0.data() + 6);
    RowVector sum = RowVector::Zero(6);
    for (int l = 0; l < 2; ++l) {
      const int want = oracle::nearest(r, book.level(l));
      index_mismatches += q.indices[static_cast<std::size_t>(l)] != want;
      for (int j = 0; j < 6; ++j) r[static_cast<std::size_t>(j)] -= book.level(l)(want, j);
      sum += book.level(l).row(q.indices[static_cast<std::size_t>(l)]);
    }
    worst = std::max(worst, (r0 - (sum + q.final_residual())).cwiseAbs().maxCoeff());
  }
  const double s = seconds_since(t0);
  return {index_mismatches == 0 && worst <= 1e-12 && s < 5.0,
          std::to_string(index_mismatches) + " index mismatches, max |r0 - sum c - rL| " + fmt(worst) + ", " +
              fmt(s, 3) + " s"};
}

// ---- 3: gradients ---------------------------------------------------------------

Verdict gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, double>> worst;

  // BCE through the predictor.
  {
    ehr::Vocabs v;
    v.diagnosis.size = 5;
    v.procedure.size = 4;
    v.medication.size = 3;
    const ehr::PatientRecord rec{
        "a", {ehr::Visit{{0, 2}, {1}, {0, 2}}, ehr::Visit{{1, 3}, {0, 3}, {1}}, ehr::Visit{{4}, {2}, {2}}}};
    std::mt19937_64 rng(3);
    double w = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      pcm::PcmConfig c;
      c.dim = 8;
      c.heads = 2;
      c.layers = 1;
      c.max_positions = 6;
      c.encoder = static_cast<pcm::EncoderKind>(trial % 3);
      const ehr::Task task = trial % 2 ? ehr::Task::medication_recommendation : ehr::Task::diagnosis_prediction;
      pcm::PcmModel m(c, v, task, static_cast<std::uint64_t>(trial) + 500);
      const Matrix y = ehr::multi_hot(ehr::extract_targets(rec, 2, task), m.output_size());
      const auto params = m.parameters();
      for (auto* p : params) p->zero_grad();
      {
        nn::Graph g;
        g.backward(pcm::bce_loss(m.forward_sample(g, rec, 2), y));
      }
      const auto r = oracle::finite_difference(params, [&] {
        nn::Graph g(false);
        return pcm::bce_loss(m.forward_sample(g, rec, 2), y).scalar();
      }, rng, 16);
      w = std::max(w, r.relative_error);
    }
    worst.emplace_back("bce", w);
  }

  for (const auto& [term, name] : fixture::terms()) {
    double w = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto r = fixture::term_gradient_check(term, 7000 + seed);
      w = std::max(w, r.analytic_norm > 0.0 ? r.relative_error : 1.0);
    }
    worst.emplace_back(name, w);
  }

  // Codes enter the commitment loss only behind stop-gradient.
  std::mt19937_64 rng(4);
  double code_grad = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    nn::Parameter rc("rc", oracle::random_matrix(3, 4, rng)), rt("rt", oracle::random_matrix(3, 4, rng));
    nn::Parameter z("z", oracle::random_matrix(3, 4, rng)), zt("zt", oracle::random_matrix(3, 4, rng));
    nn::Graph g;
    g.backward(drl::commitment_loss(g.param(rc), g.param(rt), g.param(z), g.param(zt), 0.25));
    code_grad = std::max({code_grad, z.grad.cwiseAbs().maxCoeff(), zt.grad.cwiseAbs().maxCoeff()});
  }
  drl::DrlModel probe(fixture::small_drl_config(1), 3, 5);
  bool codebook_outside = true;
  for (auto* p : probe.parameters())
    for (int l = 0; l < probe.codebook().levels(); ++l)
      codebook_outside = codebook_outside && p->value.data() != probe.codebook().level(l).data();

  const double s = seconds_since(t0);
  bool ok = code_grad == 0.0 && codebook_outside && s < 60.0;
  std::string detail;
  for (const auto& [name, w] : worst) {
    ok = ok && w < 1e-4;
    detail += name + " " + fmt(w, 2) + ", ";
  }
  return {ok, detail + "code grad " + fmt(code_grad) + ", " + fmt(s, 3) + " s"};
}

// ---- 4: EMA -----------------------------------------------------------------

drl::QuantizationResult assigned(const RowVector& x) {
  drl::QuantizationResult q;
  q.indices = {0};
  q.residuals = {x};
  q.z = x;
  return q;
}

RowVector cross_view(const RowVector& q, const Matrix& kv) {
  RowVector out(q.size());
  for (int h = 0; h < 2; ++h) {
    const auto half = q.size() / 2;
    const auto o = oracle::attention_row(std::vector<double>(q.data() + h * half, q.data() + (h + 1) * half),
                                         kv.middleCols(h * half, half), kv.middleCols(h * half, half));
    for (nn::Index j = 0; j < half; ++j) out(h * half + j) = o[static_cast<std::size_t>(j)];
  }
  return out;
}

Verdict ema() {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  bool fixed = true;
  for (auto mode : {drl::NormalizerMode::count, drl::NormalizerMode::literal}) {
    // kappa = 1 leaves book and state untouched.
    drl::Codebook book(2, 3, 4);
    for (int l = 0; l < 2; ++l) book.level(l) = oracle::random_matrix(3, 4, rng);
    auto st = drl::DistillState::from_codebook(book, 1);
    std::vector<drl::EmaSample> batch;
    for (int i = 0; i < 4; ++i) {
      drl::EmaSample e;
      e.co = drl::quantize_residual(oracle::random_matrix(1, 4, rng), book);
      e.te = drl::quantize_residual(oracle::random_matrix(1, 4, rng), book);
      e.z_co = e.co.z;
      e.z_te = e.te.z;
      batch.push_back(e);
    }
    drl::DistillConfig cfg;
    cfg.kappa = 1.0;
    cfg.normalizer = mode;
    cfg.attention_heads = 2;
    const drl::Codebook before = book;
    for (int step = 0; step < 3; ++step) drl::codebook_ema_update(book, st, batch, cfg);
    for (int l = 0; l < 2; ++l) fixed = fixed && book.level(l) == before.level(l);

    // Two steps at kappa = 0.5 with one code and known assignments.
    const Matrix X = oracle::random_matrix(2, 4, rng), Y = oracle::random_matrix(2, 4, rng);
    const RowVector c0 = oracle::random_matrix(1, 4, rng);
    RowVector pull = RowVector::Zero(4), vec = RowVector::Zero(4);
    for (int i = 0; i < 2; ++i) {
      pull += 0.5 * (X.row(i) + cross_view(X.row(i), Y)) + 0.5 * (Y.row(i) + cross_view(Y.row(i), X));
      vec += X.row(i) + Y.row(i);
    }
    drl::Codebook one(1, 1, 4);
    one.level(0).row(0) = c0;
    auto s1 = drl::DistillState::from_codebook(one, 2);
    const std::vector<drl::EmaSample> pair{{assigned(X.row(0)), assigned(Y.row(0)), X.row(0), Y.row(0)},
                                           {assigned(X.row(1)), assigned(Y.row(1)), X.row(1), Y.row(1)}};
    cfg.kappa = 0.5;
    drl::codebook_ema_update(one, s1, pair, cfg);
    drl::codebook_ema_update(one, s1, pair, cfg);
    const RowVector o2 = 0.5 * (0.5 * c0 + 0.5 * pull) + 0.5 * pull;
    RowVector expected;
    if (mode == drl::NormalizerMode::count) {
      expected = o2 / (0.5 * (0.5 + 0.5 * 4.0) + 0.5 * 4.0);
    } else {
      const RowVector ones = RowVector::Ones(4);
      expected = o2.cwiseQuotient(0.5 * (0.5 * ones + 0.5 * vec) + 0.5 * vec);
    }
    worst = std::max(worst, (one.level(0).row(0) - expected).cwiseAbs().maxCoeff());
  }
  return {fixed && worst <= 1e-12,
          std::string("kappa=1 fixed point ") + (fixed ? "exact" : "violated") + ", recurrence max error " +
              fmt(worst)};
}

// ---- pipeline-backed criteria ------------------------------------------------

struct RunRecord {
  std::string task;
  int seed = 0;
  fs::path dir;
  double seconds = 0.0;
  Json metrics;
  bool freeze_ok = false;
  std::string error;
};

/// Runs every stage separately so that checkpoint files can be hashed
/// between stages.
RunRecord run_desk(ehr::Task task, int seed, const fs::path& dir) {
  RunRecord r;
  r.task = ehr::to_string(task);
  r.seed = seed;
  r.dir = dir;
  pipeline::RunConfig cfg = pipeline::desk_preset();
  cfg.task = task;
  cfg.seed = static_cast<std::uint64_t>(seed);
  fs::remove_all(dir);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    pipeline::Pipeline p(cfg, pipeline::RunPaths(dir), false);
    p.gen_data();
    p.pretrain();
    const pipeline::RunPaths& paths = p.paths();
    const auto stage1 = nn::fnv1a_file(paths.stage1);
    std::vector<std::uint64_t> text;
    for (const auto& e : fs::directory_iterator(paths.data))
      if (e.path().extension() == ".emb") text.push_back(nn::fnv1a_file(e.path()));
    std::sort(text.begin(), text.end());
    p.train_drl();
    const auto drl_file = nn::fnv1a_file(paths.drl());
    const auto drl_params = p.load_drl().checksum();
    p.finetune();
    r.metrics = p.evaluate();
    r.seconds = seconds_since(t0);

    std::vector<std::uint64_t> text_after;
    for (const auto& e : fs::directory_iterator(paths.data))
      if (e.path().extension() == ".emb") text_after.push_back(nn::fnv1a_file(e.path()));
    std::sort(text_after.begin(), text_after.end());
    const Json freeze = Json::parse(eval::read_text(paths.freeze()));
    const auto& s2 = freeze.at("stage2");
    const auto& s3 = freeze.at("stage3");
    r.freeze_ok = stage1 == nn::fnv1a_file(paths.stage1) && text == text_after && !text.empty() &&
                  drl_file == nn::fnv1a_file(paths.drl()) && drl_params == p.load_drl().checksum() &&
                  s2.at("E_D_before") == s2.at("E_D_after") && s2.at("text_before") == s2.at("text_after") &&
                  s3.at("E_D_before") == s3.at("E_D_after") && s3.at("drl_before") == s3.at("drl_after");
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

Verdict freeze(const std::vector<RunRecord>& runs) {
  int ok = 0;
  for (const auto& r : runs) ok += r.error.empty() && r.freeze_ok;
  return {ok == static_cast<int>(runs.size()),
          std::to_string(ok) + "/" + std::to_string(runs.size()) + " runs kept stage-1 tables, text tables and DRL "
                                                                  "parameters unchanged"};
}

Verdict lift(const std::vector<RunRecord>& runs) {
  bool ok = true;
  std::string detail;
  for (const char* task : {"diag", "med"}) {
    int wins = 0, n = 0, fast = 0, recon = 0;
    std::string seeds;
    for (const auto& r : runs) {
      if (r.task != task) continue;
      ++n;
      if (!r.error.empty()) {
        seeds += " s" + std::to_string(r.seed) + ":error(" + r.error + ")";
        continue;
      }
      const auto& g = r.metrics.at("g1");
      const double base = g.at("baseline").get<double>(), udc = g.at("udc").get<double>();
      const double ratio = r.metrics.at("drl").at("recon_ratio").get<double>();
      wins += udc > base;
      fast += r.seconds < 600.0;
      recon += ratio <= 0.5;
      seeds += " s" + std::to_string(r.seed) + ":" + fmt(base, 3) + "->" + fmt(udc, 3) + "(recon " + fmt(ratio, 2) +
               ", " + fmt(r.seconds, 3) + "s)";
    }
    ok = ok && n == 5 && wins >= 4 && fast == n && recon == n;
    detail += std::string(task) + " " + std::to_string(wins) + "/" + std::to_string(n) + " wins" + seeds + "; ";
  }
  return {ok, detail};
}

Verdict nesting(const std::vector<RunRecord>& runs) {
  int models = 0, monotone = 0;
  for (const auto& r : runs) {
    if (!r.error.empty()) continue;
    for (const char* m : {"baseline", "udc"}) {
      const auto& met = r.metrics.at(m).at("overall").at("metrics");
      double prev = -1.0;
      bool up = true;
      for (int k : {5, 10, 20, 40}) {
        const double a = met.at("acc@" + std::to_string(k)).get<double>();
        up = up && a >= prev;
        prev = a;
      }
      ++models;
      monotone += up;
    }
  }
  return {models > 0 && monotone == models,
          std::to_string(monotone) + "/" + std::to_string(models) + " trained models nondecreasing over K=5,10,20,40"};
}

Verdict codebook_health(const std::vector<RunRecord>& runs) {
  int ok = 0, n = 0;
  double min_util = 1.0;
  for (const auto& r : runs) {
    if (!r.error.empty()) continue;
    ++n;
    const double util = r.metrics.at("codebook").at("levels").at(0).at("utilization").get<double>();
    const auto& d = r.metrics.at("drl");
    const bool rising = d.at("cosine_final").get<double>() > d.at("cosine_epoch1").get<double>();
    min_util = std::min(min_util, util);
    ok += util >= 0.5 && rising;
  }
  return {n == static_cast<int>(runs.size()) && ok == n,
          std::to_string(ok) + "/" + std::to_string(n) + " runs healthy, min level-1 utilization " + fmt(min_util, 3)};
}

Verdict ablation(const fs::path& root) {
  pipeline::RunConfig cfg = pipeline::desk_preset();
  cfg.seed = 1;
  // The harness is under test, not the variants' quality.
  cfg.drl.epochs = 40;
  cfg.finetune.epochs = 20;
  const fs::path dir = root / "ablate";
  fs::remove_all(dir);
  const auto rows = pipeline::run_ablation(cfg, dir, false);
  const std::string csv = pipeline::ablation_csv(rows);
  eval::write_text(dir / "ablation.csv", csv);
  int ok_rows = 0, shared = 0;
  for (const auto& r : rows) {
    ok_rows += r.ok;
    shared += r.ok && r.values.at("stage1_checksum_matches") == 1.0;
  }
  bool nt_zero = false, nco_silent = false;
  for (const auto& r : rows) {
    if (!r.ok) continue;
    if (r.variant == "UDC-NT") {
      const std::string log = eval::read_text(dir / r.variant / "drl_log.csv");
      std::istringstream in(log);
      std::string line;
      std::getline(in, line);
      nt_zero = true;
      while (std::getline(in, line)) {
        std::istringstream f(line);
        std::string cell;
        for (int c = 0; std::getline(f, cell, ','); ++c)
          if (c >= 3 && c <= 6) nt_zero = nt_zero && std::stod(cell) == 0.0;
      }
    }
    if (r.variant == "UDC-NCO") nco_silent = r.values.at("calibration_calls") == 0.0;
  }
  return {rows.size() == 6 && ok_rows == 6 && shared == 6 && nt_zero && nco_silent,
          std::to_string(rows.size()) + " rows, " + std::to_string(ok_rows) + " ok, " + std::to_string(shared) +
              " on the shared stage 1, NT L_con " + (nt_zero ? "zero" : "nonzero") + ", NCO calibration calls " +
              (nco_silent ? "0" : "> 0")};
}

Verdict determinism(const fs::path& root, const RunRecord& first) {
  if (!first.error.empty()) return {false, "reference run failed: " + first.error};
  const RunRecord again = run_desk(ehr::Task::diagnosis_prediction, first.seed, root / "repeat");
  if (!again.error.empty()) return {false, "repeat run failed: " + again.error};
  const bool same = eval::read_text(first.dir / "metrics.json") == eval::read_text(again.dir / "metrics.json");
  return {same, std::string("metrics JSON ") + (same ? "identical" : "differs") + " across two diag seed-" +
                    std::to_string(first.seed) + " runs"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto wanted = [&](int c) { return only.empty() || only.count(c) > 0; };

  int failed = 0;
  auto report = [&](int c, const Verdict& v) {
    std::printf("criterion %d: %s  %s\n", c, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    failed += !v.pass;
  };
  auto guarded = [&](int c, const std::function<Verdict()>& f) {
    if (!wanted(c)) return;
    try {
      report(c, f());
    } catch (const std::exception& e) {
      report(c, {false, std::string("threw: ") + e.what()});
    }
  };

  guarded(1, table_metrics);
  guarded(2, quantizer);
  guarded(3, gradients);
  guarded(4, ema);

  const fs::path root = output_root();
  std::vector<RunRecord> runs;
  if (wanted(5) || wanted(6) || wanted(8) || wanted(9) || wanted(10))
    for (auto task : {ehr::Task::diagnosis_prediction, ehr::Task::medication_recommendation})
      for (int seed = 1; seed <= 5; ++seed)
        runs.push_back(run_desk(task, seed, root / (ehr::to_string(task) + "-" + std::to_string(seed))));

  guarded(5, [&] { return freeze(runs); });
  guarded(6, [&] { return lift(runs); });
  guarded(7, [&] { return ablation(root); });
  guarded(8, [&] { return nesting(runs); });
  guarded(9, [&] { return codebook_health(runs); });
  guarded(10, [&] { return determinism(root, runs.front()); });
  return failed == 0 ? 0 : 1;
}
