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

#include <filesystem>
#include <functional>
#include <optional>

#include "udc/drl/train.hpp"
#include "udc/eval/report.hpp"
#include "udc/pipeline/config.hpp"
#include "udc/textemb/text_embeddings.hpp"

namespace udc::pipeline {

namespace fs = std::filesystem;
using eval::Json;
using LogFn = std::function<void(const std::string&)>;

/// Files of one run directory. The stage-1 checkpoint may live elsewhere so
/// that ablation and sweep variants share it.
struct RunPaths {
  fs::path dir;
  fs::path stage1;
  fs::path data;

  explicit RunPaths(fs::path run_dir);
  fs::path drl() const { return dir / "drl.ckpt"; }
  fs::path stage3() const { return dir / "finetuned.ckpt"; }
  fs::path config() const { return dir / "config.resolved"; }
  fs::path metrics_json() const { return dir / "metrics.json"; }
  fs::path metrics_csv() const { return dir / "metrics.csv"; }
  fs::path drl_log() const { return dir / "drl_log.csv"; }
  fs::path codebook_csv() const { return dir / "codebook.csv"; }
  fs::path freeze() const { return dir / "freeze.json"; }
  fs::path log() const { return dir / "run.log"; }
};

/// Everything derived from the raw data: vocabularies, patients, the split,
/// text tables and the rarity partition of the training patients.
struct Workspace {
  ehr::Vocabs vocabs;
  ehr::Dataset patients;
  ehr::PatientSplit split;
  textemb::TextEmbeddings text;
  ehr::RaritySplit rarity;
};

/// Writes the synthetic corpus and its text tables into `dir`.
void generate_data(const RunConfig& cfg, const fs::path& dir);
Workspace load_workspace(const RunConfig& cfg, const fs::path& data_dir);

drl::EntityTables co_tables(const pcm::PcmModel& model);
drl::EntityTables text_tables(const textemb::TextEmbeddings& text);

struct StageStatus {
  bool ran = false;  // false when an existing checkpoint was reused
  double seconds = 0.0;
};

class Pipeline {
 public:
  Pipeline(RunConfig cfg, RunPaths paths, bool resume, LogFn log = {});

  const RunConfig& config() const { return cfg_; }
  const RunPaths& paths() const { return paths_; }

  StageStatus gen_data();
  StageStatus pretrain();
  StageStatus train_drl();
  StageStatus finetune();
  /// Evaluates stage 1 and stage 3 on the test split and writes the reports.
  Json evaluate();
  Json run_all();

  Workspace& workspace();
  pcm::PcmModel load_stage1();
  drl::DrlModel load_drl();
  pcm::PcmModel load_stage3();

 private:
  void write_config() const;
  void note(const std::string& msg) const;
  pcm::PcmModel fresh_pcm();
  drl::DrlModel fresh_drl();

  RunConfig cfg_;
  RunPaths paths_;
  bool resume_;
  LogFn log_;
  std::optional<Workspace> ws_;
};

struct AblationRow {
  std::string variant;
  bool ok = false;
  std::string error;
  std::map<std::string, double> values;
};

/// Shared stage 1 under `dir/shared`, one run per Table 3 variant.
std::vector<AblationRow> run_ablation(const RunConfig& base, const fs::path& dir, bool resume,
                                      const LogFn& log = {});
std::string ablation_csv(const std::vector<AblationRow>& rows);

/// parameter is one of K, codebook_size, alpha, eta.
std::string run_sweep(const RunConfig& base, const fs::path& dir, const std::string& parameter,
                      const std::vector<std::string>& values, bool resume, const LogFn& log = {});

/// One row per disease: id, rarity class, vector. `which` is original,
/// substituted or quantized.
std::string dump_embeddings(const RunConfig& cfg, const RunPaths& paths, const std::string& which);
/// Per-level code vectors and usage counts over all diseases.
std::string codebook_csv(drl::DrlModel& model, const drl::EntityTables& co, const drl::EntityTables& text);

}  // namespace udc::pipeline
