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

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "udc/drl/model.hpp"
#include "udc/ehr/split.hpp"
#include "udc/ehr/synthetic.hpp"
#include "udc/pcm/model.hpp"
#include "udc/pcm/train.hpp"

namespace udc::pipeline {

enum class DataSource { synthetic, files };

struct RunConfig {
  ehr::Task task = ehr::Task::diagnosis_prediction;
  std::uint64_t seed = 1;

  DataSource source = DataSource::synthetic;
  /// Directory with patients.jsonl, vocab_*.json and text_*.emb.
  std::string data_dir;
  ehr::SyntheticConfig synthetic;
  double text_noise = 0.3;
  int text_dim = 64;

  std::array<double, 3> split{0.6, 0.2, 0.2};
  double eta = 0.2;
  ehr::RarityMode rarity_mode = ehr::RarityMode::top_fraction;

  pcm::PcmConfig pcm;
  pcm::TrainConfig pretrain;
  pcm::TrainConfig finetune;
  /// Negative learning rates resolve to the task default.
  drl::DrlConfig drl;

  std::vector<int> ks{5, 10, 20, 40};
  int primary_k = 20;
  double threshold = 0.5;
  bool no_finetune = false;

  /// Fill task-dependent defaults and propagate shared values.
  RunConfig resolved() const;
  void validate() const;

  /// One "key = value" line per setting, sorted by key.
  std::string to_text() const;
};

/// Paper defaults, with task-dependent learning rates left unresolved.
RunConfig paper_preset();
/// Smaller widths and corpus for quick end-to-end runs.
RunConfig desk_preset();
RunConfig preset(const std::string& name);

/// Applies one "key=value" assignment; unknown keys raise ConfigError.
void apply_override(RunConfig& cfg, const std::string& assignment);
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
/// Reads "key = value" lines ('#' starts a comment).
void apply_file(RunConfig& cfg, const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text, RunConfig base);
std::vector<std::string> known_keys();

}  // namespace udc::pipeline
