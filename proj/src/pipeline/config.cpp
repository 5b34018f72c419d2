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

#include "udc/pipeline/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace udc::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

long long parse_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  return static_cast<int>(parse_integer(key, v));
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  const long long x = parse_integer(key, v);
  if (x < 0) throw ConfigError(key + ": expected a non-negative integer");
  return static_cast<std::uint64_t>(x);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true|false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream in(v);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(parse_int(key, tok));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string join(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

std::string str(bool b) { return b ? "true" : "false"; }

struct Entry {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define UDC_INT(field) \
  {[](RunConfig& c, const std::string& v) { c.field = parse_int(#field, v); }, \
   [](const RunConfig& c) { return std::to_string(c.field); }}
#define UDC_DOUBLE(field) \
  {[](RunConfig& c, const std::string& v) { c.field = parse_double(#field, v); }, \
   [](const RunConfig& c) { return num(c.field); }}
#define UDC_BOOL(field) \
  {[](RunConfig& c, const std::string& v) { c.field = parse_bool(#field, v); }, \
   [](const RunConfig& c) { return str(c.field); }}

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> table = {
      {"task", {[](RunConfig& c, const std::string& v) { c.task = ehr::parse_task(v); },
                [](const RunConfig& c) { return ehr::to_string(c.task); }}},
      {"seed", {[](RunConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); },
                [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"data.source",
       {[](RunConfig& c, const std::string& v) {
          if (v == "synthetic") c.source = DataSource::synthetic;
          else if (v == "files") c.source = DataSource::files;
          else throw ConfigError("data.source: expected synthetic|files, got '" + v + "'");
        },
        [](const RunConfig& c) { return std::string(c.source == DataSource::synthetic ? "synthetic" : "files"); }}},
      {"data.dir", {[](RunConfig& c, const std::string& v) { c.data_dir = v; },
                    [](const RunConfig& c) { return c.data_dir; }}},
      {"synth.patients", UDC_INT(synthetic.n_patients)},
      {"synth.diagnoses", UDC_INT(synthetic.n_diagnoses)},
      {"synth.procedures", UDC_INT(synthetic.n_procedures)},
      {"synth.medications", UDC_INT(synthetic.n_medications)},
      {"synth.latent_dim", UDC_INT(synthetic.latent_dim)},
      {"synth.clusters", UDC_INT(synthetic.n_clusters)},
      {"synth.zipf", UDC_DOUBLE(synthetic.zipf_exponent)},
      {"synth.side_zipf", UDC_DOUBLE(synthetic.side_zipf_exponent)},
      {"synth.mean_visits", UDC_DOUBLE(synthetic.mean_visits)},
      {"synth.min_visits", UDC_INT(synthetic.min_visits)},
      {"synth.max_visits", UDC_INT(synthetic.max_visits)},
      {"synth.diagnoses_per_visit", UDC_DOUBLE(synthetic.diagnoses_per_visit)},
      {"synth.procedures_per_visit", UDC_DOUBLE(synthetic.procedures_per_visit)},
      {"synth.medications_per_visit", UDC_DOUBLE(synthetic.medications_per_visit)},
      {"synth.cluster_spread", UDC_DOUBLE(synthetic.cluster_spread)},
      {"synth.affinity_temperature", UDC_DOUBLE(synthetic.affinity_temperature)},
      {"synth.cluster_switch", UDC_DOUBLE(synthetic.cluster_switch)},
      {"synth.seed", {[](RunConfig& c, const std::string& v) { c.synthetic.seed = parse_u64("synth.seed", v); },
                      [](const RunConfig& c) { return std::to_string(c.synthetic.seed); }}},
      {"text.noise", UDC_DOUBLE(text_noise)},
      {"text.dim", UDC_INT(text_dim)},
      {"synthetic.patients", UDC_INT(synthetic.n_patients)},
      {"synthetic.diagnoses", UDC_INT(synthetic.n_diagnoses)},
      {"synthetic.procedures", UDC_INT(synthetic.n_procedures)},
      {"synthetic.medications", UDC_INT(synthetic.n_medications)},
      {"synthetic.latent_dim", UDC_INT(synthetic.latent_dim)},
      {"synthetic.clusters", UDC_INT(synthetic.n_clusters)},
      {"synthetic.zipf", UDC_DOUBLE(synthetic.zipf_exponent)},
      {"synthetic.side_zipf", UDC_DOUBLE(synthetic.side_zipf_exponent)},
      {"synthetic.mean_visits", UDC_DOUBLE(synthetic.mean_visits)},
      {"synthetic.diagnoses_per_visit", UDC_DOUBLE(synthetic.diagnoses_per_visit)},
      {"synthetic.procedures_per_visit", UDC_DOUBLE(synthetic.procedures_per_visit)},
      {"synthetic.medications_per_visit", UDC_DOUBLE(synthetic.medications_per_visit)},
      {"synthetic.spread", UDC_DOUBLE(synthetic.cluster_spread)},
      {"synthetic.temperature", UDC_DOUBLE(synthetic.affinity_temperature)},
      {"synthetic.switch", UDC_DOUBLE(synthetic.cluster_switch)},
      {"split.train", UDC_DOUBLE(split[0])},
      {"split.val", UDC_DOUBLE(split[1])},
      {"split.test", UDC_DOUBLE(split[2])},
      {"eta", UDC_DOUBLE(eta)},
      {"rarity.mode", {[](RunConfig& c, const std::string& v) { c.rarity_mode = ehr::parse_rarity_mode(v); },
                       [](const RunConfig& c) { return ehr::to_string(c.rarity_mode); }}},
      {"pcm.dim", UDC_INT(pcm.dim)},
      {"pcm.encoder", {[](RunConfig& c, const std::string& v) { c.pcm.encoder = pcm::parse_encoder_kind(v); },
                       [](const RunConfig& c) { return pcm::to_string(c.pcm.encoder); }}},
      {"pcm.layers", UDC_INT(pcm.layers)},
      {"pcm.heads", UDC_INT(pcm.heads)},
      {"pcm.ffn", UDC_INT(pcm.ffn_multiplier)},
      {"pcm.max_positions", UDC_INT(pcm.max_positions)},
      {"pcm.activation", {[](RunConfig& c, const std::string& v) { c.pcm.activation = nn::parse_activation(v); },
                          [](const RunConfig& c) { return nn::to_string(c.pcm.activation); }}},
      {"pcm.tie_head", UDC_BOOL(pcm.tie_diagnosis_head)},
      {"pcm.init_std", UDC_DOUBLE(pcm.embedding_init_std)},
      {"pretrain.epochs", UDC_INT(pretrain.epochs)},
      {"pretrain.batch", UDC_INT(pretrain.batch_size)},
      {"pretrain.lr", UDC_DOUBLE(pretrain.lr)},
      {"pretrain.weight_decay", UDC_DOUBLE(pretrain.weight_decay)},
      {"pretrain.keep_best", UDC_BOOL(pretrain.keep_best)},
      {"finetune.epochs", UDC_INT(finetune.epochs)},
      {"finetune.batch", UDC_INT(finetune.batch_size)},
      {"finetune.lr", UDC_DOUBLE(finetune.lr)},
      {"finetune.weight_decay", UDC_DOUBLE(finetune.weight_decay)},
      {"finetune.keep_best", UDC_BOOL(finetune.keep_best)},
      {"drl.levels", UDC_INT(drl.levels)},
      {"drl.codes", UDC_INT(drl.codes_per_level)},
      {"drl.dim", UDC_INT(drl.dim)},
      {"drl.hidden", UDC_INT(drl.hidden)},
      {"drl.activation", {[](RunConfig& c, const std::string& v) { c.drl.activation = nn::parse_activation(v); },
                          [](const RunConfig& c) { return nn::to_string(c.drl.activation); }}},
      {"drl.alpha", UDC_DOUBLE(drl.alpha)},
      {"drl.kappa", UDC_DOUBLE(drl.kappa)},
      {"drl.eps", UDC_DOUBLE(drl.calibration_eps)},
      {"drl.epochs", UDC_INT(drl.epochs)},
      {"drl.lr", UDC_DOUBLE(drl.lr)},
      {"drl.weight_decay", UDC_DOUBLE(drl.weight_decay)},
      {"drl.batch", UDC_INT(drl.batch_size)},
      {"drl.ablation", {[](RunConfig& c, const std::string& v) { c.drl.flags = drl::AblationFlags::parse(v); },
                        [](const RunConfig& c) { return c.drl.flags.name(); }}},
      {"drl.include_positive", UDC_BOOL(drl.include_positive_in_denominator)},
      {"drl.normalizer", {[](RunConfig& c, const std::string& v) { c.drl.ema_normalizer_mode = drl::parse_normalizer_mode(v); },
                          [](const RunConfig& c) { return drl::to_string(c.drl.ema_normalizer_mode); }}},
      {"drl.ema_target", {[](RunConfig& c, const std::string& v) { c.drl.ema_target = drl::parse_ema_target(v); },
                          [](const RunConfig& c) { return drl::to_string(c.drl.ema_target); }}},
      {"drl.ema_post_calibration", UDC_BOOL(drl.ema_post_calibration)},
      {"drl.condition_encoder",
       {[](RunConfig& c, const std::string& v) { c.drl.condition_encoder = drl::parse_condition_encoder(v); },
        [](const RunConfig& c) { return drl::to_string(c.drl.condition_encoder); }}},
      {"drl.heads", UDC_INT(drl.heads)},
      {"drl.dead_code_reset", UDC_BOOL(drl.dead_code_reset)},
      {"drl.dead_code_threshold", UDC_DOUBLE(drl.dead_code_threshold)},
      {"eval.ks", {[](RunConfig& c, const std::string& v) { c.ks = parse_int_list("eval.ks", v); },
                   [](const RunConfig& c) { return join(c.ks); }}},
      {"eval.k", UDC_INT(primary_k)},
      {"eval.threshold", UDC_DOUBLE(threshold)},
      {"no_finetune", UDC_BOOL(no_finetune)},
  };
  return table;
}

#undef UDC_INT
#undef UDC_DOUBLE
#undef UDC_BOOL

}  // namespace

RunConfig RunConfig::resolved() const {
  RunConfig c = *this;
  const double task_lr = task == ehr::Task::diagnosis_prediction ? 1e-3 : 2e-4;
  if (c.pretrain.lr < 0) c.pretrain.lr = task_lr;
  if (c.finetune.lr < 0) c.finetune.lr = task_lr;
  if (c.drl.lr < 0) c.drl.lr = 1e-3;
  if (c.synthetic.seed == 0) c.synthetic.seed = seed;
  c.pretrain.seed = ehr::mix_seed(seed, 1);
  c.drl.seed = ehr::mix_seed(seed, 2);
  c.finetune.seed = ehr::mix_seed(seed, 3);
  c.drl.eta = eta;
  if (std::find(c.ks.begin(), c.ks.end(), c.primary_k) == c.ks.end()) {
    c.ks.push_back(c.primary_k);
    std::sort(c.ks.begin(), c.ks.end());
  }
  return c;
}

void RunConfig::validate() const {
  if (source == DataSource::files && data_dir.empty()) throw ConfigError("data.source=files needs data.dir");
  if (source == DataSource::synthetic) synthetic.validate();
  if (text_dim <= 0) throw ConfigError("text.dim must be positive");
  if (text_noise < 0) throw ConfigError("text.noise must be non-negative");
  for (double r : split)
    if (!(r > 0.0)) throw ConfigError("split ratios must be positive");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in (0, 1]");
  if (pcm.dim <= 0 || pcm.heads <= 0 || pcm.dim % pcm.heads != 0)
    throw ConfigError("pcm.heads must divide pcm.dim");
  for (const auto* t : {&pretrain, &finetune}) {
    if (t->epochs < 0) throw ConfigError("epochs must be non-negative");
    if (t->batch_size <= 0) throw ConfigError("batch sizes must be positive");
  }
  drl.validate();
  for (int k : ks)
    if (k < 1) throw ConfigError("eval.ks entries must be >= 1");
  if (primary_k < 1) throw ConfigError("eval.k must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("eval.threshold must lie in (0, 1)");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [key, e] : registry()) out += key + " = " + e.get(*this) + "\n";
  return out;
}

RunConfig paper_preset() {
  RunConfig c;
  c.pcm.dim = 128;
  c.drl.dim = 128;
  c.drl.hidden = 128;
  c.pretrain.lr = -1;
  c.finetune.lr = -1;
  c.pretrain.epochs = 50;
  c.finetune.epochs = 50;
  c.drl.epochs = 50;
  c.synthetic.seed = 0;
  return c;
}

RunConfig desk_preset() {
  RunConfig c = paper_preset();
  c.synthetic.n_patients = 2000;
  c.synthetic.n_diagnoses = 200;
  c.pcm.dim = 32;
  c.pcm.max_positions = 8;
  c.drl.dim = 32;
  c.drl.hidden = 64;
  c.text_dim = 32;
  // 40 common diseases make three batches per epoch.
  c.drl.epochs = 200;
  // Without the positive the contrastive objective is unbounded below and
  // diverges over this many steps.
  c.drl.include_positive_in_denominator = true;
  return c;
}

RunConfig preset(const std::string& name) {
  if (name == "paper") return paper_preset();
  if (name == "desk") return desk_preset();
  throw ConfigError("unknown preset '" + name + "' (expected paper|desk)");
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& reg = registry();
  const auto it = reg.find(key);
  if (it == reg.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, value);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  apply_setting(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  std::stringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_override(base, line);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  return base;
}

void apply_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::stringstream s;
  s << f.rdbuf();
  cfg = parse_config_text(s.str(), cfg);
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& [k, e] : registry()) out.push_back(k);
  return out;
}

}  // namespace udc::pipeline
