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

// Command-line front end for the three-stage pipeline.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "udc/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using namespace udc;
using pipeline::Json;

namespace {

struct Options {
  std::string preset = "paper";
  std::string config_file;
  std::vector<std::string> overrides;
  std::string task;
  long long seed = -1;
  std::string run;
  bool resume = false;
  bool no_finetune = false;
  bool quiet = false;
};

fs::path output_root() {
  const char* env = std::getenv("UDC_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

pipeline::RunConfig build_config(const Options& o) {
  pipeline::RunConfig cfg = pipeline::preset(o.preset);
  if (!o.config_file.empty()) pipeline::apply_file(cfg, o.config_file);
  for (const auto& kv : o.overrides) pipeline::apply_override(cfg, kv);
  if (!o.task.empty()) pipeline::apply_setting(cfg, "task", o.task);
  if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
  if (o.no_finetune) cfg.no_finetune = true;
  cfg.resolved().validate();
  return cfg;
}

fs::path run_dir(const Options& o, const pipeline::RunConfig& cfg) {
  const std::string name =
      o.run.empty() ? ehr::to_string(cfg.task) + "-seed" + std::to_string(cfg.seed) : o.run;
  return output_root() / name;
}

void add_common(CLI::App* app, Options& o) {
  app->add_option("--preset", o.preset, "paper or desk")->capture_default_str();
  app->add_option("-c,--config", o.config_file, "key = value config file");
  app->add_option("-s,--set", o.overrides, "override, key=value (repeatable)");
  app->add_option("--task", o.task, "diag or med");
  app->add_option("--seed", o.seed, "run seed");
  app->add_option("--run", o.run, "run directory name under the output root");
  app->add_flag("--resume", o.resume, "reuse checkpoints that already exist");
  app->add_flag("--no-finetune", o.no_finetune, "substitute embeddings without fine-tuning");
  app->add_flag("-q,--quiet", o.quiet, "no progress output");
}

int exit_code(const std::string& kind) {
  if (kind == "config") return 2;
  if (kind == "stage") return 3;
  if (kind == "parse") return 4;
  return 1;
}

void emit(const Json& j) { std::cout << j.dump(2) << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rare-disease representation pipeline"};
  app.require_subcommand(1);
  Options o;
  std::string dump_kind = "substituted";
  std::string sweep_param;
  std::vector<std::string> sweep_values;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus and text tables");
  auto* pre = app.add_subcommand("pretrain", "stage 1: train the collaborative model");
  auto* drl_cmd = app.add_subcommand("train-drl", "stage 2: train the discrete representation module");
  auto* fin = app.add_subcommand("finetune", "stage 3: substitute disease embeddings and fine-tune");
  auto* ev = app.add_subcommand("eval", "evaluate stage 1 and stage 3 on the test split");
  auto* all = app.add_subcommand("pipeline", "run every stage and evaluate");
  auto* abl = app.add_subcommand("ablate", "run the six ablation variants on a shared stage 1");
  auto* sw = app.add_subcommand("sweep", "sweep K, codebook_size, alpha or eta");
  auto* dump = app.add_subcommand("dump", "write disease embeddings as CSV");
  for (auto* c : {gen, pre, drl_cmd, fin, ev, all, abl, sw, dump}) add_common(c, o);
  sw->add_option("parameter", sweep_param, "K, codebook_size, alpha or eta")->required();
  sw->add_option("values", sweep_values, "values to try")->required();
  dump->add_option("which", dump_kind, "original, substituted, quantized or codebook")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const pipeline::RunConfig cfg = build_config(o);
    const fs::path dir = run_dir(o, cfg);
    pipeline::LogFn log;
    if (!o.quiet) log = [](const std::string& m) { std::cerr << m << '\n'; };
    pipeline::Pipeline p(cfg, pipeline::RunPaths(dir), o.resume, log);
    Json out{{"run_dir", dir.string()}};

    if (*gen) {
      out["ran"] = p.gen_data().ran;
    } else if (*pre) {
      p.gen_data();
      out["ran"] = p.pretrain().ran;
    } else if (*drl_cmd) {
      out["ran"] = p.train_drl().ran;
    } else if (*fin) {
      out["ran"] = p.finetune().ran;
    } else if (*ev) {
      out["metrics"] = p.evaluate();
    } else if (*all) {
      out["metrics"] = p.run_all();
    } else if (*abl) {
      const auto rows = pipeline::run_ablation(cfg, dir, o.resume, log);
      const std::string csv = pipeline::ablation_csv(rows);
      eval::write_text(dir / "ablation.csv", csv);
      out["report"] = (dir / "ablation.csv").string();
      out["failed"] = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.ok; });
    } else if (*sw) {
      const std::string csv = pipeline::run_sweep(cfg, dir, sweep_param, sweep_values, o.resume, log);
      const fs::path file = dir / ("sweep_" + sweep_param + ".csv");
      eval::write_text(file, csv);
      out["report"] = file.string();
    } else if (*dump) {
      std::string csv;
      if (dump_kind == "codebook") {
        auto& ws = p.workspace();
        drl::DrlModel m = p.load_drl();
        csv = pipeline::codebook_csv(m, pipeline::co_tables(p.load_stage1()), pipeline::text_tables(ws.text));
      } else {
        csv = pipeline::dump_embeddings(cfg, pipeline::RunPaths(dir), dump_kind);
      }
      const fs::path file = dir / ("dump_" + dump_kind + ".csv");
      eval::write_text(file, csv);
      out["report"] = file.string();
    }
    emit(out);
    return 0;
  } catch (const udc::Error& e) {
    emit({{"error", {{"kind", e.kind()}, {"message", e.what()}}}});
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    emit({{"error", {{"kind", "internal"}, {"message", e.what()}}}});
    return 1;
  }
}
