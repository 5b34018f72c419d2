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

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "udc/pipeline/pipeline.hpp"

using namespace udc;
using namespace udc::pipeline;

namespace {

RunConfig tiny(ehr::Task task = ehr::Task::diagnosis_prediction) {
  RunConfig c = desk_preset();
  c.task = task;
  for (const char* kv : {"synthetic.patients=300", "synthetic.diagnoses=50", "pcm.dim=16", "drl.dim=16",
                         "drl.hidden=16", "text.dim=16", "drl.levels=2", "drl.codes=8", "pretrain.epochs=2",
                         "finetune.epochs=2", "drl.epochs=3"})
    apply_override(c, kv);
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("udc_pipeline_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<double> fields(const std::string& line, std::size_t skip) {
  std::vector<double> out;
  std::istringstream in(line);
  std::string f;
  for (std::size_t i = 0; std::getline(in, f, ','); ++i)
    if (i >= skip) out.push_back(std::stod(f));
  return out;
}

struct Command {
  int status = 0;
  std::string out;
};

Command run_cli(const std::string& args, const fs::path& root) {
  const std::string cmd = "UDC_OUTPUT_ROOT=" + root.string() + " " + UDC_CLI_PATH + " " + args + " 2>/dev/null";
  Command c;
  FILE* p = ::popen(cmd.c_str(), "r");
  char buf[512];
  while (std::fgets(buf, sizeof buf, p)) c.out += buf;
  const int raw = ::pclose(p);
  c.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return c;
}

}  // namespace

// ---- configuration -------------------------------------------------------------

TEST(Config, UnknownKeysAreRejected) {
  RunConfig c;
  EXPECT_THROW(apply_override(c, "drl.bogus=1"), ConfigError);
  EXPECT_THROW(apply_override(c, "no equals sign"), ConfigError);
  EXPECT_THROW(apply_override(c, "drl.levels=four"), ConfigError);
}

TEST(Config, FileErrorsNameTheLine) {
  try {
    parse_config_text("# comment\ndrl.levels = 3\n\nnot.a.key = 1\n", RunConfig());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
  const RunConfig c = parse_config_text("drl.levels = 3  # trailing comment\ntask = med\n", RunConfig());
  EXPECT_EQ(c.drl.levels, 3);
  EXPECT_EQ(c.task, ehr::Task::medication_recommendation);
}

TEST(Config, TextRoundTrip) {
  RunConfig c = tiny(ehr::Task::medication_recommendation);
  apply_override(c, "drl.ablation=NM,NS");
  apply_override(c, "eval.ks=5,15");
  const std::string text = c.to_text();
  EXPECT_EQ(parse_config_text(text, RunConfig()).to_text(), text);
}

TEST(Config, PresetsAndTaskDefaults) {
  const RunConfig paper = preset("paper"), desk = preset("desk");
  EXPECT_EQ(paper.pcm.dim, 128);
  EXPECT_EQ(paper.drl.levels, 4);
  EXPECT_EQ(paper.drl.codes_per_level, 64);
  EXPECT_DOUBLE_EQ(paper.drl.alpha, 0.25);
  EXPECT_DOUBLE_EQ(paper.eta, 0.2);
  EXPECT_EQ(desk.pcm.dim, 32);
  EXPECT_EQ(desk.synthetic.n_patients, 2000);
  EXPECT_TRUE(desk.drl.include_positive_in_denominator);
  EXPECT_FALSE(paper.drl.include_positive_in_denominator);
  EXPECT_THROW(preset("laptop"), ConfigError);

  RunConfig diag = paper, med = paper;
  med.task = ehr::Task::medication_recommendation;
  EXPECT_DOUBLE_EQ(diag.resolved().pretrain.lr, 1e-3);
  EXPECT_DOUBLE_EQ(med.resolved().pretrain.lr, 2e-4);
  EXPECT_DOUBLE_EQ(med.resolved().finetune.lr, 2e-4);
  EXPECT_NE(diag.resolved().pretrain.seed, diag.resolved().drl.seed);
}

TEST(Config, ValidationCatchesBadValues) {
  RunConfig c = tiny();
  c.eta = 0.0;
  EXPECT_THROW(c.resolved().validate(), ConfigError);
  c = tiny();
  c.source = DataSource::files;
  EXPECT_THROW(c.resolved().validate(), ConfigError);
  c = tiny();
  c.drl.dim = 15;
  EXPECT_THROW(c.resolved().validate(), ConfigError);
}

// ---- stages ------------------------------------------------------------------

TEST(Pipeline, MissingStageIsReported) {
  const fs::path dir = scratch("missing");
  Pipeline p(tiny(), RunPaths(dir / "run"), false);
  p.gen_data();
  EXPECT_THROW(p.train_drl(), StageError);
  EXPECT_THROW(p.finetune(), StageError);
  EXPECT_THROW(p.evaluate(), StageError);
}

TEST(Pipeline, EndToEndWritesReportsAndResumes) {
  const fs::path dir = scratch("e2e");
  const RunConfig cfg = tiny();
  std::vector<std::string> log;
  Pipeline p(cfg, RunPaths(dir / "run"), false, [&](const std::string& m) { log.push_back(m); });
  const Json m = p.run_all();
  const RunPaths& paths = p.paths();
  for (const auto& f : {paths.stage1, paths.drl(), paths.stage3(), paths.config(), paths.metrics_json(),
                        paths.metrics_csv(), paths.drl_log(), paths.codebook_csv(), paths.freeze(), paths.log()})
    EXPECT_TRUE(fs::exists(f)) << f;
  EXPECT_FALSE(log.empty());
  EXPECT_TRUE(m.contains("g1"));
  EXPECT_EQ(m.at("g1").at("metric").get<std::string>(), "acc@20");
  EXPECT_EQ(lines_of(eval::read_text(paths.drl_log())).size(), static_cast<std::size_t>(cfg.drl.epochs + 2));

  // The frozen tables and the trained DRL module are untouched by stage 3.
  const Json freeze = Json::parse(eval::read_text(paths.freeze()));
  EXPECT_EQ(freeze.at("stage3").at("drl_before"), freeze.at("stage3").at("drl_after"));

  const auto s1 = nn::fnv1a_file(paths.stage1), s2 = nn::fnv1a_file(paths.drl()), s3 = nn::fnv1a_file(paths.stage3());
  const auto drl_sum = p.load_drl().checksum();
  const std::string metrics = eval::read_text(paths.metrics_json());

  Pipeline again(cfg, RunPaths(dir / "run"), true);
  EXPECT_FALSE(again.gen_data().ran);
  EXPECT_FALSE(again.pretrain().ran);
  EXPECT_FALSE(again.train_drl().ran);
  EXPECT_FALSE(again.finetune().ran);
  EXPECT_EQ(nn::fnv1a_file(paths.stage1), s1);
  EXPECT_EQ(nn::fnv1a_file(paths.drl()), s2);
  EXPECT_EQ(nn::fnv1a_file(paths.stage3()), s3);
  EXPECT_EQ(again.load_drl().checksum(), drl_sum);
  again.evaluate();
  EXPECT_EQ(eval::read_text(paths.metrics_json()), metrics);
}

TEST(Pipeline, DumpMatchesDirectSubstitution) {
  const fs::path dir = scratch("dump");
  RunConfig cfg = tiny(ehr::Task::medication_recommendation);
  cfg.no_finetune = true;
  const RunPaths paths(dir / "run");
  Pipeline p(cfg, paths, false);
  p.run_all();

  const std::string a = dump_embeddings(cfg, paths, "substituted");
  EXPECT_EQ(dump_embeddings(cfg, paths, "substituted"), a);
  const auto rows = lines_of(a);
  ASSERT_EQ(rows.size(), static_cast<std::size_t>(cfg.synthetic.n_diagnoses + 1));

  auto& ws = p.workspace();
  drl::DrlModel m = p.load_drl();
  const nn::Matrix direct =
      drl::substitute_embeddings(m, co_tables(p.load_stage1()), text_tables(ws.text), ws.rarity, ws.split.train);
  int rare_rows = 0;
  for (std::size_t d = 0; d + 1 < rows.size(); ++d) {
    const auto v = fields(rows[d + 1], 2);
    ASSERT_EQ(v.size(), static_cast<std::size_t>(direct.cols()));
    for (std::size_t j = 0; j < v.size(); ++j)
      EXPECT_EQ(v[j], direct(static_cast<nn::Index>(d), static_cast<nn::Index>(j)));
    rare_rows += rows[d + 1].find(",rare,") != std::string::npos;
  }
  EXPECT_EQ(rare_rows, static_cast<int>(ws.rarity.rare.size()));
  EXPECT_EQ(lines_of(dump_embeddings(cfg, paths, "original")).size(), rows.size());
  EXPECT_THROW(dump_embeddings(cfg, paths, "other"), ConfigError);
}

TEST(Pipeline, AblationProducesSixVariantsOnOneStageOne) {
  const fs::path dir = scratch("ablate");
  const auto rows = run_ablation(tiny(), dir, false);
  ASSERT_EQ(rows.size(), 6u);
  std::vector<std::string> names;
  for (const auto& r : rows) {
    EXPECT_TRUE(r.ok) << r.variant << ": " << r.error;
    EXPECT_EQ(r.values.at("stage1_checksum_matches"), 1.0) << r.variant;
    names.push_back(r.variant);
  }
  EXPECT_EQ(names, (std::vector<std::string>{"UDC", "UDC-NCO", "UDC-NT", "UDC-NM", "UDC-NS", "UDC-NCD"}));
  EXPECT_EQ(rows[1].values.at("calibration_calls"), 0.0);
  EXPECT_GT(rows[0].values.at("calibration_calls"), 0.0);
  EXPECT_EQ(lines_of(ablation_csv(rows)).size(), 7u);
}

TEST(Pipeline, KSweepReusesOneTrainingRun) {
  const fs::path dir = scratch("sweep");
  const auto rows = lines_of(run_sweep(tiny(), dir, "K", {"5", "10", "20", "40"}, false));
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], "K,model,acc,pres,g1_acc");
  int udc_rows = 0;
  for (const auto& r : rows) udc_rows += r.find(",udc,") != std::string::npos;
  EXPECT_EQ(udc_rows, 4);
  int drl_checkpoints = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) drl_checkpoints += e.path().filename() == "drl.ckpt";
  EXPECT_EQ(drl_checkpoints, 1);
  EXPECT_THROW(run_sweep(tiny(), dir, "depth", {"1"}, false), ConfigError);
}

// ---- command line --------------------------------------------------------------

TEST(Cli, ErrorsAreMachineReadable) {
  const fs::path root = scratch("cli");
  const Command bad_key = run_cli("pipeline --preset desk -s drl.bogus=1 -q", root);
  EXPECT_EQ(bad_key.status, 2);
  const Json j = Json::parse(bad_key.out);
  EXPECT_EQ(j.at("error").at("kind").get<std::string>(), "config");
  EXPECT_NE(j.at("error").at("message").get<std::string>().find("drl.bogus"), std::string::npos);

  const Command missing = run_cli("train-drl --preset desk --run nothing -q", root);
  EXPECT_EQ(missing.status, 3);
  EXPECT_EQ(Json::parse(missing.out).at("error").at("kind").get<std::string>(), "stage");

  const Command ok = run_cli("gen-data --preset desk --seed 4 -s synthetic.patients=50 -q", root);
  EXPECT_EQ(ok.status, 0);
  EXPECT_TRUE(Json::parse(ok.out).at("ran").get<bool>());
  EXPECT_TRUE(fs::exists(root / "diag-seed4"));
}
