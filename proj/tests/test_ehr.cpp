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

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "udc/ehr/io.hpp"
#include "udc/ehr/split.hpp"
#include "udc/ehr/synthetic.hpp"
#include "udc/textemb/text_embeddings.hpp"

using namespace udc;
using namespace udc::ehr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("udc_ehr_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Vocabs small_vocabs(int d, int p, int m) {
  Vocabs v;
  v.diagnosis.size = d;
  v.procedure.size = p;
  v.medication.size = m;
  return v;
}

Visit visit(std::vector<int> d, std::vector<int> p, std::vector<int> m) { return Visit{d, p, m}; }

const SyntheticCorpus& default_corpus() {
  static const SyntheticCorpus c = generate_synthetic(SyntheticConfig{});
  return c;
}

}  // namespace

TEST(Types, MultiHotRoundTrip) {
  const nn::RowVector v = multi_hot({1, 3}, 4);
  EXPECT_EQ(v, (nn::RowVector(4) << 0, 1, 0, 1).finished());
  EXPECT_EQ(ids_from_multi_hot((nn::RowVector(4) << 1, 0, 1, 0).finished()), (std::vector<int>{0, 2}));
  EXPECT_EQ(normalized_ids({5, 1, 5, 3}), (std::vector<int>{1, 3, 5}));
}

TEST(Types, ValidateRejectsUnsortedAndOutOfRange) {
  const Vocabs v = small_vocabs(4, 4, 4);
  Dataset ok{{"a", {visit({0, 2}, {1}, {3})}}};
  EXPECT_NO_THROW(validate(ok, v));
  Dataset unsorted{{"a", {visit({2, 0}, {}, {})}}};
  EXPECT_THROW(validate(unsorted, v), ParseError);
  Dataset range{{"a", {visit({0}, {}, {4})}}};
  EXPECT_THROW(validate(range, v), ParseError);
}

TEST(Io, RoundTripEqualsOriginal) {
  const fs::path dir = scratch("io");
  const auto& c = default_corpus();
  Dataset part(c.patients.begin(), c.patients.begin() + 50);
  save_dataset(dir / "p.jsonl", part);
  save_vocabs(dir, c.vocabs);
  const Vocabs v = load_vocabs(dir);
  EXPECT_EQ(v.diagnosis.size, c.vocabs.diagnosis.size);
  EXPECT_EQ(v.medication.size, c.vocabs.medication.size);
  EXPECT_EQ(load_dataset(dir / "p.jsonl", v), part);
}

TEST(Io, EmptyFileIsEmptyDataset) {
  const fs::path dir = scratch("empty");
  std::ofstream(dir / "e.jsonl").close();
  EXPECT_TRUE(load_dataset(dir / "e.jsonl", small_vocabs(3, 3, 3)).empty());
}

TEST(Io, OutOfRangeMedicationNamesIdAndLine) {
  const fs::path dir = scratch("bad");
  {
    std::ofstream out(dir / "b.jsonl");
    out << R"({"patient_id": "a", "visits": [{"d": [0], "p": [], "m": [1]}]})" << "\n";
    out << R"({"patient_id": "b", "visits": [{"d": [1], "p": [], "m": [17]}]})" << "\n";
  }
  try {
    load_dataset(dir / "b.jsonl", small_vocabs(3, 3, 3));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("17"), std::string::npos) << msg;
    EXPECT_NE(msg.find("medication"), std::string::npos) << msg;
  }
}

TEST(Io, MalformedJsonIsParseError) {
  const fs::path dir = scratch("junk");
  {
    std::ofstream out(dir / "j.jsonl");
    out << "{not json\n";
  }
  EXPECT_THROW(load_dataset(dir / "j.jsonl", small_vocabs(3, 3, 3)), ParseError);
}

TEST(Synthetic, SameSeedSameCorpus) {
  SyntheticConfig cfg;
  cfg.n_patients = 200;
  const auto a = generate_synthetic(cfg);
  const auto b = generate_synthetic(cfg);
  EXPECT_EQ(a.patients, b.patients);
  EXPECT_EQ(a.diagnosis_latents, b.diagnosis_latents);
  cfg.seed += 1;
  EXPECT_NE(generate_synthetic(cfg).patients, a.patients);
}

TEST(Synthetic, MinimalCorpus) {
  SyntheticConfig cfg;
  cfg.n_patients = 1;
  cfg.min_visits = 1;
  cfg.max_visits = 1;
  const auto c = generate_synthetic(cfg);
  ASSERT_EQ(c.patients.size(), 1u);
  ASSERT_EQ(c.patients[0].visits.size(), 1u);
  EXPECT_NO_THROW(validate(c.patients, c.vocabs));
}

TEST(Synthetic, HeadCarriesMostOccurrences) {
  const auto& c = default_corpus();
  std::vector<long> counts = disease_counts(c.patients, c.vocabs.diagnosis.size);
  std::vector<long> sorted = counts;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const long total = std::accumulate(sorted.begin(), sorted.end(), 0L);
  const long head = std::accumulate(sorted.begin(), sorted.begin() + 40, 0L);
  EXPECT_GE(static_cast<double>(head) / static_cast<double>(total), 0.8);
}

TEST(Synthetic, FrequencyRankFollowsZipfRank) {
  const auto& c = default_corpus();
  const auto counts = disease_counts(c.patients, c.vocabs.diagnosis.size);
  std::vector<double> freq(counts.begin(), counts.end()), zipf(counts.size());
  for (std::size_t i = 0; i < zipf.size(); ++i) zipf[i] = std::pow(static_cast<double>(i + 1), -1.2);
  EXPECT_GE(oracle::spearman(freq, zipf), 0.95);
}

TEST(Synthetic, RejectsBadConfig) {
  SyntheticConfig cfg;
  cfg.n_diagnoses = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Rarity, TopFractionByCount) {
  // Disease d appears in (10 - d) visits.
  Dataset data;
  for (int d = 0; d < 10; ++d)
    for (int k = 0; k < 10 - d; ++k) data.push_back({"p", {visit({d}, {}, {})}});
  const RaritySplit r = split_rarity(data, 10, 0.2);
  EXPECT_EQ(r.common, (std::vector<int>{0, 1}));
  EXPECT_EQ(r.rare.size(), 8u);
  EXPECT_EQ(r.counts[0], 10);
}

TEST(Rarity, TiesGoToLowerIds) {
  Dataset data;
  for (int d = 0; d < 10; ++d) data.push_back({"p", {visit({d}, {}, {})}});
  EXPECT_EQ(split_rarity(data, 10, 0.2).common, (std::vector<int>{0, 1}));
  EXPECT_EQ(split_rarity(data, 10, 0.25).common, (std::vector<int>{0, 1, 2}));
}

TEST(Rarity, DefaultCorpusRecount) {
  const auto& c = default_corpus();
  const int n = c.vocabs.diagnosis.size;
  const RaritySplit r = split_rarity(c.patients, n, 0.2);
  EXPECT_NEAR(static_cast<double>(r.common.size()), 0.2 * n, 1.0);
  std::vector<long> recount(static_cast<std::size_t>(n), 0);
  for (const auto& p : c.patients)
    for (const auto& v : p.visits)
      for (int d : v.diagnoses) ++recount[static_cast<std::size_t>(d)];
  EXPECT_EQ(recount, r.counts);
  long min_common = std::numeric_limits<long>::max(), max_rare = 0;
  for (int d : r.common) min_common = std::min(min_common, r.counts[static_cast<std::size_t>(d)]);
  for (int d : r.rare) max_rare = std::max(max_rare, r.counts[static_cast<std::size_t>(d)]);
  EXPECT_GE(min_common, max_rare);
}

TEST(Rarity, PerCaseMode) {
  // Disease 0 in 3 of 4 patients, disease 1 in 1 of 4.
  Dataset data{{"a", {visit({0}, {}, {})}}, {"b", {visit({0}, {}, {})}},
               {"c", {visit({0, 1}, {}, {})}}, {"d", {visit({2}, {}, {})}}};
  const RaritySplit r = split_rarity(data, 3, 0.5, RarityMode::per_case);
  EXPECT_EQ(r.common, (std::vector<int>{0}));
}

TEST(PatientSplit, SizesAndPartition) {
  Dataset data;
  for (int i = 0; i < 10; ++i) data.push_back({"p" + std::to_string(i), {visit({0}, {}, {})}});
  const PatientSplit s = split_patients(data, {0.6, 0.2, 0.2}, 4);
  EXPECT_EQ(s.train.size(), 6u);
  EXPECT_EQ(s.val.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
  std::multiset<std::string> ids;
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (const auto& p : *part) ids.insert(p.patient_id);
  EXPECT_EQ(ids.size(), 10u);
  EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), 10u);
  const PatientSplit again = split_patients(data, {0.6, 0.2, 0.2}, 4);
  EXPECT_EQ(again.train, s.train);
  EXPECT_EQ(again.test, s.test);
}

TEST(PatientSplit, RatiosWithinOnePatient) {
  const auto& c = default_corpus();
  const PatientSplit s = split_patients(c.patients, {0.6, 0.2, 0.2}, 9);
  const double n = static_cast<double>(c.patients.size());
  EXPECT_NEAR(static_cast<double>(s.train.size()), 0.6 * n, 1.0);
  EXPECT_NEAR(static_cast<double>(s.val.size()), 0.2 * n, 1.0);
  EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), c.patients.size());
}

TEST(Targets, NextVisitDefinitions) {
  const PatientRecord r{"p", {visit({0}, {1}, {2}), visit({3, 4}, {5}, {6, 7})}};
  EXPECT_EQ(extract_targets(r, 1, Task::diagnosis_prediction), (std::vector<int>{3, 4}));
  EXPECT_EQ(extract_targets(r, 1, Task::medication_recommendation), (std::vector<int>{6, 7}));
  EXPECT_EQ(extract_targets(r, 0, Task::medication_recommendation), (std::vector<int>{2}));
  EXPECT_THROW(extract_targets(r, 0, Task::diagnosis_prediction), ContractError);
  EXPECT_THROW(extract_targets(r, 2, Task::medication_recommendation), ContractError);
}

TEST(Targets, EnumerateSamplesSkipsEmptyTargets) {
  const Dataset data{{"p", {visit({0}, {}, {1}), visit({1}, {}, {}), visit({}, {}, {2})}}};
  const auto diag = enumerate_samples(data, Task::diagnosis_prediction);
  ASSERT_EQ(diag.size(), 1u);
  EXPECT_EQ(diag[0].visit, 1);
  const auto med = enumerate_samples(data, Task::medication_recommendation);
  ASSERT_EQ(med.size(), 2u);
  EXPECT_EQ(med[1].visit, 2);
}

TEST(Context, SingleAndMissingOccurrence) {
  const Dataset data{{"p", {visit({1}, {3}, {7}), visit({2}, {}, {})}}};
  const auto ctx = cooccurrence_context(data, 1);
  ASSERT_EQ(ctx.size(), 1u);
  EXPECT_EQ(ctx[0].procedures, (std::vector<int>{3}));
  EXPECT_EQ(ctx[0].medications, (std::vector<int>{7}));
  EXPECT_TRUE(cooccurrence_context(data, 0).empty());
}

TEST(Context, EntryCountsMatchOccurrences) {
  const auto& c = default_corpus();
  const auto r = split_rarity(c.patients, c.vocabs.diagnosis.size, 0.2);
  const OccurrenceIndex index(c.patients, c.vocabs.diagnosis.size);
  for (int d : {0, 5, 60, 150, 199}) {
    EXPECT_EQ(static_cast<long>(cooccurrence_context(c.patients, d).size()), r.counts[static_cast<std::size_t>(d)]);
    EXPECT_EQ(static_cast<long>(index.of(d).size()), r.counts[static_cast<std::size_t>(d)]);
  }
}

TEST(TextEmbeddings, ProjectionOfLatentsPlusNoise) {
  const auto& c = default_corpus();
  const auto noiseless = textemb::synthesize_text_embeddings(c, 0.0, 3, 16);
  const nn::Matrix proj = textemb::text_projection(c.diagnosis_latents.cols(), 16, 3);
  EXPECT_TRUE(noiseless.diagnosis().isApprox(c.diagnosis_latents * proj, 1e-12));
  EXPECT_TRUE(noiseless.medication().isApprox(c.medication_latents * proj, 1e-12));
  const auto noisy = textemb::synthesize_text_embeddings(c, 0.3, 3, 16);
  const double sd = std::sqrt((noisy.diagnosis() - noiseless.diagnosis()).array().square().mean());
  EXPECT_NEAR(sd, 0.3, 0.02);
}

TEST(TextEmbeddings, FileRoundTripAndMissingRow) {
  const fs::path dir = scratch("text");
  const auto& c = default_corpus();
  const auto emb = textemb::synthesize_text_embeddings(c, 0.3, 3, 8);
  textemb::save_text_embeddings(dir, emb);
  const auto back = textemb::load_text_embeddings(dir, c.vocabs);
  EXPECT_EQ(back.checksum(), emb.checksum());
  EXPECT_EQ(back.source(), textemb::Source::file);
  textemb::save_table(dir / "short.emb", EntityClass::diagnosis, emb.diagnosis().topRows(5));
  EXPECT_THROW(textemb::load_table(dir / "short.emb", c.vocabs.diagnosis), ParseError);
}
