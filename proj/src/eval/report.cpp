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

#include "udc/eval/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace udc::eval {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

Json to_json(const MetricsReport& r) {
  Json j;
  j["task"] = ehr::to_string(r.task);
  j["samples"] = r.samples;
  j["excluded_topk"] = r.excluded_topk;
  j["excluded_set"] = r.excluded_set;
  Json m = Json::object();
  for (const auto& [k, v] : r.values()) m[k] = v;
  if (!r.auroc) m["auroc"] = nullptr;
  if (!r.auprc) m["auprc"] = nullptr;
  j["metrics"] = m;
  return j;
}

Json to_json(const GroupReport& r) {
  Json j;
  j["task"] = ehr::to_string(r.task);
  Json groups = Json::array();
  for (std::size_t g = 0; g < r.groups.size(); ++g) {
    Json e;
    e["group"] = "G" + std::to_string(g + 1);
    e["support"] = r.groups[g].support;
    Json m = Json::object();
    for (const auto& [k, v] : r.groups[g].values) m[k] = v;
    e["metrics"] = m;
    groups.push_back(e);
  }
  j["groups"] = groups;
  return j;
}

Json to_json(const CodebookDiagnostics& d) {
  Json j;
  j["diseases"] = d.diseases;
  j["tuple_agreement"] = d.tuple_agreement;
  j["mean_cosine"] = d.mean_cosine;
  Json levels = Json::array();
  for (const auto& l : d.levels) {
    Json e;
    e["utilization"] = l.utilization;
    e["entropy"] = l.entropy;
    e["agreement"] = l.agreement;
    e["usage"] = l.usage;
    levels.push_back(e);
  }
  j["levels"] = levels;
  return j;
}

std::string metrics_csv(const MetricsReport& overall, const GroupReport& groups) {
  std::ostringstream out;
  out << "scope,group,metric,value,support\n";
  for (const auto& [k, v] : overall.values())
    out << "overall,all," << k << ',' << fmt(v) << ',' << overall.samples << '\n';
  for (std::size_t g = 0; g < groups.groups.size(); ++g)
    for (const auto& [k, v] : groups.groups[g].values)
      out << "group,G" << g + 1 << ',' << k << ',' << fmt(v) << ',' << groups.groups[g].support << '\n';
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw StageError("cannot write " + path.string());
  f << text;
  if (!f) throw StageError("short write to " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw StageError("missing file " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace udc::eval
