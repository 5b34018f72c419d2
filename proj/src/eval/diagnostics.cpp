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

#include "udc/eval/diagnostics.hpp"

#include <cmath>

namespace udc::eval {

CodebookDiagnostics codebook_diagnostics(const drl::Codebook& book,
                                         const std::vector<drl::QuantizationResult>& co,
                                         const std::vector<drl::QuantizationResult>& te) {
  if (co.size() != te.size()) throw ContractError("diagnostics need paired quantizations");
  CodebookDiagnostics out;
  out.diseases = static_cast<long>(co.size());
  if (co.empty()) return out;
  long tuples = 0;
  double cos = 0.0;
  for (std::size_t i = 0; i < co.size(); ++i) {
    tuples += co[i].indices == te[i].indices ? 1 : 0;
    cos += nn::cosine_similarity(co[i].z, te[i].z);
  }
  for (int l = 0; l < book.levels(); ++l) {
    LevelDiagnostics lv;
    lv.usage.assign(static_cast<std::size_t>(book.codes(l)), 0);
    long agree = 0;
    for (std::size_t i = 0; i < co.size(); ++i) {
      const int a = co[i].indices.at(static_cast<std::size_t>(l));
      const int b = te[i].indices.at(static_cast<std::size_t>(l));
      ++lv.usage[static_cast<std::size_t>(a)];
      ++lv.usage[static_cast<std::size_t>(b)];
      agree += a == b ? 1 : 0;
    }
    const double total = 2.0 * static_cast<double>(co.size());
    long used = 0;
    for (long u : lv.usage) {
      if (u == 0) continue;
      ++used;
      const double p = static_cast<double>(u) / total;
      lv.entropy -= p * std::log(p);
    }
    lv.utilization = static_cast<double>(used) / static_cast<double>(lv.usage.size());
    lv.agreement = static_cast<double>(agree) / static_cast<double>(co.size());
    out.levels.push_back(std::move(lv));
  }
  out.tuple_agreement = static_cast<double>(tuples) / static_cast<double>(co.size());
  out.mean_cosine = cos / static_cast<double>(co.size());
  return out;
}

CodebookDiagnostics codebook_diagnostics(drl::DrlModel& model, const drl::EntityTables& co,
                                         const drl::EntityTables& text, const std::vector<int>& diseases) {
  const nn::Matrix a = model.encode_values(drl::Branch::co, drl::gather_table_rows(co.diagnosis, diseases));
  const nn::Matrix b = model.encode_values(drl::Branch::te, drl::gather_table_rows(text.diagnosis, diseases));
  std::vector<drl::QuantizationResult> qa, qb;
  for (nn::Index i = 0; i < a.rows(); ++i) {
    qa.push_back(drl::quantize_residual(a.row(i), model.codebook()));
    qb.push_back(drl::quantize_residual(b.row(i), model.codebook()));
  }
  return codebook_diagnostics(model.codebook(), qa, qb);
}

}  // namespace udc::eval
