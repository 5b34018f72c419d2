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

#include <json.hpp>

#include "udc/eval/diagnostics.hpp"
#include "udc/eval/metrics.hpp"

namespace udc::eval {

using Json = nlohmann::ordered_json;

Json to_json(const MetricsReport& r);
Json to_json(const GroupReport& r);
Json to_json(const CodebookDiagnostics& d);

/// Long format: scope,group,metric,value,support. Overall metrics use
/// group "all".
std::string metrics_csv(const MetricsReport& overall, const GroupReport& groups);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace udc::eval
