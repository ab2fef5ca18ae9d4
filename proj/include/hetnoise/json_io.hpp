/*
 * Copyright 2026 The HetNoise Authors.
 *
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

#include <json.hpp>

#include <filesystem>
#include <string>

namespace hetnoise {

using Json = nlohmann::ordered_json;

// 17 significant digits; integral values keep a trailing ".0" so the type
// survives a parse/emit cycle.
std::string format_double(double value);

/// Serializes with every floating-point number printed by format_double.
/// indent < 0 gives the compact single-line form.
std::string dump_json(const Json& doc, int indent = -1);

Json parse_json(const std::string& text, const std::string& context);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);
void append_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace hetnoise
