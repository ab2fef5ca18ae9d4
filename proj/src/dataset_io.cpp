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

#include "hetnoise/json_io.hpp"
#include "hetnoise/noisegen.hpp"

#include <sstream>

namespace hetnoise {
namespace {

Json vector_json(const auto& row) {
  Json arr = Json::array();
  for (Eigen::Index j = 0; j < row.size(); ++j) arr.push_back(static_cast<double>(row(j)));
  return arr;
}

Json label_json(const IndexMatrix& labels, Eigen::Index i, LabelMode mode) {
  if (mode == LabelMode::multiclass) return labels(i, 0);
  Json arr = Json::array();
  for (Eigen::Index c = 0; c < labels.cols(); ++c) arr.push_back(labels(i, c));
  return arr;
}

void read_label(const Json& node, IndexMatrix& labels, Eigen::Index i, LabelMode mode) {
  if (mode == LabelMode::multiclass) {
    if (!node.is_number_integer()) throw FormatError("multi-class label must be an integer");
    labels(i, 0) = node.get<int>();
    return;
  }
  if (!node.is_array() || static_cast<Eigen::Index>(node.size()) != labels.cols())
    throw FormatError("multi-label label must be an array of length k");
  for (Eigen::Index c = 0; c < labels.cols(); ++c) labels(i, c) = node.at(static_cast<std::size_t>(c)).get<int>();
}

std::vector<double> number_array(const Json& node, std::size_t expected, const char* what) {
  if (!node.is_array() || node.size() != expected)
    throw FormatError(std::string(what) + " must be an array of length " + std::to_string(expected));
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : node) {
    if (!v.is_number()) throw FormatError(std::string(what) + " must contain numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::string to_string(LabelMode mode) { return mode == LabelMode::multiclass ? "multiclass" : "multilabel"; }

LabelMode label_mode_from_string(const std::string& name) {
  if (name == "multiclass") return LabelMode::multiclass;
  if (name == "multilabel") return LabelMode::multilabel;
  throw FormatError("unknown label mode '" + name + "'");
}

std::string dataset_to_jsonl(const NoisyDataset& dataset) {
  dataset.validate();
  Json params = Json::object();
  for (const auto& [name, value] : dataset.profile.field.params) params[name] = value;
  Json header = {
      {"format_version", kFormatVersion},
      {"n", dataset.size()},
      {"d", dataset.dim()},
      {"k", dataset.num_classes},
      {"head_mode", to_string(dataset.mode)},
      {"profile",
       {{"kind", to_string(dataset.profile.kind)},
        {"base_scale", dataset.profile.base_scale},
        {"scale_field", {{"family", dataset.profile.field.family}, {"params", params}}}}},
      {"seed", dataset.seed},
  };
  std::string out = dump_json(header);
  out += '\n';
  const std::string tag = to_string(dataset.split_tag);
  for (Eigen::Index i = 0; i < dataset.size(); ++i) {
    Json line = {
        {"features", vector_json(dataset.features.row(i))},
        {"clean_label", dataset.has_clean_labels ? label_json(dataset.clean_labels, i, dataset.mode) : Json()},
        {"noisy_label", label_json(dataset.noisy_labels, i, dataset.mode)},
        {"true_scales", vector_json(dataset.true_scales.row(i))},
        {"split", tag},
    };
    out += dump_json(line);
    out += '\n';
  }
  return out;
}

NoisyDataset dataset_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset file is empty");
  const Json header = parse_json(line, "dataset header");
  NoisyDataset ds;
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  try {
    if (header.at("format_version").get<int>() != kFormatVersion)
      throw FormatError("unsupported dataset format_version");
    n = header.at("n").get<Eigen::Index>();
    d = header.at("d").get<Eigen::Index>();
    ds.num_classes = header.at("k").get<int>();
    ds.mode = label_mode_from_string(header.at("head_mode").get<std::string>());
    ds.seed = header.at("seed").get<std::uint64_t>();
    const Json& prof = header.at("profile");
    ds.profile.kind = noise_kind_from_string(prof.at("kind").get<std::string>());
    ds.profile.base_scale = prof.at("base_scale").get<double>();
    ds.profile.field.family = prof.at("scale_field").at("family").get<std::string>();
    for (const auto& [name, value] : prof.at("scale_field").at("params").items())
      ds.profile.field.params[name] = value.get<double>();
    ds.profile.validate();
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed dataset header: ") + e.what());
  } catch (const InvalidConfig& e) {
    throw FormatError(std::string("malformed dataset profile: ") + e.what());
  }
  if (n < 1 || d < 1 || ds.num_classes < 1) throw FormatError("dataset header has invalid sizes");

  const Eigen::Index label_cols = ds.mode == LabelMode::multiclass ? 1 : ds.num_classes;
  const auto k = static_cast<std::size_t>(ds.num_classes);
  ds.features.resize(n, d);
  ds.clean_labels.resize(n, label_cols);
  ds.noisy_labels.resize(n, label_cols);
  ds.true_scales.resize(n, ds.num_classes);
  Eigen::Index i = 0;
  bool tag_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (i >= n) throw FormatError("dataset has more samples than its header declares");
    const Json rec = parse_json(line, "dataset line " + std::to_string(i + 2));
    try {
      const auto feats = number_array(rec.at("features"), static_cast<std::size_t>(d), "features");
      const auto scales = number_array(rec.at("true_scales"), k, "true_scales");
      for (Eigen::Index j = 0; j < d; ++j) ds.features(i, j) = feats[static_cast<std::size_t>(j)];
      for (std::size_t c = 0; c < k; ++c) ds.true_scales(i, static_cast<Eigen::Index>(c)) = scales[c];
      read_label(rec.at("noisy_label"), ds.noisy_labels, i, ds.mode);
      const Json& clean = rec.at("clean_label");
      if (i == 0) ds.has_clean_labels = !clean.is_null();
      if (clean.is_null() == ds.has_clean_labels) throw FormatError("clean_label must be given for all samples or none");
      if (clean.is_null()) {
        ds.clean_labels.row(i) = ds.noisy_labels.row(i);
      } else {
        read_label(clean, ds.clean_labels, i, ds.mode);
      }
      const SplitTag tag = split_tag_from_string(rec.at("split").get<std::string>());
      if (tag_seen && tag != ds.split_tag) throw FormatError("dataset mixes split tags");
      ds.split_tag = tag;
      tag_seen = true;
    } catch (const Json::exception& e) {
      throw FormatError("malformed dataset line " + std::to_string(i + 2) + ": " + e.what());
    }
    ++i;
  }
  if (i != n) throw FormatError("dataset has fewer samples than its header declares");
  try {
    ds.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("invalid dataset: ") + e.what());
  }
  return ds;
}

}  // namespace hetnoise
