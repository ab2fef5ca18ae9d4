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

#include "hetnoise/train.hpp"

namespace hetnoise {
namespace {

constexpr const char* kScaleTransform = "softplus_plus_eps";

std::vector<double> read_numbers(const Json& node, std::size_t expected, const std::string& what) {
  if (!node.is_array() || node.size() != expected)
    throw FormatError(what + " must hold " + std::to_string(expected) + " numbers");
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : node) {
    if (!v.is_number()) throw FormatError(what + " must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

Json model_to_json(const HetModel& model) {
  model.validate();
  Json layers = Json::array();
  for (const auto& layer : model.layers) {
    Json weight = Json::array();
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) weight.push_back(layer.weight(r, c));
    }
    Json bias = Json::array();
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) bias.push_back(layer.bias(r));
    layers.push_back({{"weight", weight}, {"bias", bias}});
  }
  return {
      {"format_version", kFormatVersion},
      {"head_mode", to_string(model.head_mode)},
      {"layer_dims", model.layer_dims},
      {"activation", to_string(model.activation)},
      {"scale_transform", kScaleTransform},
      {"sigma_min", model.sigma_min},
      {"mc_config",
       {{"temperature", model.mc.temperature},
        {"num_samples", model.mc.num_samples},
        {"seed", model.mc.seed},
        {"antithetic", model.mc.antithetic}}},
      {"layers", layers},
  };
}

HetModel model_from_json(const Json& doc) {
  HetModel m;
  try {
    if (doc.at("format_version").get<int>() != kFormatVersion) throw FormatError("unsupported model format_version");
    if (doc.at("scale_transform").get<std::string>() != kScaleTransform)
      throw FormatError("unsupported scale_transform");
    m.head_mode = head_mode_from_string(doc.at("head_mode").get<std::string>());
    m.layer_dims = doc.at("layer_dims").get<std::vector<int>>();
    m.activation = activation_from_string(doc.at("activation").get<std::string>());
    m.sigma_min = doc.at("sigma_min").get<double>();
    const Json& mc = doc.at("mc_config");
    m.mc.temperature = mc.at("temperature").get<double>();
    m.mc.num_samples = mc.at("num_samples").get<int>();
    m.mc.seed = mc.at("seed").get<std::uint64_t>();
    m.mc.antithetic = mc.at("antithetic").get<bool>();
    const Json& layers = doc.at("layers");
    if (!layers.is_array() || layers.size() + 1 != m.layer_dims.size())
      throw FormatError("layer list does not match layer_dims");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const int in = m.layer_dims[l];
      const int out = m.layer_dims[l + 1];
      if (in < 1 || out < 1) throw FormatError("layer widths must be positive");
      const std::string where = "layers[" + std::to_string(l) + "]";
      const auto w = read_numbers(layers[l].at("weight"), static_cast<std::size_t>(in) * out, where + ".weight");
      const auto b = read_numbers(layers[l].at("bias"), static_cast<std::size_t>(out), where + ".bias");
      DenseLayer layer{Matrix(out, in), Vector(out)};
      for (int r = 0; r < out; ++r) {
        for (int c = 0; c < in; ++c) layer.weight(r, c) = w[static_cast<std::size_t>(r) * in + c];
        layer.bias(r) = b[static_cast<std::size_t>(r)];
      }
      m.layers.push_back(std::move(layer));
    }
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed model document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid model document: ") + e.what());
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid model document: ") + e.what());
  }
  return m;
}

std::string serialize_model(const HetModel& model) { return dump_json(model_to_json(model), 2) + "\n"; }

HetModel deserialize_model(const std::string& text) { return model_from_json(parse_json(text, "model document")); }

}  // namespace hetnoise
