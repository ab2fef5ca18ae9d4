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

#include <cmath>

namespace hetnoise {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw InvalidConfig("unknown activation '" + name + "'");
}

std::string to_string(HeadMode m) {
  switch (m) {
    case HeadMode::multiclass: return "multiclass";
    case HeadMode::multilabel: return "multilabel";
    case HeadMode::deterministic: return "deterministic";
    case HeadMode::deterministic_multilabel: return "deterministic_multilabel";
  }
  throw InvalidConfig("unknown head mode");
}

HeadMode head_mode_from_string(const std::string& name) {
  for (HeadMode m : {HeadMode::multiclass, HeadMode::multilabel, HeadMode::deterministic,
                     HeadMode::deterministic_multilabel}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidConfig("unknown head mode '" + name + "'");
}

bool is_probabilistic(HeadMode mode) { return mode == HeadMode::multiclass || mode == HeadMode::multilabel; }

LabelMode label_mode(HeadMode mode) {
  return (mode == HeadMode::multilabel || mode == HeadMode::deterministic_multilabel) ? LabelMode::multilabel
                                                                                     : LabelMode::multiclass;
}

int HetModel::num_classes() const {
  const int out = layer_dims.back();
  return is_probabilistic(head_mode) ? out / 2 : out;
}

void HetModel::validate() const {
  if (layer_dims.size() < 2) throw InvalidConfig("model needs an input and an output width");
  for (int w : layer_dims) {
    if (w < 1) throw InvalidConfig("layer widths must be positive");
  }
  if (is_probabilistic(head_mode) && layer_dims.back() % 2 != 0)
    throw InvalidConfig("probabilistic head needs an even output width (K means, K scales)");
  if (layers.size() + 1 != layer_dims.size()) throw InvalidConfig("layer count does not match layer_dims");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].weight.rows() != layer_dims[l + 1] || layers[l].weight.cols() != layer_dims[l] ||
        layers[l].bias.size() != layer_dims[l + 1])
      throw InvalidConfig("layer " + std::to_string(l) + " has the wrong shape");
    if (!layers[l].weight.allFinite() || !layers[l].bias.allFinite())
      throw InvalidInput("layer " + std::to_string(l) + " has non-finite parameters");
  }
  if (!(sigma_min > 0.0)) throw InvalidConfig("sigma_min must be positive");
  mc.validate();
}

HetModel make_model(int input_dim, const std::vector<int>& hidden, int num_classes, Activation activation,
                    HeadMode head_mode, const MCConfig& mc, std::uint64_t init_seed) {
  if (num_classes < 1) throw InvalidConfig("num_classes must be >= 1");
  HetModel m;
  m.layer_dims.push_back(input_dim);
  m.layer_dims.insert(m.layer_dims.end(), hidden.begin(), hidden.end());
  m.layer_dims.push_back(is_probabilistic(head_mode) ? 2 * num_classes : num_classes);
  m.activation = activation;
  m.head_mode = head_mode;
  m.mc = mc;
  for (int w : m.layer_dims) {
    if (w < 1) throw InvalidConfig("layer widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
    const int in = m.layer_dims[l];
    const int out = m.layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    const CounterRng rng(init_seed, l);
    DenseLayer layer{Matrix(out, in), Vector::Zero(out)};
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c)
        layer.weight(r, c) = (2.0 * rng.uniform(static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(c)) - 1.0) * limit;
    }
    m.layers.push_back(std::move(layer));
  }
  m.validate();
  return m;
}

Vector network_output(const HetModel& model, const Vector& features) {
  if (features.size() != model.input_dim())
    throw InvalidInput("feature width " + std::to_string(features.size()) + " does not match model input " +
                       std::to_string(model.input_dim()));
  Vector a = features;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Vector z = model.layers[l].weight * a + model.layers[l].bias;
    if (l + 1 < model.layers.size()) {
      a = model.activation == Activation::relu ? Vector(z.cwiseMax(0.0)) : Vector(z.array().tanh().matrix());
    } else {
      a = std::move(z);
    }
  }
  if (!a.allFinite()) throw InvalidInput("network produced non-finite activations");
  return a;
}

LogitDistribution<double> logit_distribution(const HetModel& model, const Vector& features) {
  if (!is_probabilistic(model.head_mode)) throw InvalidConfig("deterministic head has no logit distribution");
  const Vector raw = network_output(model, features);
  const Eigen::Index k = model.num_classes();
  LogitDistribution<double> dist{raw.head(k), Vector(k)};
  for (Eigen::Index c = 0; c < k; ++c) dist.scales(c) = softplus(raw(k + c)) + model.sigma_min;
  return dist;
}

ProbOutput<double> forward(const HetModel& model, const Vector& features, const CounterRng& rng,
                           const MCConfig& mc) {
  if (!is_probabilistic(model.head_mode)) {
    const Vector raw = network_output(model, features);
    ProbOutput<double> out;
    if (model.head_mode == HeadMode::deterministic) {
      out.mean_probs = softmax(raw);
    } else {
      out.mean_probs = raw.unaryExpr([](double x) { return sigmoid(x); });
    }
    out.aleatoric = Vector::Zero(raw.size());
    return out;
  }
  const LogitDistribution<double> dist = logit_distribution(model, features);
  return model.head_mode == HeadMode::multiclass ? tempered_mc_softmax(dist, mc, rng)
                                                 : tempered_mc_sigmoid(dist, mc, rng);
}

ProbOutput<double> forward(const HetModel& model, const Vector& features, const CounterRng& rng) {
  return forward(model, features, rng, model.mc);
}

double loss(const Vector& mean_probs, const Eigen::VectorXi& label, LabelMode mode) {
  auto clamp = [](double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); };
  const Eigen::Index k = mean_probs.size();
  if (mode == LabelMode::multiclass) {
    if (label.size() != 1 || label(0) < 0 || label(0) >= k) throw InvalidInput("invalid class label");
    return -std::log(clamp(mean_probs(label(0))));
  }
  if (label.size() != k) throw InvalidInput("multi-hot label length differs from class count");
  double total = 0.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    if (label(c) != 0 && label(c) != 1) throw InvalidInput("multi-hot label entries must be 0 or 1");
    const double p = clamp(mean_probs(c));
    total -= label(c) == 1 ? std::log(p) : std::log1p(-p);
  }
  return total;
}

Vector flatten(const Parameters& params) {
  Eigen::Index total = 0;
  for (const auto& l : params) total += l.weight.size() + l.bias.size();
  Vector flat(total);
  Eigen::Index at = 0;
  for (const auto& l : params) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat(at++) = l.weight(r, c);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat(at++) = l.bias(r);
  }
  return flat;
}

void unflatten(const Vector& flat, Parameters& params) {
  Eigen::Index at = 0;
  for (auto& l : params) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        if (at >= flat.size()) throw InvalidInput("flat parameter vector too short");
        l.weight(r, c) = flat(at++);
      }
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      if (at >= flat.size()) throw InvalidInput("flat parameter vector too short");
      l.bias(r) = flat(at++);
    }
  }
  if (at != flat.size()) throw InvalidInput("flat parameter vector too long");
}

std::string parameter_path(const Parameters& params, Eigen::Index flat_index) {
  Eigen::Index at = flat_index;
  for (std::size_t l = 0; l < params.size(); ++l) {
    const auto& layer = params[l];
    if (at < layer.weight.size()) {
      const Eigen::Index cols = layer.weight.cols();
      return "layers[" + std::to_string(l) + "].weight[" + std::to_string(at / cols) + "][" +
             std::to_string(at % cols) + "]";
    }
    at -= layer.weight.size();
    if (at < layer.bias.size()) return "layers[" + std::to_string(l) + "].bias[" + std::to_string(at) + "]";
    at -= layer.bias.size();
  }
  throw std::out_of_range("flat parameter index out of range");
}

}  // namespace hetnoise
