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

#include "hetnoise/common.hpp"
#include "hetnoise/eval.hpp"
#include "hetnoise/json_io.hpp"
#include "hetnoise/noisegen.hpp"
#include "hetnoise/prob_head.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hetnoise {

enum class Activation { relu, tanh };

/// Output head. The probabilistic heads emit K means and K raw scales; the
/// deterministic heads emit K logits and skip Monte Carlo sampling.
enum class HeadMode { multiclass, multilabel, deterministic, deterministic_multilabel };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);
std::string to_string(HeadMode m);
HeadMode head_mode_from_string(const std::string& name);

bool is_probabilistic(HeadMode mode);
LabelMode label_mode(HeadMode mode);

// Lower bound added to softplus(raw scale).
inline constexpr double kDefaultSigmaMin = 1e-6;
// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before logs.
inline constexpr double kProbClamp = 1e-12;

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
};

using Parameters = std::vector<DenseLayer>;

/// Dense feed-forward network with a probabilistic or deterministic head.
struct HetModel {
  std::vector<int> layer_dims;  // input, hidden..., output
  Parameters layers;
  Activation activation = Activation::relu;
  HeadMode head_mode = HeadMode::multiclass;
  double sigma_min = kDefaultSigmaMin;
  MCConfig mc;

  int input_dim() const { return layer_dims.front(); }
  int num_classes() const;
  void validate() const;
};

/// Glorot-uniform weights and zero biases drawn from `init_seed`. The
/// output width is 2K for probabilistic heads and K for deterministic ones.
HetModel make_model(int input_dim, const std::vector<int>& hidden, int num_classes, Activation activation,
                    HeadMode head_mode, const MCConfig& mc, std::uint64_t init_seed);

// Raw outputs of the last layer.
Vector network_output(const HetModel& model, const Vector& features);

// Means and softplus-floored scales for a probabilistic head.
LogitDistribution<double> logit_distribution(const HetModel& model, const Vector& features);

/// Predictive probabilities for one input. Probabilistic heads sample
/// `mc.num_samples` draws from `rng` and apply the tempered softmax or
/// sigmoid; deterministic heads return softmax/sigmoid of the raw outputs
/// with zero aleatoric variance.
ProbOutput<double> forward(const HetModel& model, const Vector& features, const CounterRng& rng,
                           const MCConfig& mc);
ProbOutput<double> forward(const HetModel& model, const Vector& features, const CounterRng& rng);

/// Cross-entropy of mean probabilities. Multi-class labels are a single
/// index, multi-label labels a 0/1 vector of length K.
double loss(const Vector& mean_probs, const Eigen::VectorXi& label, LabelMode mode);

struct Batch {
  Matrix features;
  IndexMatrix labels;
  // Row i draws its Monte Carlo normals from CounterRng(draw_seed, keys[i]).
  std::vector<std::uint64_t> keys;

  Eigen::Index size() const { return features.rows(); }
};

struct LossAndGradient {
  double loss = 0.0;
  Parameters gradient;
};

/// Mean batch loss and its reverse-mode gradient. Each row uses one fixed
/// set of normal draws for both passes, so the gradient is the pathwise
/// derivative of exactly the loss reported.
LossAndGradient loss_and_grad(const HetModel& model, const Batch& batch, std::uint64_t draw_seed,
                              int mc_samples);
double batch_loss(const HetModel& model, const Batch& batch, std::uint64_t draw_seed, int mc_samples);

Vector flatten(const Parameters& params);
void unflatten(const Vector& flat, Parameters& params);
std::string parameter_path(const Parameters& params, Eigen::Index flat_index);

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 10;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  int train_mc_samples = 1000;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
};

struct FitResult {
  HetModel model;
  std::vector<EpochLog> log;
};

/// Minibatch training on the noisy labels. Deterministic given cfg.seed:
/// shuffles and Monte Carlo draws are keyed by (seed, epoch/step, sample).
FitResult fit(const HetModel& model, const NoisyDataset& train_set, const TrainConfig& cfg);

// Per-epoch loss log as "epoch,train_loss" CSV.
std::string training_log_to_csv(const std::vector<EpochLog>& log);

/// Predictions for every sample, scored against the noisy labels. Sample i
/// draws from CounterRng(mc.seed, i).
PredictionSet predict_dataset(const HetModel& model, const NoisyDataset& data, const MCConfig& mc);

// Recomputes per-sample losses against the requested labels.
void rescore(PredictionSet& preds, EvalTarget target);

Json model_to_json(const HetModel& model);
HetModel model_from_json(const Json& doc);
std::string serialize_model(const HetModel& model);
HetModel deserialize_model(const std::string& text);

}  // namespace hetnoise
