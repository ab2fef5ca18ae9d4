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

#include "hetnoise/noisegen.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace hetnoise {
namespace {

HetModel single_layer(int in, int k, HeadMode head) {
  MCConfig mc;
  mc.num_samples = 200;
  return make_model(in, {}, k, Activation::relu, head, mc, 0);
}

Batch random_batch(const HetModel& m, Eigen::Index n, std::uint64_t seed) {
  const CounterRng rng(seed, 1);
  Batch b;
  b.features.resize(n, m.input_dim());
  const int k = m.num_classes();
  const bool ml = label_mode(m.head_mode) == LabelMode::multilabel;
  b.labels.resize(n, ml ? k : 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < m.input_dim(); ++j) b.features(i, j) = rng.normal(static_cast<std::uint64_t>(i), j);
    if (ml) {
      for (int c = 0; c < k; ++c) b.labels(i, c) = static_cast<int>(rng.below(2, 1000 + i * k + c));
    } else {
      b.labels(i, 0) = static_cast<int>(rng.below(static_cast<std::uint64_t>(k), 1000 + i));
    }
    b.keys.push_back(static_cast<std::uint64_t>(i));
  }
  return b;
}

NoisyDataset separable(int n, std::uint64_t seed, int k = 2) {
  CleanTaskConfig cfg;
  cfg.n = n;
  cfg.num_classes = k;
  cfg.separation = 12.0;
  cfg.seed = seed;
  const CleanTask t = make_clean_task(cfg);
  return corrupt(t.features, t.clean_labels, t.true_logits, NoiseProfile::make(NoiseKind::uniform_flip, 0.0),
                 t.mode, k, seed);
}

double accuracy(const PredictionSet& p) {
  double hits = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) hits += p.predicted.row(i) == p.noisy_labels.row(i);
  return hits / static_cast<double>(p.size());
}

TEST(Forward, ZeroWeightsGiveUniformProbabilities) {
  HetModel m = single_layer(3, 2, HeadMode::multiclass);
  for (auto& l : m.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  // Scales are softplus(0), so symmetry holds in expectation; antithetic
  // pairs make it exact.
  const ProbOutput<double> out = forward(m, Vector::Ones(3), CounterRng(1, 0));
  EXPECT_NEAR(out.mean_probs(0), 0.5, 3.0 * std::sqrt(out.aleatoric(0) / 200.0));
  EXPECT_NEAR(out.mean_probs.sum(), 1.0, 1e-15);
  MCConfig anti = m.mc;
  anti.antithetic = true;
  const ProbOutput<double> paired = forward(m, Vector::Ones(3), CounterRng(1, 0), anti);
  EXPECT_NEAR(paired.mean_probs(0), 0.5, 1e-15);
  EXPECT_NEAR(paired.mean_probs(1), 0.5, 1e-15);
}

TEST(Forward, DeterministicHeadIsPlainSoftmax) {
  HetModel m = single_layer(2, 2, HeadMode::deterministic);
  m.layers[0].weight = Matrix::Identity(2, 2);
  m.layers[0].bias.setZero();
  const ProbOutput<double> out = forward(m, (Vector(2) << std::log(3.0), 0.0).finished(), CounterRng(1, 0));
  EXPECT_NEAR(out.mean_probs(0), 0.75, 1e-15);
  EXPECT_NEAR(out.mean_probs(1), 0.25, 1e-15);
  EXPECT_EQ(out.aleatoric.maxCoeff(), 0.0);
}

TEST(Forward, IsBitwiseReproducible) {
  const HetModel m = make_model(4, {8}, 3, Activation::tanh, HeadMode::multiclass, MCConfig{}, 5);
  const Vector x = Vector::LinSpaced(4, -1.0, 1.0);
  const ProbOutput<double> a = forward(m, x, CounterRng(9, 3));
  const ProbOutput<double> b = forward(m, x, CounterRng(9, 3));
  EXPECT_EQ(a.mean_probs, b.mean_probs);
  EXPECT_EQ(a.aleatoric, b.aleatoric);
}

TEST(Forward, RejectsWrongWidthAndNonFiniteInput) {
  const HetModel m = single_layer(3, 2, HeadMode::multiclass);
  EXPECT_THROW(forward(m, Vector::Ones(2), CounterRng(1, 0)), InvalidInput);
  Vector x = Vector::Ones(3);
  x(1) = NAN;
  EXPECT_THROW(forward(m, x, CounterRng(1, 0)), InvalidInput);
}

TEST(Forward, ScalesRespectTheFloor) {
  HetModel m = single_layer(2, 3, HeadMode::multiclass);
  m.layers[0].bias.tail(3).setConstant(-800.0);
  const LogitDistribution<double> d = logit_distribution(m, Vector::Ones(2));
  EXPECT_GE(d.scales.minCoeff(), kDefaultSigmaMin);
  EXPECT_GT(d.scales.minCoeff(), 0.0);
}

TEST(Loss, Examples) {
  const Eigen::VectorXi zero = Eigen::VectorXi::Constant(1, 0);
  const Eigen::VectorXi one = Eigen::VectorXi::Constant(1, 1);
  EXPECT_NEAR(loss((Vector(2) << 1.0 - kProbClamp, kProbClamp).finished(), zero, LabelMode::multiclass), 0.0, 1e-11);
  EXPECT_NEAR(loss((Vector(2) << 0.5, 0.5).finished(), one, LabelMode::multiclass), std::log(2.0), 1e-15);
  EXPECT_NEAR(loss((Vector(2) << 0.9, 0.2).finished(), (Eigen::VectorXi(2) << 1, 0).finished(), LabelMode::multilabel),
              -(std::log(0.9) + std::log(0.8)), 1e-14);
  EXPECT_NEAR(loss((Vector(2) << 0.9, 0.2).finished(), (Eigen::VectorXi(2) << 1, 0).finished(), LabelMode::multilabel),
              0.3285, 5e-5);
  // Clamp keeps the loss finite.
  EXPECT_NEAR(loss((Vector(2) << 1.0, 0.0).finished(), one, LabelMode::multiclass), -std::log(kProbClamp), 1e-9);
  EXPECT_THROW(loss((Vector(2) << 0.5, 0.5).finished(), Eigen::VectorXi::Constant(1, 2), LabelMode::multiclass),
               InvalidInput);
  EXPECT_THROW(loss((Vector(2) << 0.5, 0.5).finished(), (Eigen::VectorXi(2) << 1, 2).finished(), LabelMode::multilabel),
               InvalidInput);
}

TEST(Gradient, NearZeroScaleReducesToSoftmaxCrossEntropy) {
  HetModel m = single_layer(3, 3, HeadMode::multiclass);
  m.layers[0].weight.bottomRows(3).setZero();
  m.layers[0].bias.tail(3).setConstant(-60.0);
  const Batch b = random_batch(m, 6, 2);
  const LossAndGradient lg = loss_and_grad(m, b, 11, 16);
  Matrix want = Matrix::Zero(3, 3);
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const Vector x = b.features.row(i).transpose();
    Vector p = softmax(m.layers[0].weight.topRows(3) * x + m.layers[0].bias.head(3));
    p(b.labels(i, 0)) -= 1.0;
    want += p * x.transpose();
  }
  want /= static_cast<double>(b.size());
  EXPECT_LT((lg.gradient[0].weight.topRows(3) - want).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_LT(lg.gradient[0].weight.bottomRows(3).cwiseAbs().maxCoeff(), 1e-12);
}

double max_relative_fd_error(const HetModel& model, const Batch& batch, std::uint64_t draw_seed, int s) {
  const LossAndGradient lg = loss_and_grad(model, batch, draw_seed, s);
  const Vector analytic = flatten(lg.gradient);
  const Vector theta = flatten(model.layers);
  HetModel probe = model;
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    Vector t = theta;
    t(j) += h;
    unflatten(t, probe.layers);
    const double up = batch_loss(probe, batch, draw_seed, s);
    t(j) -= 2 * h;
    unflatten(t, probe.layers);
    const double down = batch_loss(probe, batch, draw_seed, s);
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic(j)), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic(j)) / scale);
  }
  return worst;
}

TEST(Gradient, MatchesCentralFiniteDifferencesForEveryHead) {
  int seed = 0;
  for (HeadMode head :
       {HeadMode::multiclass, HeadMode::multilabel, HeadMode::deterministic, HeadMode::deterministic_multilabel}) {
    for (Activation act : {Activation::tanh, Activation::relu}) {
      MCConfig mc;
      mc.temperature = seed % 2 ? 0.7 : 1.0;
      const HetModel m = make_model(3, {5}, 3, act, head, mc, static_cast<std::uint64_t>(++seed));
      ASSERT_LE(flatten(m.layers).size(), 200);
      const Batch b = random_batch(m, 4, static_cast<std::uint64_t>(seed));
      EXPECT_LT(max_relative_fd_error(m, b, 100 + seed, 8), 1e-4) << to_string(head) << " " << to_string(act);
    }
  }
}

TEST(Gradient, SmallModelMatchesFiniteDifferencesAcrossTemperatures) {
  for (double tau : {0.1, 0.5, 2.0, 5.0}) {
    MCConfig mc;
    mc.temperature = tau;
    const HetModel m = make_model(2, {4}, 2, Activation::tanh, HeadMode::multiclass, mc, 3);
    ASSERT_LE(flatten(m.layers).size(), 50);
    const Batch b = random_batch(m, 5, 4);
    EXPECT_LT(max_relative_fd_error(m, b, 7, 32), 1e-4) << tau;
  }
}

TEST(Gradient, DuplicatingTheBatchLeavesItUnchanged) {
  const HetModel m = make_model(3, {4}, 3, Activation::tanh, HeadMode::multiclass, MCConfig{}, 2);
  const Batch b = random_batch(m, 5, 3);
  Batch twice;
  twice.features.resize(10, 3);
  twice.features << b.features, b.features;
  twice.labels.resize(10, 1);
  twice.labels << b.labels, b.labels;
  twice.keys = b.keys;
  twice.keys.insert(twice.keys.end(), b.keys.begin(), b.keys.end());
  const Vector g1 = flatten(loss_and_grad(m, b, 5, 16).gradient);
  const Vector g2 = flatten(loss_and_grad(m, twice, 5, 16).gradient);
  EXPECT_LT((g1 - g2).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Gradient, NonFiniteGradientNamesTheParameter) {
  HetModel m = single_layer(2, 2, HeadMode::multiclass);
  Batch b = random_batch(m, 2, 1);
  b.features(0, 1) = 1e308;
  try {
    loss_and_grad(m, b, 1, 4);
    FAIL() << "expected a training failure";
  } catch (const TrainingFailure& e) {
    EXPECT_EQ(e.parameter_path().rfind("layers[0].", 0), 0u) << e.parameter_path();
  } catch (const InvalidInput&) {
  }
}

TEST(Parameters, FlattenRoundTripAndPaths) {
  const HetModel m = make_model(2, {3}, 2, Activation::relu, HeadMode::multiclass, MCConfig{}, 1);
  Parameters copy = m.layers;
  for (auto& l : copy) {
    l.weight.setZero();
    l.bias.setZero();
  }
  unflatten(flatten(m.layers), copy);
  EXPECT_EQ(copy[1].weight, m.layers[1].weight);
  EXPECT_EQ(parameter_path(m.layers, 0), "layers[0].weight[0][0]");
  EXPECT_EQ(parameter_path(m.layers, 3), "layers[0].weight[1][1]");
  EXPECT_EQ(parameter_path(m.layers, 6), "layers[0].bias[0]");
  EXPECT_EQ(parameter_path(m.layers, 9), "layers[1].weight[0][0]");
  EXPECT_THROW(unflatten(Vector::Zero(3), copy), InvalidInput);
}

TEST(Fit, SeparableDataReachesNearPerfectAccuracy) {
  const NoisyDataset data = separable(400, 3);
  const HetModel m = make_model(2, {8}, 2, Activation::relu, HeadMode::deterministic, MCConfig{}, 1);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 20;
  const FitResult r = fit(m, data, cfg);
  EXPECT_GE(accuracy(predict_dataset(r.model, data, MCConfig{})), 0.99);
  EXPECT_EQ(r.log.size(), 20u);
}

TEST(Fit, TrainLossDecreasesForEverySeed) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const NoisyDataset data = separable(200, 10 + seed);
    MCConfig mc;
    mc.num_samples = 16;
    const HetModel m = make_model(2, {8}, 2, Activation::relu, HeadMode::multiclass, mc, seed);
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 5;
    cfg.seed = seed;
    cfg.train_mc_samples = 16;
    Batch all{data.features, data.noisy_labels, {}};
    for (Eigen::Index i = 0; i < data.size(); ++i) all.keys.push_back(static_cast<std::uint64_t>(i));
    const double before = batch_loss(m, all, 99, 64);
    const double after = batch_loss(fit(m, data, cfg).model, all, 99, 64);
    EXPECT_LT(after, before) << seed;
  }
}

TEST(Fit, IsDeterministicGivenTheSeed) {
  const NoisyDataset data = separable(100, 4, 3);
  MCConfig mc;
  mc.num_samples = 8;
  const HetModel m = make_model(2, {6}, 3, Activation::tanh, HeadMode::multiclass, mc, 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.train_mc_samples = 8;
  cfg.seed = 17;
  const FitResult a = fit(m, data, cfg);
  const FitResult b = fit(m, data, cfg);
  EXPECT_EQ(flatten(a.model.layers), flatten(b.model.layers));
  EXPECT_EQ(training_log_to_csv(a.log), training_log_to_csv(b.log));
  cfg.seed = 18;
  EXPECT_NE(flatten(fit(m, data, cfg).model.layers), flatten(a.model.layers));
}

TEST(Fit, ZeroLearningRateLeavesParametersUnchanged) {
  const NoisyDataset data = separable(50, 4);
  const HetModel m = make_model(2, {4}, 2, Activation::relu, HeadMode::multiclass, MCConfig{}, 2);
  for (OptimizerKind opt : {OptimizerKind::sgd, OptimizerKind::adam}) {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 2;
    cfg.optimizer = opt;
    cfg.train_mc_samples = 4;
    EXPECT_EQ(flatten(fit(m, data, cfg).model.layers), flatten(m.layers));
  }
}

TEST(Fit, RejectsBadInputs) {
  const NoisyDataset data = separable(50, 4);
  const HetModel wide = make_model(3, {4}, 2, Activation::relu, HeadMode::multiclass, MCConfig{}, 2);
  EXPECT_THROW(fit(wide, data, TrainConfig{}), InvalidInput);
  const HetModel m = make_model(2, {4}, 2, Activation::relu, HeadMode::multiclass, MCConfig{}, 2);
  EXPECT_THROW(fit(m, data.subset({}, SplitTag::train), TrainConfig{}), InvalidInput);
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(fit(m, data, cfg), InvalidConfig);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(fit(m, data, cfg), InvalidConfig);
  cfg = {};
  cfg.learning_rate = -1.0;
  EXPECT_THROW(fit(m, data, cfg), InvalidConfig);
}

TEST(Fit, TrainingLogCsvLayout) {
  EXPECT_EQ(training_log_to_csv({{1, 0.5}, {2, 0.25}}), "epoch,train_loss\n1,0.5\n2,0.25\n");
}

TEST(Predict, DeterministicHeadHasZeroUncertainty) {
  const NoisyDataset data = separable(60, 2, 3);
  const HetModel m = make_model(2, {4}, 3, Activation::relu, HeadMode::deterministic, MCConfig{}, 2);
  const PredictionSet p = predict_dataset(m, data, MCConfig{});
  EXPECT_EQ(p.uncertainty.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(p.aleatoric.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Predict, NegligibleScalesMatchTheDeterministicHead) {
  const NoisyDataset data = separable(80, 5, 3);
  HetModel prob = make_model(2, {}, 3, Activation::relu, HeadMode::multiclass, MCConfig{}, 4);
  prob.layers[0].weight.bottomRows(3).setZero();
  prob.layers[0].bias.tail(3).setConstant(-60.0);
  HetModel det = make_model(2, {}, 3, Activation::relu, HeadMode::deterministic, MCConfig{}, 4);
  det.layers[0].weight = prob.layers[0].weight.topRows(3);
  det.layers[0].bias = prob.layers[0].bias.head(3);
  MCConfig mc;
  mc.num_samples = 50;
  const PredictionSet a = predict_dataset(prob, data, mc);
  const PredictionSet b = predict_dataset(det, data, mc);
  EXPECT_EQ(a.predicted, b.predicted);
  EXPECT_LT((a.probs - b.probs).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Predict, IsReproducibleAndUsesArgmaxOrThreshold) {
  const NoisyDataset data = separable(40, 6, 3);
  const HetModel m = make_model(2, {4}, 3, Activation::tanh, HeadMode::multiclass, MCConfig{}, 4);
  MCConfig mc;
  mc.num_samples = 100;
  mc.seed = 3;
  const PredictionSet a = predict_dataset(m, data, mc);
  const PredictionSet b = predict_dataset(m, data, mc);
  EXPECT_EQ(a.probs, b.probs);
  EXPECT_EQ(a.uncertainty, b.uncertainty);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    Eigen::Index best;
    a.probs.row(i).maxCoeff(&best);
    EXPECT_EQ(a.predicted(i, 0), best);
    EXPECT_EQ(a.uncertainty(i), a.aleatoric(i, best));
  }

  CleanTaskConfig cfg;
  cfg.n = 30;
  cfg.num_classes = 3;
  cfg.mode = LabelMode::multilabel;
  const CleanTask t = make_clean_task(cfg);
  const NoisyDataset ml = corrupt(t.features, t.clean_labels, t.true_logits,
                                  NoiseProfile::make(NoiseKind::uniform_flip, 0.5), t.mode, 3, 1);
  const HetModel mm = make_model(2, {4}, 3, Activation::tanh, HeadMode::multilabel, MCConfig{}, 4);
  const PredictionSet p = predict_dataset(mm, ml, mc);
  for (Eigen::Index i = 0; i < p.size(); ++i)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(p.predicted(i, c), p.probs(i, c) > 0.5 ? 1 : 0);
}

TEST(ModelJson, RoundTripIsByteIdentical) {
  for (HeadMode head : {HeadMode::multiclass, HeadMode::multilabel, HeadMode::deterministic}) {
    MCConfig mc;
    mc.temperature = 0.3;
    mc.num_samples = 77;
    mc.seed = 12345678901234567ULL;
    mc.antithetic = true;
    const HetModel m = make_model(3, {5, 4}, 2, Activation::tanh, head, mc, 9);
    const std::string text = serialize_model(m);
    const HetModel back = deserialize_model(text);
    EXPECT_EQ(serialize_model(back), text);
    EXPECT_EQ(flatten(back.layers), flatten(m.layers));
    EXPECT_EQ(back.mc.seed, mc.seed);
    EXPECT_EQ(back.mc.temperature, 0.3);
  }
}

TEST(ModelJson, RejectsInconsistentDocuments) {
  const HetModel m = make_model(2, {3}, 2, Activation::relu, HeadMode::multiclass, MCConfig{}, 1);
  Json doc = model_to_json(m);
  doc["layer_dims"][2] = 2;
  EXPECT_THROW(model_from_json(doc), FormatError);
  doc = model_to_json(m);
  doc["format_version"] = 99;
  EXPECT_THROW(model_from_json(doc), FormatError);
  doc = model_to_json(m);
  doc["scale_transform"] = "exp";
  EXPECT_THROW(model_from_json(doc), FormatError);
  EXPECT_THROW(deserialize_model("[]"), FormatError);
}

}  // namespace
}  // namespace hetnoise
