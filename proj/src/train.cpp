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

#include "hetnoise/parallel.hpp"
#include "hetnoise/train.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace hetnoise {
namespace {

constexpr std::uint64_t kShuffleLabel = 0x5ff1e;
constexpr std::uint64_t kStepLabel = 0x57e9;

struct SampleResult {
  double loss = 0.0;
  Parameters gradient;
};

// dL/dp for the clamped cross-entropy; zero where the clamp is active.
Vector loss_gradient_wrt_probs(const Vector& probs, const Eigen::VectorXi& label, LabelMode mode) {
  const Eigen::Index k = probs.size();
  Vector g = Vector::Zero(k);
  auto inside = [](double p) { return p > kProbClamp && p < 1.0 - kProbClamp; };
  if (mode == LabelMode::multiclass) {
    const Eigen::Index y = label(0);
    if (inside(probs(y))) g(y) = -1.0 / probs(y);
    return g;
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (!inside(probs(c))) continue;
    g(c) = label(c) == 1 ? -1.0 / probs(c) : 1.0 / (1.0 - probs(c));
  }
  return g;
}

// Loss and dL/d(raw output) for one row.
double head_backward(const HetModel& model, const Vector& raw, const Eigen::VectorXi& label,
                     const CounterRng& rng, int mc_samples, Vector& d_raw) {
  const LabelMode mode = label_mode(model.head_mode);
  const Eigen::Index k = model.num_classes();
  d_raw = Vector::Zero(raw.size());

  if (!is_probabilistic(model.head_mode)) {
    Vector p;
    if (mode == LabelMode::multiclass) {
      p = softmax(raw);
    } else {
      p = raw.unaryExpr([](double x) { return sigmoid(x); });
    }
    const Vector g = loss_gradient_wrt_probs(p, label, mode);
    if (mode == LabelMode::multiclass) {
      d_raw = (p.array() * (g.array() - p.dot(g))).matrix();
    } else {
      d_raw = (g.array() * p.array() * (1.0 - p.array())).matrix();
    }
    return loss(p, label, mode);
  }

  LogitDistribution<double> dist{raw.head(k), Vector(k)};
  for (Eigen::Index c = 0; c < k; ++c) dist.scales(c) = softplus(raw(k + c)) + model.sigma_min;
  const Matrix draws = standard_normal_draws<double>(rng, mc_samples, k, model.mc.antithetic);
  const double tau = model.mc.temperature;
  const ProbOutput<double> out = tempered_mc_probs(
      dist, tau, draws, mode == LabelMode::multiclass ? OutputLink::softmax : OutputLink::sigmoid, true);
  const Matrix& p = *out.per_sample_probs;
  const Vector g = loss_gradient_wrt_probs(out.mean_probs, label, mode);
  const double inv_s = 1.0 / static_cast<double>(mc_samples);

  // dL/d(tempered logit) per Monte Carlo row.
  Matrix d_logit(mc_samples, k);
  if (mode == LabelMode::multiclass) {
    const Vector pg = p * g;
    for (int s = 0; s < mc_samples; ++s) {
      d_logit.row(s) = (p.row(s).array() * (g.transpose().array() - pg(s))) * inv_s;
    }
  } else {
    d_logit = ((p.array() * (1.0 - p.array())).rowwise() * g.transpose().array()) * inv_s;
  }
  const Vector d_mean = d_logit.colwise().sum().transpose() / tau;
  const Vector d_sigma = d_logit.cwiseProduct(draws).colwise().sum().transpose() / tau;
  d_raw.head(k) = d_mean;
  for (Eigen::Index c = 0; c < k; ++c) d_raw(k + c) = d_sigma(c) * sigmoid(raw(k + c));
  return loss(out.mean_probs, label, mode);
}

SampleResult sample_loss_and_grad(const HetModel& model, const Vector& x, const Eigen::VectorXi& label,
                                  const CounterRng& rng, int mc_samples, bool want_gradient) {
  const std::size_t n_layers = model.layers.size();
  std::vector<Vector> acts(n_layers + 1);
  std::vector<Vector> pre(n_layers);
  acts[0] = x;
  for (std::size_t l = 0; l < n_layers; ++l) {
    pre[l] = model.layers[l].weight * acts[l] + model.layers[l].bias;
    if (l + 1 < n_layers) {
      acts[l + 1] = model.activation == Activation::relu ? Vector(pre[l].cwiseMax(0.0))
                                                         : Vector(pre[l].array().tanh().matrix());
    } else {
      acts[l + 1] = pre[l];
    }
  }
  if (!acts[n_layers].allFinite()) throw InvalidInput("network produced non-finite activations");

  SampleResult result;
  Vector delta;
  result.loss = head_backward(model, acts[n_layers], label, rng, mc_samples, delta);
  if (!want_gradient) return result;

  result.gradient.resize(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    result.gradient[l].weight = delta * acts[l].transpose();
    result.gradient[l].bias = delta;
    if (l == 0) break;
    Vector back = model.layers[l].weight.transpose() * delta;
    if (model.activation == Activation::relu) {
      delta = (pre[l - 1].array() > 0.0).select(back, 0.0);
    } else {
      delta = (back.array() * (1.0 - acts[l].array().square())).matrix();
    }
  }
  return result;
}

void check_batch(const HetModel& model, const Batch& batch) {
  if (batch.size() < 1) throw InvalidInput("batch is empty");
  if (batch.features.cols() != model.input_dim()) throw InvalidInput("batch feature width does not match model");
  if (batch.labels.rows() != batch.size() || static_cast<Eigen::Index>(batch.keys.size()) != batch.size())
    throw InvalidInput("batch columns have different lengths");
}

Eigen::VectorXi label_row(const IndexMatrix& labels, Eigen::Index i) { return labels.row(i).transpose(); }

}  // namespace

LossAndGradient loss_and_grad(const HetModel& model, const Batch& batch, std::uint64_t draw_seed,
                              int mc_samples) {
  check_batch(model, batch);
  if (mc_samples < 1) throw InvalidConfig("mc_samples must be >= 1");
  const auto n = static_cast<std::size_t>(batch.size());
  std::vector<SampleResult> per_sample(n);
  parallel_for(n, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    per_sample[i] = sample_loss_and_grad(model, batch.features.row(row).transpose(), label_row(batch.labels, row),
                                         CounterRng(draw_seed, batch.keys[i]), mc_samples, true);
  });

  LossAndGradient out;
  out.gradient.resize(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    out.gradient[l].weight = Matrix::Zero(model.layers[l].weight.rows(), model.layers[l].weight.cols());
    out.gradient[l].bias = Vector::Zero(model.layers[l].bias.size());
  }
  // Fixed index order keeps the sum independent of scheduling.
  for (const auto& r : per_sample) {
    out.loss += r.loss;
    for (std::size_t l = 0; l < r.gradient.size(); ++l) {
      out.gradient[l].weight += r.gradient[l].weight;
      out.gradient[l].bias += r.gradient[l].bias;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss *= inv_n;
  for (auto& g : out.gradient) {
    g.weight *= inv_n;
    g.bias *= inv_n;
  }
  const Vector flat = flatten(out.gradient);
  for (Eigen::Index j = 0; j < flat.size(); ++j) {
    if (!std::isfinite(flat(j))) throw TrainingFailure("non-finite gradient", parameter_path(out.gradient, j));
  }
  return out;
}

double batch_loss(const HetModel& model, const Batch& batch, std::uint64_t draw_seed, int mc_samples) {
  check_batch(model, batch);
  if (mc_samples < 1) throw InvalidConfig("mc_samples must be >= 1");
  const auto n = static_cast<std::size_t>(batch.size());
  std::vector<double> losses(n);
  parallel_for(n, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    losses[i] = sample_loss_and_grad(model, batch.features.row(row).transpose(), label_row(batch.labels, row),
                                     CounterRng(draw_seed, batch.keys[i]), mc_samples, false)
                    .loss;
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(n);
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InvalidConfig("learning_rate must be >= 0");
  if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
  if (epochs < 1) throw InvalidConfig("epochs must be >= 1");
  if (train_mc_samples < 1) throw InvalidConfig("train_mc_samples must be >= 1");
  if (optimizer == OptimizerKind::adam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
      throw InvalidConfig("adam needs beta1, beta2 in [0, 1) and epsilon > 0");
  }
}

FitResult fit(const HetModel& model, const NoisyDataset& train_set, const TrainConfig& cfg) {
  model.validate();
  cfg.validate();
  if (train_set.size() < 1) throw InvalidInput("training set is empty");
  train_set.validate();
  if (train_set.dim() != model.input_dim()) throw InvalidInput("dataset feature width does not match model input");
  if (train_set.num_classes != model.num_classes() || train_set.mode != label_mode(model.head_mode))
    throw InvalidInput("dataset classes or label mode do not match the model head");

  FitResult result{model, {}};
  HetModel& m = result.model;
  Vector theta = flatten(m.layers);
  Vector first = Vector::Zero(theta.size());
  Vector second = Vector::Zero(theta.size());
  const Eigen::Index n = train_set.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::uint64_t step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const CounterRng shuffle(cfg.seed, derive_key(kShuffleLabel, static_cast<std::uint64_t>(epoch)));
    for (Eigen::Index i = n - 1; i > 0; --i) {
      const auto j = static_cast<Eigen::Index>(
          shuffle.below(static_cast<std::uint64_t>(i + 1), static_cast<std::uint64_t>(i)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    double epoch_total = 0.0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Batch batch{Matrix(count, train_set.dim()), IndexMatrix(count, train_set.noisy_labels.cols()), {}};
      batch.keys.reserve(static_cast<std::size_t>(count));
      for (Eigen::Index b = 0; b < count; ++b) {
        const Eigen::Index row = order[static_cast<std::size_t>(start + b)];
        batch.features.row(b) = train_set.features.row(row);
        batch.labels.row(b) = train_set.noisy_labels.row(row);
        batch.keys.push_back(static_cast<std::uint64_t>(row));
      }
      ++step;
      const LossAndGradient lg =
          loss_and_grad(m, batch, derive_key(cfg.seed ^ kStepLabel, step), cfg.train_mc_samples);
      if (!std::isfinite(lg.loss)) throw TrainingFailure("non-finite loss in epoch " + std::to_string(epoch), "");
      const Vector g = flatten(lg.gradient);

      if (cfg.optimizer == OptimizerKind::sgd) {
        theta -= cfg.learning_rate * g;
      } else {
        first = cfg.beta1 * first + (1.0 - cfg.beta1) * g;
        second = cfg.beta2 * second + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
        theta.array() -= cfg.learning_rate * (first.array() / c1) / ((second.array() / c2).sqrt() + cfg.epsilon);
      }
      for (Eigen::Index j = 0; j < theta.size(); ++j) {
        if (!std::isfinite(theta(j))) throw TrainingFailure("non-finite parameter after update", parameter_path(m.layers, j));
      }
      unflatten(theta, m.layers);
      epoch_total += lg.loss * static_cast<double>(count);
    }
    result.log.push_back({epoch, epoch_total / static_cast<double>(n)});
  }
  return result;
}

std::string training_log_to_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,train_loss\n";
  for (const auto& e : log) out += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "\n";
  return out;
}

PredictionSet predict_dataset(const HetModel& model, const NoisyDataset& data, const MCConfig& mc) {
  model.validate();
  mc.validate();
  data.validate();
  if (data.dim() != model.input_dim()) throw InvalidInput("dataset feature width does not match model input");
  if (data.num_classes != model.num_classes() || data.mode != label_mode(model.head_mode))
    throw InvalidInput("dataset classes or label mode do not match the model head");

  const Eigen::Index n = data.size();
  const Eigen::Index k = model.num_classes();
  PredictionSet ps;
  ps.mode = data.mode;
  ps.num_classes = static_cast<int>(k);
  ps.probs.resize(n, k);
  ps.aleatoric.resize(n, k);
  ps.predicted.resize(n, data.noisy_labels.cols());
  ps.uncertainty.resize(n);
  ps.noisy_labels = data.noisy_labels;
  if (data.has_clean_labels) ps.clean_labels = data.clean_labels;

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t idx) {
    const auto i = static_cast<Eigen::Index>(idx);
    const ProbOutput<double> out = forward(model, data.features.row(i).transpose(), CounterRng(mc.seed, idx), mc);
    ps.probs.row(i) = out.mean_probs.transpose();
    ps.aleatoric.row(i) = out.aleatoric.transpose();
    if (data.mode == LabelMode::multiclass) {
      const Eigen::Index cls = argmax_index(out.mean_probs);
      ps.predicted(i, 0) = static_cast<int>(cls);
      ps.uncertainty(i) = aleatoric_summary(out, cls);
    } else {
      for (Eigen::Index c = 0; c < k; ++c) ps.predicted(i, c) = out.mean_probs(c) > 0.5 ? 1 : 0;
      ps.uncertainty(i) = out.aleatoric.maxCoeff();
    }
  });
  rescore(ps, EvalTarget::noisy);
  return ps;
}

void rescore(PredictionSet& preds, EvalTarget target) {
  if (target == EvalTarget::clean && !preds.clean_labels)
    throw InvalidInput("clean labels are not available for this dataset");
  preds.target = target;
  const IndexMatrix& labels = preds.target_labels();
  preds.loss.resize(preds.size());
  for (Eigen::Index i = 0; i < preds.size(); ++i)
    preds.loss(i) = loss(preds.probs.row(i).transpose(), labels.row(i).transpose(), preds.mode);
}

}  // namespace hetnoise
