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
#include "hetnoise/rng.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

namespace hetnoise {

/// Gaussian over the K logits of one input: u_c ~ N(means_c, scales_c^2).
template <typename Scalar>
struct LogitDistribution {
  using VectorS = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  VectorS means;
  VectorS scales;

  Eigen::Index num_classes() const { return means.size(); }

  // Throws InvalidInput unless sizes agree, K >= 1, everything is finite
  // and every scale is nonnegative.
  void validate() const {
    if (means.size() < 1 || means.size() != scales.size())
      throw InvalidInput("logit distribution needs K >= 1 means and scales of equal length");
    if (!means.allFinite() || !scales.allFinite())
      throw InvalidInput("logit distribution has non-finite entries");
    if ((scales.array() < Scalar(0)).any())
      throw InvalidInput("logit distribution has a negative scale");
  }
};

/// Settings for one stochastic forward pass.
struct MCConfig {
  double temperature = 1.0;
  int num_samples = 1000;
  std::uint64_t seed = 0;
  // Pairs each draw with its negation. Off by default.
  bool antithetic = false;

  void validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
      throw InvalidConfig("temperature must be positive and finite");
    if (num_samples < 1) throw InvalidConfig("num_samples must be >= 1");
  }
};

template <typename Scalar>
struct ProbOutput {
  using VectorS = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  VectorS mean_probs;
  VectorS aleatoric;
  // S x K, kept only on request.
  std::optional<MatrixS> per_sample_probs;
};

enum class OutputLink { softmax, sigmoid };

// Numerically stable elementwise logistic function.
template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar x) {
  if (x > Scalar(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Softmax of a row/column with max subtraction.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar top = logits.maxCoeff();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

/// S x K standard normal draws for one stream; entry (s, c) is keyed by
/// (stream, s, c). With antithetic set, odd rows negate the preceding row.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> standard_normal_draws(
    const CounterRng& rng, int num_samples, Eigen::Index num_classes, bool antithetic = false) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> draws(num_samples, num_classes);
  for (int s = 0; s < num_samples; ++s) {
    for (Eigen::Index c = 0; c < num_classes; ++c) {
      if (antithetic && (s % 2 == 1)) {
        draws(s, c) = -draws(s - 1, c);
      } else {
        draws(s, c) = static_cast<Scalar>(rng.normal(static_cast<std::uint64_t>(s),
                                                     static_cast<std::uint64_t>(c)));
      }
    }
  }
  return draws;
}

/// Tempered Monte Carlo probabilities from explicit draws.
///
/// Row s of `draws` yields p_{.,s} = link((means + scales * draws_s) / tau).
/// The mean and population variance over rows use Welford's recurrence in
/// row order, so a constant column has exactly its value as mean and zero
/// variance.
template <typename Scalar>
ProbOutput<Scalar> tempered_mc_probs(
    const LogitDistribution<Scalar>& dist, Scalar temperature,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& draws, OutputLink link,
    bool keep_samples = false) {
  using VectorS = typename ProbOutput<Scalar>::VectorS;
  using MatrixS = typename ProbOutput<Scalar>::MatrixS;
  const Eigen::Index k = dist.num_classes();
  const Eigen::Index s_count = draws.rows();
  if (draws.cols() != k) throw InvalidInput("draw matrix width differs from class count");
  if (s_count < 1) throw InvalidConfig("at least one Monte Carlo sample is required");

  ProbOutput<Scalar> out;
  VectorS mean = VectorS::Zero(k);
  VectorS m2 = VectorS::Zero(k);
  MatrixS kept;
  if (keep_samples) kept.resize(s_count, k);

  VectorS row(k);
  for (Eigen::Index s = 0; s < s_count; ++s) {
    const VectorS logits =
        ((dist.means.array() + dist.scales.array() * draws.row(s).transpose().array()) / temperature)
            .matrix();
    if (link == OutputLink::softmax) {
      row = softmax(logits);
    } else {
      for (Eigen::Index c = 0; c < k; ++c) row(c) = sigmoid(logits(c));
    }
    const Scalar n = static_cast<Scalar>(s + 1);
    for (Eigen::Index c = 0; c < k; ++c) {
      const Scalar delta = row(c) - mean(c);
      mean(c) += delta / n;
      m2(c) += delta * (row(c) - mean(c));
    }
    if (keep_samples) kept.row(s) = row.transpose();
  }
  out.mean_probs = mean;
  out.aleatoric = (m2 / static_cast<Scalar>(s_count)).cwiseMax(Scalar(0));
  if (keep_samples) out.per_sample_probs = std::move(kept);
  return out;
}

/// Multi-class tempered MC softmax with per-class independent N(0, 1) draws.
template <typename Scalar>
ProbOutput<Scalar> tempered_mc_softmax(const LogitDistribution<Scalar>& dist, const MCConfig& cfg,
                                       const CounterRng& rng, bool keep_samples = false) {
  dist.validate();
  cfg.validate();
  const auto draws = standard_normal_draws<Scalar>(rng, cfg.num_samples, dist.num_classes(), cfg.antithetic);
  return tempered_mc_probs(dist, static_cast<Scalar>(cfg.temperature), draws, OutputLink::softmax,
                           keep_samples);
}

/// Multi-label analogue: each class passes through its own tempered sigmoid.
template <typename Scalar>
ProbOutput<Scalar> tempered_mc_sigmoid(const LogitDistribution<Scalar>& dist, const MCConfig& cfg,
                                       const CounterRng& rng, bool keep_samples = false) {
  dist.validate();
  cfg.validate();
  const auto draws = standard_normal_draws<Scalar>(rng, cfg.num_samples, dist.num_classes(), cfg.antithetic);
  return tempered_mc_probs(dist, static_cast<Scalar>(cfg.temperature), draws, OutputLink::sigmoid,
                           keep_samples);
}

// Scalar uncertainty attached to a prediction of `predicted_class`.
template <typename Scalar>
Scalar aleatoric_summary(const ProbOutput<Scalar>& out, Eigen::Index predicted_class) {
  if (predicted_class < 0 || predicted_class >= out.aleatoric.size())
    throw std::out_of_range("predicted class " + std::to_string(predicted_class) + " out of range");
  return out.aleatoric(predicted_class);
}

// Standard normal CDF.
double normal_cdf(double x);

/// Probability that class c attains the largest logit when the logits are
/// independent N(means_c, scales_c^2). Closed form for K = 2, adaptive
/// quadrature otherwise. Classes with zero scale are point masses; exact
/// ties among them split uniformly.
Vector gaussian_argmax_prob(const LogitDistribution<double>& dist);

// Quadrature route for any K >= 2; exposed so the two routes can be compared.
Vector gaussian_argmax_prob_quadrature(const LogitDistribution<double>& dist);

}  // namespace hetnoise
