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

#include "hetnoise/prob_head.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

namespace hetnoise {
namespace {

using Dist = LogitDistribution<double>;

Dist make_dist(std::initializer_list<double> means, std::initializer_list<double> scales) {
  Dist d{Vector(static_cast<Eigen::Index>(means.size())), Vector(static_cast<Eigen::Index>(scales.size()))};
  Eigen::Index i = 0;
  for (double m : means) d.means(i++) = m;
  i = 0;
  for (double s : scales) d.scales(i++) = s;
  return d;
}

MCConfig mc(double tau, int samples, std::uint64_t seed = 1) {
  MCConfig c;
  c.temperature = tau;
  c.num_samples = samples;
  c.seed = seed;
  return c;
}

Dist random_dist(std::mt19937_64& gen, Eigen::Index k, double max_scale = 2.0) {
  std::uniform_real_distribution<double> mean(-3.0, 3.0);
  std::uniform_real_distribution<double> scale(0.0, max_scale);
  Dist d{Vector(k), Vector(k)};
  for (Eigen::Index c = 0; c < k; ++c) {
    d.means(c) = mean(gen);
    d.scales(c) = scale(gen);
  }
  return d;
}

const double kPhiInvSqrt2 = oracle::phi_cdf(1.0 / std::sqrt(2.0));

TEST(TemperedMcSoftmax, SymmetricZeroNoise) {
  const auto out = tempered_mc_softmax(make_dist({0, 0}, {0, 0}), mc(1.0, 10), CounterRng(1, 0));
  EXPECT_DOUBLE_EQ(out.mean_probs(0), 0.5);
  EXPECT_DOUBLE_EQ(out.mean_probs(1), 0.5);
  EXPECT_EQ(out.aleatoric(0), 0.0);
  EXPECT_EQ(out.aleatoric(1), 0.0);
}

TEST(TemperedMcSoftmax, ZeroScaleCollapsesToSoftmax) {
  for (int s : {1, 7, 1000}) {
    const auto out = tempered_mc_softmax(make_dist({std::log(2.0), 0}, {0, 0}), mc(1.0, s), CounterRng(3, 0));
    EXPECT_NEAR(out.mean_probs(0), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(out.mean_probs(1), 1.0 / 3.0, 1e-15);
    EXPECT_EQ(out.aleatoric.maxCoeff(), 0.0);
  }
}

TEST(TemperedMcSoftmax, SmallTemperatureApproachesGaussianArgmax) {
  const auto out = tempered_mc_softmax(make_dist({1, 0}, {1, 1}), mc(0.01, 1'000'000), CounterRng(11, 0));
  EXPECT_NEAR(out.mean_probs(0), 0.7602, 0.002);
  EXPECT_NEAR(out.mean_probs(0), kPhiInvSqrt2, 0.002);
}

TEST(TemperedMcSoftmax, KeepsPerSampleRowsOnRequest) {
  const auto out = tempered_mc_softmax(make_dist({0.3, -1, 2}, {0.5, 1, 0.1}), mc(0.7, 50), CounterRng(4, 4), true);
  ASSERT_TRUE(out.per_sample_probs.has_value());
  EXPECT_EQ(out.per_sample_probs->rows(), 50);
  EXPECT_EQ(out.per_sample_probs->cols(), 3);
  const Vector mean = out.per_sample_probs->colwise().mean().transpose();
  EXPECT_LT((mean - out.mean_probs).cwiseAbs().maxCoeff(), 1e-14);
  const Vector var =
      (out.per_sample_probs->rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
  EXPECT_LT((var - out.aleatoric).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TemperedMcSoftmax, RejectsInvalidInput) {
  EXPECT_THROW(tempered_mc_softmax(make_dist({NAN, 0}, {0, 0}), mc(1, 5), CounterRng(0, 0)), InvalidInput);
  EXPECT_THROW(tempered_mc_softmax(make_dist({0, 0}, {INFINITY, 0}), mc(1, 5), CounterRng(0, 0)), InvalidInput);
  EXPECT_THROW(tempered_mc_softmax(make_dist({0, 0}, {-1, 0}), mc(1, 5), CounterRng(0, 0)), InvalidInput);
  EXPECT_THROW(tempered_mc_softmax(make_dist({0, 0}, {0}), mc(1, 5), CounterRng(0, 0)), InvalidInput);
  EXPECT_THROW(tempered_mc_softmax(make_dist({0, 0}, {1, 1}), mc(0.0, 5), CounterRng(0, 0)), InvalidConfig);
  EXPECT_THROW(tempered_mc_softmax(make_dist({0, 0}, {1, 1}), mc(-1.0, 5), CounterRng(0, 0)), InvalidConfig);
  EXPECT_THROW(tempered_mc_softmax(make_dist({0, 0}, {1, 1}), mc(1.0, 0), CounterRng(0, 0)), InvalidConfig);
}

TEST(TemperedMcSoftmax, LargeLogitsStayFiniteAtSmallTemperature) {
  const auto out = tempered_mc_softmax(make_dist({500, -500, 0}, {3, 3, 3}), mc(0.01, 100), CounterRng(0, 1));
  EXPECT_TRUE(out.mean_probs.allFinite());
  EXPECT_NEAR(out.mean_probs(0), 1.0, 1e-12);
}

TEST(TemperedMcSigmoid, Examples) {
  auto out = tempered_mc_sigmoid(make_dist({0}, {0}), mc(1.0, 10), CounterRng(0, 0));
  EXPECT_DOUBLE_EQ(out.mean_probs(0), 0.5);
  EXPECT_EQ(out.aleatoric(0), 0.0);

  out = tempered_mc_sigmoid(make_dist({-3, 3}, {0, 0}), mc(1.0, 10), CounterRng(0, 0));
  EXPECT_NEAR(out.mean_probs(0), 1.0 / (1.0 + std::exp(3.0)), 1e-15);
  EXPECT_NEAR(out.mean_probs(1), 1.0 / (1.0 + std::exp(-3.0)), 1e-15);
  EXPECT_NEAR(out.mean_probs(0), 0.0474, 1e-4);
  EXPECT_NEAR(out.mean_probs(1), 0.9526, 1e-4);

  out = tempered_mc_sigmoid(make_dist({0}, {2}), mc(1.0, 1'000'000), CounterRng(8, 0));
  EXPECT_NEAR(out.mean_probs(0), 0.5, 0.002);
  EXPECT_GT(out.aleatoric(0), 0.0);
}

TEST(TemperedMcSigmoid, AntitheticPairsCancelExactlyForSymmetricCase) {
  MCConfig cfg = mc(1.0, 1000);
  cfg.antithetic = true;
  const auto out = tempered_mc_sigmoid(make_dist({0}, {2}), cfg, CounterRng(8, 0));
  EXPECT_NEAR(out.mean_probs(0), 0.5, 1e-12);
}

TEST(TemperedMcSigmoid, HasNoCrossClassNormalization) {
  const auto out = tempered_mc_sigmoid(make_dist({2, 2, 2}, {0, 0, 0}), mc(1.0, 3), CounterRng(0, 0));
  EXPECT_GT(out.mean_probs.sum(), 2.0);
}

TEST(GaussianArgmaxProb, Examples) {
  Vector p = gaussian_argmax_prob(make_dist({0, 0}, {1, 1}));
  EXPECT_DOUBLE_EQ(p(0), 0.5);
  EXPECT_DOUBLE_EQ(p(1), 0.5);

  p = gaussian_argmax_prob(make_dist({1, 0}, {1, 1}));
  EXPECT_NEAR(p(0), kPhiInvSqrt2, 1e-15);
  EXPECT_NEAR(p(1), 1.0 - kPhiInvSqrt2, 1e-15);
  EXPECT_NEAR(p(0), 0.7602, 1e-4);
  EXPECT_NEAR(p(1), 0.2398, 1e-4);

  p = gaussian_argmax_prob(make_dist({0, 0, 0}, {1, 1, 1}));
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(p(c), 1.0 / 3.0, 1e-10);
}

TEST(GaussianArgmaxProb, ClosedFormAgreesWithBruteForceSimulation) {
  // 1e7 argmax draws; 4 standard errors is about 5.4e-4.
  const auto freq = oracle::argmax_frequencies({1, 0}, {1, 1}, 10'000'000, 99);
  const Vector p = gaussian_argmax_prob(make_dist({1, 0}, {1, 1}));
  EXPECT_NEAR(freq[0], p(0), 5.4e-4);
}

TEST(GaussianArgmaxProb, QuadratureMatchesClosedFormForTwoClasses) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    Dist d = random_dist(gen, 2);
    d.scales = d.scales.cwiseMax(0.05);
    const Vector closed = gaussian_argmax_prob(d);
    const Vector quad = gaussian_argmax_prob_quadrature(d);
    EXPECT_LT((closed - quad).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
  }
}

TEST(GaussianArgmaxProb, QuadratureMatchesSimulationForMoreClasses) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 6; ++trial) {
    const Eigen::Index k = 3 + trial % 3;
    Dist d = random_dist(gen, k);
    d.scales = d.scales.cwiseMax(0.1);
    const Vector p = gaussian_argmax_prob(d);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    const auto freq = oracle::argmax_frequencies(std::vector<double>(d.means.data(), d.means.data() + k),
                                                 std::vector<double>(d.scales.data(), d.scales.data() + k),
                                                 1'000'000, 1000 + static_cast<std::uint64_t>(trial));
    for (Eigen::Index c = 0; c < k; ++c) EXPECT_NEAR(p(c), freq[static_cast<std::size_t>(c)], 2.5e-3);
  }
}

TEST(GaussianArgmaxProb, ZeroScalesAreIndicatorsWithUniformTieSplit) {
  Vector p = gaussian_argmax_prob(make_dist({1, 3, 2}, {0, 0, 0}));
  EXPECT_EQ(p, (Vector(3) << 0, 1, 0).finished());
  p = gaussian_argmax_prob(make_dist({3, 3, 2}, {0, 0, 0}));
  EXPECT_EQ(p, (Vector(3) << 0.5, 0.5, 0).finished());
  p = gaussian_argmax_prob(make_dist({1, 1}, {0, 0}));
  EXPECT_EQ(p, (Vector(2) << 0.5, 0.5).finished());
}

TEST(GaussianArgmaxProb, MixedZeroAndPositiveScales) {
  // Class 0 is a point mass at 0 against N(0, 1) and N(1, 1).
  const Dist d = make_dist({0, 0, 1}, {0, 1, 1});
  const Vector p = gaussian_argmax_prob(d);
  EXPECT_NEAR(p(0), 0.5 * oracle::phi_cdf(-1.0), 1e-12);
  EXPECT_NEAR(p.sum(), 1.0, 1e-9);
  const auto freq = oracle::argmax_frequencies({0, 0, 1}, {0, 1, 1}, 1'000'000, 3);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(p(c), freq[static_cast<std::size_t>(c)], 2e-3);
}

TEST(GaussianArgmaxProb, RejectsNonFinite) {
  EXPECT_THROW(gaussian_argmax_prob(make_dist({0, NAN}, {1, 1})), InvalidInput);
  EXPECT_THROW(gaussian_argmax_prob(make_dist({0, 0, 0}, {1, INFINITY, 1})), InvalidInput);
}

TEST(AleatoricSummary, Projection) {
  ProbOutput<double> out;
  out.mean_probs = Vector::Constant(2, 0.5);
  out.aleatoric = (Vector(2) << 0.0, 0.1).finished();
  EXPECT_EQ(aleatoric_summary(out, 1), 0.1);
  out.aleatoric.setZero();
  EXPECT_EQ(aleatoric_summary(out, 0), 0.0);
  EXPECT_THROW(aleatoric_summary(out, 2), std::out_of_range);
  EXPECT_THROW(aleatoric_summary(out, -1), std::out_of_range);
}

TEST(AleatoricSummary, PositiveUnderNoise) {
  const auto out = tempered_mc_softmax(make_dist({1, 0}, {1, 1}), mc(1.0, 1000), CounterRng(2, 2));
  EXPECT_GT(aleatoric_summary(out, 0), 0.0);
}

// Property checks over randomly generated distributions.

TEST(ProbHeadProperties, RowsNormalizeAndVarianceIsBounded) {
  std::mt19937_64 gen(101);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(trial % 6);
    const Dist d = random_dist(gen, k, 4.0);
    const double tau = std::uniform_real_distribution<double>(0.05, 5.0)(gen);
    const auto out = tempered_mc_softmax(d, mc(tau, 64), CounterRng(trial, 0), true);
    for (Eigen::Index s = 0; s < 64; ++s) EXPECT_NEAR(out.per_sample_probs->row(s).sum(), 1.0, 1e-9);
    EXPECT_NEAR(out.mean_probs.sum(), 1.0, 1e-9);
    for (Eigen::Index c = 0; c < k; ++c) {
      EXPECT_GE(out.aleatoric(c), 0.0);
      EXPECT_LE(out.aleatoric(c), 0.25);
      EXPECT_LE(out.aleatoric(c), out.mean_probs(c) * (1.0 - out.mean_probs(c)) + 1e-9);
    }
    const auto sig = tempered_mc_sigmoid(d, mc(tau, 64), CounterRng(trial, 0));
    EXPECT_TRUE(((sig.mean_probs.array() >= 0.0) && (sig.mean_probs.array() <= 1.0)).all());
    EXPECT_TRUE((sig.aleatoric.array() <= 0.25).all());
  }
}

TEST(ProbHeadProperties, ZeroNoiseEqualsDeterministicSoftmax) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 100; ++trial) {
    Dist d = random_dist(gen, 4);
    d.scales.setZero();
    const double tau = std::uniform_real_distribution<double>(0.1, 10.0)(gen);
    const int s = 1 + trial % 50;
    const auto out = tempered_mc_softmax(d, mc(tau, s), CounterRng(trial, 1));
    const Vector expected = softmax(Vector(d.means / tau));
    EXPECT_LT((out.mean_probs - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(out.aleatoric.maxCoeff(), 0.0);
  }
}

TEST(ProbHeadProperties, JointRescalingOfLogitsScalesAndTemperature) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Dist d = random_dist(gen, 3);
    const double tau = 0.5 + trial * 0.05;
    const double factor = 0.25 + trial * 0.1;
    const Matrix draws = standard_normal_draws<double>(CounterRng(trial, 3), 32, 3);
    const Dist scaled{d.means * factor, d.scales * factor};
    const auto a = tempered_mc_probs(d, tau, draws, OutputLink::softmax, true);
    const auto b = tempered_mc_probs(scaled, tau * factor, draws, OutputLink::softmax, true);
    EXPECT_LT((*a.per_sample_probs - *b.per_sample_probs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ProbHeadProperties, ClassPermutationEquivariance) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index k = 4;
    const Dist d = random_dist(gen, k);
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    const Matrix draws = standard_normal_draws<double>(CounterRng(trial, 4), 40, k);
    Dist pd{Vector(k), Vector(k)};
    Matrix pdraws(40, k);
    for (Eigen::Index c = 0; c < k; ++c) {
      pd.means(c) = d.means(perm[c]);
      pd.scales(c) = d.scales(perm[c]);
      pdraws.col(c) = draws.col(perm[c]);
    }
    const auto a = tempered_mc_probs(d, 0.8, draws, OutputLink::softmax);
    const auto b = tempered_mc_probs(pd, 0.8, pdraws, OutputLink::softmax);
    for (Eigen::Index c = 0; c < k; ++c) {
      EXPECT_NEAR(b.mean_probs(c), a.mean_probs(perm[c]), 1e-14);
      EXPECT_NEAR(b.aleatoric(c), a.aleatoric(perm[c]), 1e-14);
    }
  }
}

TEST(ProbHeadProperties, MonteCarloErrorShrinksAsRootS) {
  const Dist d = make_dist({0.5, 0, -0.3}, {1.5, 0.7, 1.0});
  const int s = 4000;
  const auto small = tempered_mc_softmax(d, mc(1.0, s), CounterRng(1, 7));
  const auto large = tempered_mc_softmax(d, mc(1.0, 4 * s), CounterRng(2, 7));
  for (Eigen::Index c = 0; c < 3; ++c) {
    const double se_small = std::sqrt(small.aleatoric(c) / s);
    const double se_large = std::sqrt(large.aleatoric(c) / (4 * s));
    EXPECT_GT(se_small / se_large, 1.0);
    EXPECT_LT(se_small / se_large, 4.0);
    // Difference of two independent estimates: standard error ~ 1.12 se_small.
    EXPECT_LT(std::abs(small.mean_probs(c) - large.mean_probs(c)), 5.0 * se_small);
  }
}

TEST(ProbHeadProperties, DeterministicGivenStream) {
  const Dist d = make_dist({0.1, 0.2}, {1, 2});
  const auto a = tempered_mc_softmax(d, mc(0.5, 100), CounterRng(3, 3));
  const auto b = tempered_mc_softmax(d, mc(0.5, 100), CounterRng(3, 3));
  EXPECT_EQ(a.mean_probs, b.mean_probs);
  EXPECT_EQ(a.aleatoric, b.aleatoric);
}

TEST(ProbHeadProperties, SinglePrecisionInstantiation) {
  LogitDistribution<float> d{Eigen::VectorXf::Zero(2), Eigen::VectorXf::Ones(2)};
  const auto out = tempered_mc_softmax(d, mc(1.0, 100), CounterRng(1, 1));
  EXPECT_NEAR(out.mean_probs.sum(), 1.0f, 1e-5f);
}

}  // namespace
}  // namespace hetnoise
