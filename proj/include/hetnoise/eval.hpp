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
#include "hetnoise/json_io.hpp"
#include "hetnoise/noisegen.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hetnoise {

enum class EvalTarget { noisy, clean };

std::string to_string(EvalTarget target);

/// Per-sample predictions of one model over one dataset.
///
/// `loss` and correctness are always relative to `target`; retargeting to
/// clean labels is only possible when they are present.
struct PredictionSet {
  LabelMode mode = LabelMode::multiclass;
  int num_classes = 2;
  Matrix probs;      // N x K mean probabilities
  Matrix aleatoric;  // N x K per-class MC variance
  IndexMatrix predicted;
  Vector uncertainty;  // scalar per prediction
  IndexMatrix noisy_labels;
  std::optional<IndexMatrix> clean_labels;
  Vector loss;
  EvalTarget target = EvalTarget::noisy;

  Eigen::Index size() const { return probs.rows(); }
  const IndexMatrix& target_labels() const;
  void validate() const;
};

enum class F1Mode { binary_positive, micro };

// binary_positive for two-class single-label tasks, micro otherwise.
F1Mode default_f1_mode(LabelMode mode, int num_classes);

/// F1 from pooled counts. binary_positive scores class 1 of an N x 1 label
/// column; micro pools every (sample, class) decision. Returns 0 when
/// 2TP + FP + FN = 0.
double f1_score(const IndexMatrix& predicted, const IndexMatrix& truth, LabelMode mode, int num_classes,
                F1Mode f1_mode);

/// Step-wise area under the precision-recall curve. Scores are visited in
/// descending order; each block of tied scores contributes one PR point.
double auprc(std::span<const double> scores, std::span<const int> labels);

// AUPRC on class-1 probability (two-class) or pooled one-vs-rest pairs.
double prediction_auprc(const PredictionSet& preds);

double prediction_f1(const PredictionSet& preds);

struct DiscardCurve {
  std::vector<double> fractions;
  std::vector<double> errors;
  double mf = 0.0;
  double di = 0.0;
};

// {0.0, 0.1, ..., 0.9}
std::vector<double> default_discard_fractions();

// Rows dropped at discard fraction q out of n.
Eigen::Index discard_count(double fraction, Eigen::Index n);

// Share of steps with non-increasing error.
double monotonicity_fraction(std::span<const double> errors);
// Mean per-step error reduction (signed).
double discard_improvement(std::span<const double> errors);

/// For each fraction q drops the ceil(q N) most uncertain samples and
/// records the mean loss of the rest. Samples are ordered by descending
/// uncertainty, then ascending index, so among ties the lower index goes
/// first. Needs at least two fractions.
DiscardCurve discard_test(std::span<const double> uncertainty, std::span<const double> loss,
                          std::span<const double> fractions);
DiscardCurve discard_test(const PredictionSet& preds, std::span<const double> fractions);

inline constexpr int kHistogramBins = 50;

struct Histogram {
  std::vector<double> edges;  // kHistogramBins + 1
  std::vector<long> counts;   // kHistogramBins
};

struct UncertaintyGroup {
  std::vector<double> values;
  std::optional<double> median;  // empty group has none
  Histogram histogram;

  std::size_t count() const { return values.size(); }
};

struct DensityScope {
  std::string name;
  UncertaintyGroup correct;
  UncertaintyGroup incorrect;
};

enum class DensityScopeKind { all, per_class };

struct DensitySummary {
  std::vector<DensityScope> scopes;
};

double median(std::vector<double> values);

/// Uncertainty values split by correctness. Histograms in one scope share
/// 50 uniform bins over [0, largest value in the scope].
///
/// Multi-class: scope "all", or one scope "class_<c>" per target class.
/// Multi-label: every (sample, class) pair with that class's variance;
/// per-class scopes come as "class_<c>/negative", "/positive" and "/all".
DensitySummary density_summary(const PredictionSet& preds, DensityScopeKind kind);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

// Rank agreement between predicted uncertainty and max_c true scale.
double sigma_oracle_correlation(const PredictionSet& preds, const NoisyDataset& dataset);

struct EvalReport {
  EvalTarget target = EvalTarget::noisy;
  double f1 = 0.0;
  std::optional<double> auprc;
  std::optional<double> sigma_oracle_spearman;
  double mean_loss = 0.0;
  double accuracy = 0.0;
  DiscardCurve discard;
  DensitySummary all_scope;
  DensitySummary per_class_scope;
};

EvalReport evaluate(const PredictionSet& preds, const NoisyDataset* dataset, std::span<const double> fractions);

Json report_to_json(const EvalReport& report);
std::string discard_to_csv(const DiscardCurve& curve);
// scope,group,value rows with every raw uncertainty value.
std::string density_values_to_csv(const EvalReport& report);
// scope,group,bin_lo,bin_hi,count rows.
std::string density_histograms_to_csv(const EvalReport& report);

}  // namespace hetnoise
