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

#include "hetnoise/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hetnoise {
namespace {

struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

double f1_from(const Counts& c) {
  const long denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

Histogram make_histogram(const std::vector<double>& values, double top) {
  Histogram h;
  h.edges.resize(kHistogramBins + 1);
  h.counts.assign(kHistogramBins, 0);
  for (int b = 0; b <= kHistogramBins; ++b) h.edges[static_cast<std::size_t>(b)] = top * b / kHistogramBins;
  for (double v : values) {
    int bin = top > 0.0 ? static_cast<int>(std::floor(v / top * kHistogramBins)) : 0;
    bin = std::clamp(bin, 0, kHistogramBins - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  return h;
}

DensityScope make_scope(std::string name, std::vector<double> correct, std::vector<double> incorrect) {
  double top = 0.0;
  for (double v : correct) top = std::max(top, v);
  for (double v : incorrect) top = std::max(top, v);
  DensityScope scope;
  scope.name = std::move(name);
  scope.correct.values = std::move(correct);
  scope.incorrect.values = std::move(incorrect);
  for (UncertaintyGroup* g : {&scope.correct, &scope.incorrect}) {
    if (!g->values.empty()) g->median = median(g->values);
    g->histogram = make_histogram(g->values, top);
  }
  return scope;
}

std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::string to_string(EvalTarget target) { return target == EvalTarget::noisy ? "noisy" : "clean"; }

const IndexMatrix& PredictionSet::target_labels() const {
  if (target == EvalTarget::clean) {
    if (!clean_labels) throw InvalidInput("clean labels are not available");
    return *clean_labels;
  }
  return noisy_labels;
}

void PredictionSet::validate() const {
  const Eigen::Index n = probs.rows();
  if (n < 1) throw InvalidInput("prediction set is empty");
  const Eigen::Index label_cols = mode == LabelMode::multiclass ? 1 : num_classes;
  if (probs.cols() != num_classes || aleatoric.rows() != n || aleatoric.cols() != num_classes ||
      predicted.rows() != n || predicted.cols() != label_cols || uncertainty.size() != n ||
      noisy_labels.rows() != n || noisy_labels.cols() != label_cols || loss.size() != n)
    throw InvalidInput("prediction set arrays have inconsistent shapes");
  if (clean_labels && (clean_labels->rows() != n || clean_labels->cols() != label_cols))
    throw InvalidInput("clean labels have the wrong shape");
  if (!uncertainty.allFinite() || (uncertainty.array() < 0.0).any())
    throw InvalidInput("uncertainties must be finite and nonnegative");
  if (!loss.allFinite() || (loss.array() < 0.0).any()) throw InvalidInput("losses must be finite and nonnegative");
}

F1Mode default_f1_mode(LabelMode mode, int num_classes) {
  return (mode == LabelMode::multiclass && num_classes == 2) ? F1Mode::binary_positive : F1Mode::micro;
}

double f1_score(const IndexMatrix& predicted, const IndexMatrix& truth, LabelMode mode, int num_classes,
                F1Mode f1_mode) {
  if (predicted.rows() == 0) throw InvalidInput("f1 needs at least one prediction");
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols())
    throw InvalidInput("predictions and labels differ in shape");
  const int hi = mode == LabelMode::multiclass ? num_classes - 1 : 1;
  if ((predicted.array() < 0).any() || (predicted.array() > hi).any() || (truth.array() < 0).any() ||
      (truth.array() > hi).any())
    throw InvalidInput("label out of range");

  Counts c;
  if (f1_mode == F1Mode::binary_positive) {
    if (predicted.cols() != 1) throw InvalidInput("binary_positive F1 needs a single label column");
    for (Eigen::Index i = 0; i < predicted.rows(); ++i) {
      const bool p = predicted(i, 0) == 1;
      const bool t = truth(i, 0) == 1;
      c.tp += p && t;
      c.fp += p && !t;
      c.fn += !p && t;
    }
    return f1_from(c);
  }
  if (mode == LabelMode::multiclass) {
    // One-hot pooling: a wrong prediction is one FP and one FN.
    for (Eigen::Index i = 0; i < predicted.rows(); ++i) {
      if (predicted(i, 0) == truth(i, 0)) {
        ++c.tp;
      } else {
        ++c.fp;
        ++c.fn;
      }
    }
    return f1_from(c);
  }
  for (Eigen::Index i = 0; i < predicted.rows(); ++i) {
    for (Eigen::Index k = 0; k < predicted.cols(); ++k) {
      const bool p = predicted(i, k) == 1;
      const bool t = truth(i, k) == 1;
      c.tp += p && t;
      c.fp += p && !t;
      c.fn += !p && t;
    }
  }
  return f1_from(c);
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidInput("scores and labels differ in length");
  long positives = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidInput("auprc labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw InvalidInput("auprc scores must be finite");
    positives += labels[i];
  }
  if (positives == 0) throw UndefinedMetric("AUPRC is undefined without positive labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  long tp = 0;
  long fp = 0;
  double prev_recall = 0.0;
  double area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

double prediction_auprc(const PredictionSet& preds) {
  const IndexMatrix& truth = preds.target_labels();
  std::vector<double> scores;
  std::vector<int> labels;
  if (preds.mode == LabelMode::multiclass && preds.num_classes == 2) {
    for (Eigen::Index i = 0; i < preds.size(); ++i) {
      scores.push_back(preds.probs(i, 1));
      labels.push_back(truth(i, 0) == 1 ? 1 : 0);
    }
  } else {
    for (Eigen::Index i = 0; i < preds.size(); ++i) {
      for (Eigen::Index c = 0; c < preds.num_classes; ++c) {
        scores.push_back(preds.probs(i, c));
        const bool positive = preds.mode == LabelMode::multiclass ? truth(i, 0) == c : truth(i, c) == 1;
        labels.push_back(positive ? 1 : 0);
      }
    }
  }
  return auprc(scores, labels);
}

double prediction_f1(const PredictionSet& preds) {
  return f1_score(preds.predicted, preds.target_labels(), preds.mode, preds.num_classes,
                  default_f1_mode(preds.mode, preds.num_classes));
}

std::vector<double> default_discard_fractions() {
  std::vector<double> out;
  for (int i = 0; i < 10; ++i) out.push_back(i / 10.0);
  return out;
}

Eigen::Index discard_count(double fraction, Eigen::Index n) {
  // The tolerance keeps products like 0.7 * 10 from rounding up to 8.
  return static_cast<Eigen::Index>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

double monotonicity_fraction(std::span<const double> errors) {
  if (errors.size() < 2) throw InvalidConfig("monotonicity fraction needs at least two errors");
  long hits = 0;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) hits += errors[i] >= errors[i + 1];
  return static_cast<double>(hits) / static_cast<double>(errors.size() - 1);
}

double discard_improvement(std::span<const double> errors) {
  if (errors.size() < 2) throw InvalidConfig("discard improvement needs at least two errors");
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) total += errors[i] - errors[i + 1];
  return total / static_cast<double>(errors.size() - 1);
}

DiscardCurve discard_test(std::span<const double> uncertainty, std::span<const double> loss,
                          std::span<const double> fractions) {
  const std::size_t n = uncertainty.size();
  if (n == 0) throw InvalidInput("discard test needs predictions");
  if (loss.size() != n) throw InvalidInput("uncertainty and loss differ in length");
  if (fractions.size() < 2) throw InvalidConfig("discard test needs at least two fractions");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] >= 0.0 && fractions[i] < 1.0)) throw InvalidConfig("discard fractions must lie in [0, 1)");
    if (i > 0 && !(fractions[i] > fractions[i - 1])) throw InvalidConfig("discard fractions must increase");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return uncertainty[a] > uncertainty[b]; });

  DiscardCurve curve;
  curve.fractions.assign(fractions.begin(), fractions.end());
  for (double q : fractions) {
    const auto dropped = static_cast<std::size_t>(discard_count(q, static_cast<Eigen::Index>(n)));
    if (dropped >= n) throw InvalidConfig("discard fraction removes every sample");
    double total = 0.0;
    for (std::size_t r = dropped; r < n; ++r) total += loss[order[r]];
    curve.errors.push_back(total / static_cast<double>(n - dropped));
  }
  curve.mf = monotonicity_fraction(curve.errors);
  curve.di = discard_improvement(curve.errors);
  return curve;
}

DiscardCurve discard_test(const PredictionSet& preds, std::span<const double> fractions) {
  preds.validate();
  return discard_test(std::span<const double>(preds.uncertainty.data(), static_cast<std::size_t>(preds.size())),
                      std::span<const double>(preds.loss.data(), static_cast<std::size_t>(preds.size())), fractions);
}

double median(std::vector<double> values) {
  if (values.empty()) throw UndefinedMetric("median of an empty group");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

DensitySummary density_summary(const PredictionSet& preds, DensityScopeKind kind) {
  preds.validate();
  const IndexMatrix& truth = preds.target_labels();
  DensitySummary summary;
  const Eigen::Index n = preds.size();

  if (preds.mode == LabelMode::multiclass) {
    if (kind == DensityScopeKind::all) {
      std::vector<double> ok, bad;
      for (Eigen::Index i = 0; i < n; ++i)
        (preds.predicted(i, 0) == truth(i, 0) ? ok : bad).push_back(preds.uncertainty(i));
      summary.scopes.push_back(make_scope("all", std::move(ok), std::move(bad)));
      return summary;
    }
    for (int c = 0; c < preds.num_classes; ++c) {
      std::vector<double> ok, bad;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (truth(i, 0) != c) continue;
        (preds.predicted(i, 0) == c ? ok : bad).push_back(preds.uncertainty(i));
      }
      summary.scopes.push_back(make_scope("class_" + std::to_string(c), std::move(ok), std::move(bad)));
    }
    return summary;
  }

  if (kind == DensityScopeKind::all) {
    std::vector<double> ok, bad;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int c = 0; c < preds.num_classes; ++c)
        (preds.predicted(i, c) == truth(i, c) ? ok : bad).push_back(preds.aleatoric(i, c));
    }
    summary.scopes.push_back(make_scope("all", std::move(ok), std::move(bad)));
    return summary;
  }
  for (int c = 0; c < preds.num_classes; ++c) {
    std::vector<double> ok[3], bad[3];  // negative, positive, all
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool correct = preds.predicted(i, c) == truth(i, c);
      const double u = preds.aleatoric(i, c);
      const int side = truth(i, c) == 1 ? 1 : 0;
      (correct ? ok[side] : bad[side]).push_back(u);
      (correct ? ok[2] : bad[2]).push_back(u);
    }
    const std::string base = "class_" + std::to_string(c);
    summary.scopes.push_back(make_scope(base + "/negative", std::move(ok[0]), std::move(bad[0])));
    summary.scopes.push_back(make_scope(base + "/positive", std::move(ok[1]), std::move(bad[1])));
    summary.scopes.push_back(make_scope(base + "/all", std::move(ok[2]), std::move(bad[2])));
  }
  return summary;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("spearman inputs differ in length");
  if (a.size() < 2) throw UndefinedMetric("spearman needs at least two pairs");
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw UndefinedMetric("spearman correlation of a constant vector");
  return sab / std::sqrt(saa * sbb);
}

double sigma_oracle_correlation(const PredictionSet& preds, const NoisyDataset& dataset) {
  if (dataset.size() != preds.size()) throw InvalidInput("dataset and predictions differ in length");
  if (dataset.true_scales.rows() != dataset.size()) throw InvalidInput("dataset lacks true noise scales");
  const Vector truth = dataset.true_scales.rowwise().maxCoeff();
  return spearman(std::span<const double>(preds.uncertainty.data(), static_cast<std::size_t>(preds.size())),
                  std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())));
}

EvalReport evaluate(const PredictionSet& preds, const NoisyDataset* dataset, std::span<const double> fractions) {
  preds.validate();
  EvalReport r;
  r.target = preds.target;
  r.f1 = prediction_f1(preds);
  try {
    r.auprc = prediction_auprc(preds);
  } catch (const UndefinedMetric&) {
  }
  if (dataset != nullptr) {
    try {
      r.sigma_oracle_spearman = sigma_oracle_correlation(preds, *dataset);
    } catch (const UndefinedMetric&) {
    }
  }
  r.mean_loss = preds.loss.mean();
  const IndexMatrix& truth = preds.target_labels();
  long correct = 0;
  for (Eigen::Index i = 0; i < preds.size(); ++i) correct += preds.predicted.row(i) == truth.row(i);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());
  r.discard = discard_test(preds, fractions);
  r.all_scope = density_summary(preds, DensityScopeKind::all);
  r.per_class_scope = density_summary(preds, DensityScopeKind::per_class);
  return r;
}

}  // namespace hetnoise
