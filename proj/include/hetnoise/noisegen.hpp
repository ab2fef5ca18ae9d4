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

#include <array>
#include <cstdint>
#include <map>
#include <string>

namespace hetnoise {

enum class NoiseKind { uniform_flip, region_ambiguity, stochastic_event, boundary_misalignment };

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& name);

// Named parametric family mapping true logits to per-class noise scales.
struct ScaleField {
  std::string family;
  std::map<std::string, double> params;
};

/// Label-noise source used by the generator.
///
///   uniform_flip          constant:           sigma_c = base
///   region_ambiguity      margin_window:      sigma_c = base if gap < margin, else background
///   stochastic_event      single_class:       sigma_c = base for c == event_class, else 0
///   boundary_misalignment boundary_proximity: sigma_c = base * max(0, 1 - gap / width)
///
/// `gap` is the distance of x from the clean decision boundary measured in
/// true-logit units: the top-two logit difference for multi-class tasks and
/// |f_c| per class for multi-label tasks.
struct NoiseProfile {
  NoiseKind kind = NoiseKind::uniform_flip;
  double base_scale = 0.0;
  ScaleField field;

  // Profile with the family for `kind` and default parameters; entries in
  // `overrides` replace defaults and unknown names are rejected.
  static NoiseProfile make(NoiseKind kind, double base_scale,
                           const std::map<std::string, double>& overrides = {});

  void validate() const;

  Vector scales_at(const Vector& true_logits, LabelMode mode) const;
};

// Affine true logit function f(x) = weight * x + bias, weight K x D.
struct LinearLogits {
  Matrix weight;
  Vector bias;

  Vector operator()(const Vector& x) const { return weight * x + bias; }
};

enum class SplitTag { train, val, test, all };

std::string to_string(SplitTag tag);
SplitTag split_tag_from_string(const std::string& name);

/// Features with clean labels, noisy labels and the per-sample noise scales
/// that produced them. Labels are N x 1 class indices (multi-class) or N x K
/// multi-hot rows (multi-label).
struct NoisyDataset {
  LabelMode mode = LabelMode::multiclass;
  int num_classes = 2;
  Matrix features;
  IndexMatrix clean_labels;
  IndexMatrix noisy_labels;
  Matrix true_scales;
  // False for data loaded without clean labels (clean_label: null); the
  // clean_labels matrix then mirrors noisy_labels and must not be scored.
  bool has_clean_labels = true;
  SplitTag split_tag = SplitTag::all;
  std::uint64_t seed = 0;
  NoiseProfile profile;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }

  void validate() const;

  NoisyDataset subset(const std::vector<Eigen::Index>& rows, SplitTag tag) const;
};

struct CleanTaskConfig {
  int n = 1000;
  int dim = 2;
  int num_classes = 2;
  // Distance between the two blobs sharing an axis; blob centres sit at
  // +-separation/2 along successive coordinate axes.
  double separation = 4.0;
  double blob_std = 1.0;
  // Relative class frequencies; empty means balanced.
  std::vector<double> class_weights;
  LabelMode mode = LabelMode::multiclass;
  std::uint64_t seed = 0;
};

struct CleanTask {
  Matrix features;
  LinearLogits true_logits;
  std::vector<int> blob_ids;
  IndexMatrix clean_labels;
  LabelMode mode = LabelMode::multiclass;
  int num_classes = 2;
};

// Index of the largest entry, lowest index on ties.
Eigen::Index argmax_index(const Vector& v);

/// Gaussian-blob task whose clean labels are the argmax (multi-class) or
/// positivity (multi-label) of the linear discriminant of the blobs.
CleanTask make_clean_task(const CleanTaskConfig& cfg);

/// Draws noisy labels from u_c = f_c(x) + sigma_c(x) z_c with z_c ~ N(0, 1),
/// keyed by (seed, sample index, class index). The label is argmax_c u_c for
/// multi-class tasks and 1[u_c > 0] per class for multi-label tasks.
NoisyDataset corrupt(const Matrix& features, const IndexMatrix& clean_labels, const LinearLogits& true_logits,
                     const NoiseProfile& profile, LabelMode mode, int num_classes, std::uint64_t seed);

/// Per-sample probability that the noisy label differs from the clean one
/// under the generative process (any class flipped, for multi-label).
Vector flip_probabilities(const Matrix& features, const IndexMatrix& clean_labels,
                          const LinearLogits& true_logits, const NoiseProfile& profile, LabelMode mode);

// Largest-remainder split sizes; every part must receive at least one row.
std::array<Eigen::Index, 3> split_sizes(Eigen::Index n, const std::array<double, 3>& fractions);

struct DatasetSplits {
  NoisyDataset train;
  NoisyDataset val;
  NoisyDataset test;
};

// Shuffled, disjoint and exhaustive three-way split.
DatasetSplits split(const NoisyDataset& dataset, const std::array<double, 3>& fractions, std::uint64_t seed);

// JSON-Lines: one header object, then one object per sample.
std::string dataset_to_jsonl(const NoisyDataset& dataset);
NoisyDataset dataset_from_jsonl(const std::string& text);

}  // namespace hetnoise
