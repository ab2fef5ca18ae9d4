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

#include "hetnoise/train.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hetnoise {

enum class SelectionMetric { f1, auprc, val_loss };

std::string to_string(SelectionMetric m);
SelectionMetric selection_metric_from_string(const std::string& name);

// 0.1, 0.2, ..., 0.9, 1, 2, ..., 10
std::vector<double> default_grid();

// Throws InvalidConfig unless nonempty, positive, finite and strictly increasing.
void validate_grid(std::span<const double> grid);

struct TauOutcome {
  double tau = 1.0;
  // Empty when training or evaluation failed at this temperature.
  std::optional<double> f1;
  std::optional<double> auprc;
  std::optional<double> val_loss;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
};

struct SweepResult {
  std::vector<double> grid;
  std::vector<TauOutcome> per_tau;
  double tau_star = 1.0;
  SelectionMetric selection_metric = SelectionMetric::auprc;
};

/// Best temperature in a metric table: largest f1/auprc or smallest
/// val_loss; ties go to the tau nearest 1, then to the smaller tau. Rows
/// that failed or lack the metric are skipped.
double select_tau(std::span<const TauOutcome> table, SelectionMetric metric);

struct ModelTemplate {
  std::vector<int> hidden{16};
  Activation activation = Activation::relu;
  HeadMode head_mode = HeadMode::multiclass;
  double sigma_min = kDefaultSigmaMin;
  // Temperature is overwritten per grid point; samples and seed are used for
  // training-time defaults and validation predictions.
  MCConfig mc;
  std::uint64_t init_seed = 0;

  HetModel instantiate(int input_dim, int num_classes, double temperature) const;
};

struct SweepOutcome {
  SweepResult result;
  std::optional<HetModel> best_model;
};

/// Fits one model per temperature from the same initial weights, scores it
/// on the validation split and selects tau*. Probabilistic heads only.
SweepOutcome run_sweep(const NoisyDataset& train_set, const NoisyDataset& val_set, const ModelTemplate& tmpl,
                       const TrainConfig& train_cfg, std::span<const double> grid, SelectionMetric metric);

Json sweep_to_json(const SweepResult& result);

}  // namespace hetnoise
