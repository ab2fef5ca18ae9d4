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

#include "hetnoise/sweep.hpp"

#include "hetnoise/parallel.hpp"

#include <cmath>

namespace hetnoise {

std::string to_string(SelectionMetric m) {
  switch (m) {
    case SelectionMetric::f1: return "f1";
    case SelectionMetric::auprc: return "auprc";
    case SelectionMetric::val_loss: return "val_loss";
  }
  throw InvalidConfig("unknown selection metric");
}

SelectionMetric selection_metric_from_string(const std::string& name) {
  for (SelectionMetric m : {SelectionMetric::f1, SelectionMetric::auprc, SelectionMetric::val_loss}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidConfig("unknown selection metric '" + name + "'");
}

std::vector<double> default_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
  for (int i = 1; i <= 10; ++i) grid.push_back(static_cast<double>(i));
  return grid;
}

void validate_grid(std::span<const double> grid) {
  if (grid.empty()) throw InvalidConfig("temperature grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || !std::isfinite(grid[i])) throw InvalidConfig("temperatures must be positive and finite");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InvalidConfig("temperature grid must be strictly increasing");
  }
}

double select_tau(std::span<const TauOutcome> table, SelectionMetric metric) {
  const TauOutcome* best = nullptr;
  double best_value = 0.0;
  for (const auto& row : table) {
    if (!row.ok()) continue;
    const std::optional<double>& v =
        metric == SelectionMetric::f1 ? row.f1 : (metric == SelectionMetric::auprc ? row.auprc : row.val_loss);
    if (!v || !std::isfinite(*v)) continue;
    // Negate losses so that larger is always better.
    const double value = metric == SelectionMetric::val_loss ? -*v : *v;
    bool take = best == nullptr || value > best_value;
    if (!take && value == best_value) {
      const double d_new = std::abs(row.tau - 1.0);
      const double d_old = std::abs(best->tau - 1.0);
      take = d_new < d_old || (d_new == d_old && row.tau < best->tau);
    }
    if (take) {
      best = &row;
      best_value = value;
    }
  }
  if (best == nullptr) throw std::runtime_error("sweep failed at every temperature");
  return best->tau;
}

HetModel ModelTemplate::instantiate(int input_dim, int num_classes, double temperature) const {
  MCConfig cfg = mc;
  cfg.temperature = temperature;
  HetModel m = make_model(input_dim, hidden, num_classes, activation, head_mode, cfg, init_seed);
  m.sigma_min = sigma_min;
  m.validate();
  return m;
}

SweepOutcome run_sweep(const NoisyDataset& train_set, const NoisyDataset& val_set, const ModelTemplate& tmpl,
                       const TrainConfig& train_cfg, std::span<const double> grid, SelectionMetric metric) {
  if (!is_probabilistic(tmpl.head_mode)) throw InvalidConfig("temperature sweeps need a probabilistic head");
  validate_grid(grid);
  if (val_set.size() < 1) throw InvalidInput("validation split is empty");

  const std::size_t n = grid.size();
  std::vector<TauOutcome> table(n);
  std::vector<std::optional<HetModel>> models(n);
  parallel_for(n, [&](std::size_t i) {
    TauOutcome& row = table[i];
    row.tau = grid[i];
    try {
      const HetModel init = tmpl.instantiate(static_cast<int>(train_set.dim()), train_set.num_classes, grid[i]);
      FitResult fitted = fit(init, train_set, train_cfg);
      const PredictionSet preds = predict_dataset(fitted.model, val_set, fitted.model.mc);
      row.f1 = prediction_f1(preds);
      row.val_loss = preds.loss.mean();
      try {
        row.auprc = prediction_auprc(preds);
      } catch (const UndefinedMetric&) {
      }
      models[i] = std::move(fitted.model);
    } catch (const std::exception& e) {
      row.status = std::string("failed: ") + e.what();
      row.f1.reset();
      row.auprc.reset();
      row.val_loss.reset();
    }
  });

  SweepOutcome out;
  out.result.grid.assign(grid.begin(), grid.end());
  out.result.per_tau = std::move(table);
  out.result.selection_metric = metric;
  out.result.tau_star = select_tau(out.result.per_tau, metric);
  for (std::size_t i = 0; i < n; ++i) {
    if (grid[i] == out.result.tau_star) out.best_model = std::move(models[i]);
  }
  return out;
}

Json sweep_to_json(const SweepResult& result) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(); };
  Json rows = Json::array();
  for (const auto& r : result.per_tau) {
    rows.push_back({{"tau", r.tau}, {"f1", opt(r.f1)}, {"auprc", opt(r.auprc)}, {"val_loss", opt(r.val_loss)},
                    {"status", r.status}});
  }
  return {
      {"format_version", kFormatVersion},
      {"grid", result.grid},
      {"per_tau", rows},
      {"tau_star", result.tau_star},
      {"selection_metric", to_string(result.selection_metric)},
  };
}

}  // namespace hetnoise
