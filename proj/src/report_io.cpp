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

namespace hetnoise {
namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(); }

Json group_json(const UncertaintyGroup& g) {
  return {
      {"count", g.count()},
      {"median", optional_number(g.median)},
      {"histogram", {{"edges", g.histogram.edges}, {"counts", g.histogram.counts}}},
  };
}

template <typename Fn>
void for_each_scope(const EvalReport& report, Fn&& fn) {
  for (const auto* summary : {&report.all_scope, &report.per_class_scope}) {
    for (const auto& scope : summary->scopes) fn(scope);
  }
}

}  // namespace

Json report_to_json(const EvalReport& report) {
  Json densities = Json::object();
  for_each_scope(report, [&](const DensityScope& scope) {
    densities[scope.name] = {{"correct", group_json(scope.correct)}, {"incorrect", group_json(scope.incorrect)}};
  });
  return {
      {"format_version", kFormatVersion},
      {"target", to_string(report.target)},
      {"metrics",
       {{"f1", report.f1},
        {"auprc", optional_number(report.auprc)},
        {"accuracy", report.accuracy},
        {"mean_loss", report.mean_loss},
        {"sigma_oracle_spearman", optional_number(report.sigma_oracle_spearman)}}},
      {"discard",
       {{"fractions", report.discard.fractions},
        {"errors", report.discard.errors},
        {"mf", report.discard.mf},
        {"di", report.discard.di}}},
      {"densities", densities},
  };
}

std::string discard_to_csv(const DiscardCurve& curve) {
  std::string out = "fraction,error\n";
  for (std::size_t i = 0; i < curve.fractions.size(); ++i)
    out += format_double(curve.fractions[i]) + "," + format_double(curve.errors[i]) + "\n";
  return out;
}

std::string density_values_to_csv(const EvalReport& report) {
  std::string out = "scope,group,value\n";
  for_each_scope(report, [&](const DensityScope& scope) {
    for (double v : scope.correct.values) out += scope.name + ",correct," + format_double(v) + "\n";
    for (double v : scope.incorrect.values) out += scope.name + ",incorrect," + format_double(v) + "\n";
  });
  return out;
}

std::string density_histograms_to_csv(const EvalReport& report) {
  std::string out = "scope,group,bin_lo,bin_hi,count\n";
  for_each_scope(report, [&](const DensityScope& scope) {
    for (const auto& [name, group] : {std::pair<const char*, const UncertaintyGroup*>{"correct", &scope.correct},
                                      {"incorrect", &scope.incorrect}}) {
      const Histogram& h = group->histogram;
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        out += scope.name + "," + name + "," + format_double(h.edges[b]) + "," + format_double(h.edges[b + 1]) +
               "," + std::to_string(h.counts[b]) + "\n";
      }
    }
  });
  return out;
}

}  // namespace hetnoise
