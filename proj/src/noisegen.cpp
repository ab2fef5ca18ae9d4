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

#include "hetnoise/noisegen.hpp"

#include "hetnoise/prob_head.hpp"
#include "hetnoise/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hetnoise {
namespace {

// Stream labels separating the generator's independent random streams.
constexpr std::uint64_t kBlobStream = 0xb10b;
constexpr std::uint64_t kFeatureStream = 0xfea7;
constexpr std::uint64_t kCentreStream = 0xce47;
constexpr std::uint64_t kShuffleStream = 0x5917;

const std::map<std::string, double>& default_params(NoiseKind kind) {
  static const std::map<std::string, double> constant{};
  static const std::map<std::string, double> margin_window{{"background", 0.0}, {"margin", 1.0}};
  static const std::map<std::string, double> single_class{{"event_class", 1.0}};
  static const std::map<std::string, double> boundary_proximity{{"width", 1.0}};
  switch (kind) {
    case NoiseKind::uniform_flip: return constant;
    case NoiseKind::region_ambiguity: return margin_window;
    case NoiseKind::stochastic_event: return single_class;
    case NoiseKind::boundary_misalignment: return boundary_proximity;
  }
  throw InvalidConfig("unknown noise kind");
}

const char* family_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::uniform_flip: return "constant";
    case NoiseKind::region_ambiguity: return "margin_window";
    case NoiseKind::stochastic_event: return "single_class";
    case NoiseKind::boundary_misalignment: return "boundary_proximity";
  }
  throw InvalidConfig("unknown noise kind");
}

// Distance to the clean boundary in logit units, per class.
Vector boundary_gaps(const Vector& logits, LabelMode mode) {
  if (mode == LabelMode::multilabel) return logits.cwiseAbs();
  if (logits.size() < 2) return Vector::Constant(logits.size(), std::numeric_limits<double>::infinity());
  Vector sorted = logits;
  std::sort(sorted.data(), sorted.data() + sorted.size(), std::greater<>());
  return Vector::Constant(logits.size(), sorted(0) - sorted(1));
}

}  // namespace

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::uniform_flip: return "uniform_flip";
    case NoiseKind::region_ambiguity: return "region_ambiguity";
    case NoiseKind::stochastic_event: return "stochastic_event";
    case NoiseKind::boundary_misalignment: return "boundary_misalignment";
  }
  throw InvalidConfig("unknown noise kind");
}

NoiseKind noise_kind_from_string(const std::string& name) {
  for (NoiseKind k : {NoiseKind::uniform_flip, NoiseKind::region_ambiguity, NoiseKind::stochastic_event,
                      NoiseKind::boundary_misalignment}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidConfig("unknown noise profile kind '" + name + "'");
}

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
    case SplitTag::all: return "all";
  }
  throw InvalidConfig("unknown split tag");
}

SplitTag split_tag_from_string(const std::string& name) {
  for (SplitTag t : {SplitTag::train, SplitTag::val, SplitTag::test, SplitTag::all}) {
    if (to_string(t) == name) return t;
  }
  throw FormatError("unknown split tag '" + name + "'");
}

NoiseProfile NoiseProfile::make(NoiseKind kind, double base_scale,
                                const std::map<std::string, double>& overrides) {
  NoiseProfile p;
  p.kind = kind;
  p.base_scale = base_scale;
  p.field.family = family_name(kind);
  p.field.params = default_params(kind);
  for (const auto& [name, value] : overrides) {
    if (!p.field.params.contains(name))
      throw InvalidConfig("parameter '" + name + "' does not apply to " + to_string(kind));
    p.field.params[name] = value;
  }
  p.validate();
  return p;
}

void NoiseProfile::validate() const {
  if (!(base_scale >= 0.0) || !std::isfinite(base_scale)) throw InvalidConfig("base_scale must be finite and >= 0");
  if (field.family != family_name(kind))
    throw InvalidConfig("scale field '" + field.family + "' does not match kind " + to_string(kind));
  const auto& expected = default_params(kind);
  if (field.params.size() != expected.size())
    throw InvalidConfig("scale field parameters do not match family " + field.family);
  for (const auto& [name, value] : field.params) {
    if (!expected.contains(name)) throw InvalidConfig("unexpected scale field parameter '" + name + "'");
    if (!std::isfinite(value)) throw InvalidConfig("scale field parameter '" + name + "' is not finite");
  }
  switch (kind) {
    case NoiseKind::region_ambiguity:
      if (field.params.at("margin") < 0.0 || field.params.at("background") < 0.0)
        throw InvalidConfig("margin and background must be >= 0");
      break;
    case NoiseKind::stochastic_event: {
      const double c = field.params.at("event_class");
      if (c < 0.0 || c != std::floor(c)) throw InvalidConfig("event_class must be a class index");
      break;
    }
    case NoiseKind::boundary_misalignment:
      if (!(field.params.at("width") > 0.0)) throw InvalidConfig("width must be > 0");
      break;
    case NoiseKind::uniform_flip:
      break;
  }
}

Vector NoiseProfile::scales_at(const Vector& true_logits, LabelMode mode) const {
  const Eigen::Index k = true_logits.size();
  switch (kind) {
    case NoiseKind::uniform_flip:
      return Vector::Constant(k, base_scale);
    case NoiseKind::region_ambiguity: {
      const Vector gaps = boundary_gaps(true_logits, mode);
      const double margin = field.params.at("margin");
      const double background = field.params.at("background");
      Vector s(k);
      for (Eigen::Index c = 0; c < k; ++c) s(c) = gaps(c) < margin ? base_scale : background;
      return s;
    }
    case NoiseKind::stochastic_event: {
      const auto event = static_cast<Eigen::Index>(field.params.at("event_class"));
      if (event >= k) throw InvalidConfig("event_class exceeds the class count");
      Vector s = Vector::Zero(k);
      s(event) = base_scale;
      return s;
    }
    case NoiseKind::boundary_misalignment: {
      const Vector gaps = boundary_gaps(true_logits, mode);
      const double width = field.params.at("width");
      Vector s(k);
      for (Eigen::Index c = 0; c < k; ++c) s(c) = base_scale * std::max(0.0, 1.0 - gaps(c) / width);
      return s;
    }
  }
  throw InvalidConfig("unknown noise kind");
}

void NoisyDataset::validate() const {
  const Eigen::Index n = features.rows();
  if (n < 1) throw InvalidInput("dataset is empty");
  if (num_classes < 1) throw InvalidInput("dataset needs at least one class");
  const Eigen::Index label_cols = mode == LabelMode::multiclass ? 1 : num_classes;
  if (clean_labels.rows() != n || noisy_labels.rows() != n || true_scales.rows() != n)
    throw InvalidInput("dataset columns have different lengths");
  if (clean_labels.cols() != label_cols || noisy_labels.cols() != label_cols || true_scales.cols() != num_classes)
    throw InvalidInput("dataset label or scale width does not match the class count");
  if (!features.allFinite() || !true_scales.allFinite()) throw InvalidInput("dataset has non-finite values");
  if ((true_scales.array() < 0.0).any()) throw InvalidInput("dataset has negative noise scales");
  const int hi = mode == LabelMode::multiclass ? num_classes - 1 : 1;
  if ((clean_labels.array() < 0).any() || (clean_labels.array() > hi).any() || (noisy_labels.array() < 0).any() ||
      (noisy_labels.array() > hi).any())
    throw InvalidInput("dataset label out of range");
  if (has_clean_labels) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((true_scales.row(i).array() == 0.0).all() && clean_labels.row(i) != noisy_labels.row(i))
        throw InvalidInput("noisy label differs from clean label on a noise-free sample");
    }
  }
}

NoisyDataset NoisyDataset::subset(const std::vector<Eigen::Index>& rows, SplitTag tag) const {
  NoisyDataset out;
  out.mode = mode;
  out.num_classes = num_classes;
  out.split_tag = tag;
  out.seed = seed;
  out.profile = profile;
  out.has_clean_labels = has_clean_labels;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.features.resize(n, features.cols());
  out.clean_labels.resize(n, clean_labels.cols());
  out.noisy_labels.resize(n, noisy_labels.cols());
  out.true_scales.resize(n, true_scales.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index r = rows[static_cast<std::size_t>(i)];
    out.features.row(i) = features.row(r);
    out.clean_labels.row(i) = clean_labels.row(r);
    out.noisy_labels.row(i) = noisy_labels.row(r);
    out.true_scales.row(i) = true_scales.row(r);
  }
  return out;
}

Eigen::Index argmax_index(const Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

CleanTask make_clean_task(const CleanTaskConfig& cfg) {
  if (cfg.n < 1) throw InvalidConfig("n must be >= 1");
  if (cfg.dim < 1) throw InvalidConfig("dim must be >= 1");
  if (cfg.num_classes < (cfg.mode == LabelMode::multiclass ? 2 : 1))
    throw InvalidConfig("too few classes for the label mode");
  if (!(cfg.blob_std > 0.0) || !std::isfinite(cfg.blob_std)) throw InvalidConfig("blob_std must be positive");
  if (!(cfg.separation >= 0.0) || !std::isfinite(cfg.separation)) throw InvalidConfig("separation must be >= 0");

  const int k = cfg.num_classes;
  const int d = cfg.dim;
  std::vector<double> weights = cfg.class_weights;
  if (weights.empty()) weights.assign(static_cast<std::size_t>(k), 1.0);
  if (static_cast<int>(weights.size()) != k) throw InvalidConfig("class_weights needs one entry per class");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidConfig("class weights must be positive");
    total += w;
  }

  const double radius = 0.5 * cfg.separation;
  Matrix centres = Matrix::Zero(k, d);
  const CounterRng centre_rng(cfg.seed, kCentreStream);
  for (int c = 0; c < k; ++c) {
    if (c < 2 * d) {
      centres(c, c / 2) = (c % 2 == 0 ? radius : -radius);
    } else {
      Vector dir(d);
      for (int j = 0; j < d; ++j) dir(j) = centre_rng.normal(static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(j));
      centres.row(c) = radius * dir.normalized().transpose();
    }
  }

  CleanTask task;
  task.mode = cfg.mode;
  task.num_classes = k;
  const double var = cfg.blob_std * cfg.blob_std;
  task.true_logits.weight = centres / var;
  task.true_logits.bias.resize(k);
  for (int c = 0; c < k; ++c) {
    task.true_logits.bias(c) =
        -centres.row(c).squaredNorm() / (2.0 * var) + std::log(weights[static_cast<std::size_t>(c)] * k / total);
  }

  const CounterRng blob_rng(cfg.seed, kBlobStream);
  const CounterRng feature_rng(cfg.seed, kFeatureStream);
  task.features.resize(cfg.n, d);
  task.blob_ids.resize(static_cast<std::size_t>(cfg.n));
  task.clean_labels.resize(cfg.n, cfg.mode == LabelMode::multiclass ? 1 : k);
  for (int i = 0; i < cfg.n; ++i) {
    const auto row = static_cast<std::uint64_t>(i);
    const double u = blob_rng.uniform(row, 0) * total;
    int blob = k - 1;
    double acc = 0.0;
    for (int c = 0; c < k; ++c) {
      acc += weights[static_cast<std::size_t>(c)];
      if (u < acc) {
        blob = c;
        break;
      }
    }
    task.blob_ids[static_cast<std::size_t>(i)] = blob;
    for (int j = 0; j < d; ++j)
      task.features(i, j) = centres(blob, j) + cfg.blob_std * feature_rng.normal(row, static_cast<std::uint64_t>(j));
    const Vector f = task.true_logits(task.features.row(i).transpose());
    if (cfg.mode == LabelMode::multiclass) {
      task.clean_labels(i, 0) = static_cast<int>(argmax_index(f));
    } else {
      for (int c = 0; c < k; ++c) task.clean_labels(i, c) = f(c) > 0.0 ? 1 : 0;
    }
  }
  return task;
}

NoisyDataset corrupt(const Matrix& features, const IndexMatrix& clean_labels, const LinearLogits& true_logits,
                     const NoiseProfile& profile, LabelMode mode, int num_classes, std::uint64_t seed) {
  profile.validate();
  if (true_logits.weight.rows() != num_classes || true_logits.bias.size() != num_classes ||
      true_logits.weight.cols() != features.cols())
    throw InvalidInput("true logit function does not match the feature width or class count");
  if (clean_labels.rows() != features.rows()) throw InvalidInput("clean labels and features differ in length");

  NoisyDataset ds;
  ds.mode = mode;
  ds.num_classes = num_classes;
  ds.features = features;
  ds.clean_labels = clean_labels;
  ds.noisy_labels.resize(clean_labels.rows(), clean_labels.cols());
  ds.true_scales.resize(features.rows(), num_classes);
  ds.seed = seed;
  ds.profile = profile;

  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const Vector f = true_logits(features.row(i).transpose());
    const Vector sigma = profile.scales_at(f, mode);
    ds.true_scales.row(i) = sigma.transpose();
    const CounterRng rng(seed, static_cast<std::uint64_t>(i));
    Vector u(num_classes);
    for (int c = 0; c < num_classes; ++c)
      u(c) = f(c) + sigma(c) * (sigma(c) == 0.0 ? 0.0 : rng.normal(0, static_cast<std::uint64_t>(c)));
    if (mode == LabelMode::multiclass) {
      ds.noisy_labels(i, 0) = static_cast<int>(argmax_index(u));
    } else {
      for (int c = 0; c < num_classes; ++c) ds.noisy_labels(i, c) = u(c) > 0.0 ? 1 : 0;
    }
  }
  ds.validate();
  return ds;
}

Vector flip_probabilities(const Matrix& features, const IndexMatrix& clean_labels, const LinearLogits& true_logits,
                          const NoiseProfile& profile, LabelMode mode) {
  Vector out(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const Vector f = true_logits(features.row(i).transpose());
    const Vector sigma = profile.scales_at(f, mode);
    if (mode == LabelMode::multiclass) {
      const Vector p = gaussian_argmax_prob(LogitDistribution<double>{f, sigma});
      out(i) = 1.0 - p(clean_labels(i, 0));
    } else {
      double keep = 1.0;
      for (Eigen::Index c = 0; c < f.size(); ++c) {
        if (sigma(c) == 0.0) continue;
        // Noisy label is 1[f + sigma z > 0].
        const double p_pos = normal_cdf(f(c) / sigma(c));
        keep *= clean_labels(i, c) == 1 ? p_pos : 1.0 - p_pos;
      }
      out(i) = 1.0 - keep;
    }
  }
  return out;
}

std::array<Eigen::Index, 3> split_sizes(Eigen::Index n, const std::array<double, 3>& fractions) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0) || !std::isfinite(f)) throw InvalidConfig("split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidConfig("split fractions must sum to 1");

  std::array<Eigen::Index, 3> sizes{};
  std::array<double, 3> remainder{};
  Eigen::Index assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    // Nudge so that e.g. 0.7 * 10 = 7.000000000000001 floors to 7.
    const double whole = std::floor(exact + 1e-9);
    sizes[i] = static_cast<Eigen::Index>(whole);
    remainder[i] = std::max(0.0, exact - whole);
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t j = 0; assigned < n; ++j, ++assigned) ++sizes[order[j % 3]];
  for (Eigen::Index s : sizes) {
    if (s < 1) throw InvalidConfig("split would leave a part with no samples");
  }
  return sizes;
}

DatasetSplits split(const NoisyDataset& dataset, const std::array<double, 3>& fractions, std::uint64_t seed) {
  dataset.validate();
  const Eigen::Index n = dataset.size();
  const auto sizes = split_sizes(n, fractions);

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  const CounterRng rng(seed, kShuffleStream);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(i + 1), static_cast<std::uint64_t>(i)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  auto take = [&](Eigen::Index begin, Eigen::Index count) {
    return std::vector<Eigen::Index>(perm.begin() + begin, perm.begin() + begin + count);
  };
  DatasetSplits out;
  out.train = dataset.subset(take(0, sizes[0]), SplitTag::train);
  out.val = dataset.subset(take(sizes[0], sizes[1]), SplitTag::val);
  out.test = dataset.subset(take(sizes[0] + sizes[1], sizes[2]), SplitTag::test);
  return out;
}

}  // namespace hetnoise
