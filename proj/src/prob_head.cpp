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

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace hetnoise {
namespace {

constexpr double kTail = 12.0;  // |z| beyond this carries < 1e-32 mass

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                    double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Adaptive Simpson over [a, b], pre-split into uniform panels.
double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  constexpr int kPanels = 64;
  double total = 0.0;
  const double h = (b - a) / kPanels;
  for (int i = 0; i < kPanels; ++i) {
    const double lo = a + i * h;
    const double hi = (i + 1 == kPanels) ? b : lo + h;
    const double flo = f(lo);
    const double fhi = f(hi);
    const double fmid = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    total += simpson_step(f, lo, hi, flo, fmid, fhi, whole, tol / kPanels, 40);
  }
  return total;
}

void validate_for_argmax(const LogitDistribution<double>& dist) { dist.validate(); }

// Shared bookkeeping for point-mass (zero-scale) classes.
struct PointMasses {
  double top = -std::numeric_limits<double>::infinity();
  int tied = 0;
};

PointMasses point_masses(const LogitDistribution<double>& dist) {
  PointMasses pm;
  for (Eigen::Index k = 0; k < dist.num_classes(); ++k) {
    if (dist.scales(k) != 0.0) continue;
    if (dist.means(k) > pm.top) {
      pm.top = dist.means(k);
      pm.tied = 1;
    } else if (dist.means(k) == pm.top) {
      ++pm.tied;
    }
  }
  return pm;
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

Vector gaussian_argmax_prob_quadrature(const LogitDistribution<double>& dist) {
  validate_for_argmax(dist);
  const Eigen::Index k_count = dist.num_classes();
  Vector probs = Vector::Zero(k_count);
  if (k_count == 1) {
    probs(0) = 1.0;
    return probs;
  }
  const PointMasses pm = point_masses(dist);

  for (Eigen::Index c = 0; c < k_count; ++c) {
    const double fc = dist.means(c);
    const double sc = dist.scales(c);
    if (sc == 0.0) {
      if (fc < pm.top) continue;
      double p = 1.0 / pm.tied;
      for (Eigen::Index k = 0; k < k_count; ++k) {
        if (k == c || dist.scales(k) == 0.0) continue;
        p *= normal_cdf((fc - dist.means(k)) / dist.scales(k));
      }
      probs(c) = p;
      continue;
    }
    // Integrate over the standardised logit of class c.
    double lo = -kTail;
    if (pm.tied > 0) lo = std::max(lo, (pm.top - fc) / sc);
    if (lo >= kTail) continue;
    auto integrand = [&](double z) {
      const double t = fc + sc * z;
      double v = normal_pdf(z);
      for (Eigen::Index k = 0; k < k_count; ++k) {
        if (k == c || dist.scales(k) == 0.0) continue;
        v *= normal_cdf((t - dist.means(k)) / dist.scales(k));
      }
      return v;
    };
    probs(c) = integrate(integrand, lo, kTail, 1e-13);
  }
  return probs;
}

Vector gaussian_argmax_prob(const LogitDistribution<double>& dist) {
  validate_for_argmax(dist);
  if (dist.num_classes() != 2) return gaussian_argmax_prob_quadrature(dist);
  const double spread = std::hypot(dist.scales(0), dist.scales(1));
  Vector probs(2);
  if (spread == 0.0) {
    const double d = dist.means(0) - dist.means(1);
    probs(0) = d > 0 ? 1.0 : (d < 0 ? 0.0 : 0.5);
  } else {
    probs(0) = normal_cdf((dist.means(0) - dist.means(1)) / spread);
    probs(1) = normal_cdf((dist.means(1) - dist.means(0)) / spread);
    return probs;
  }
  probs(1) = 1.0 - probs(0);
  return probs;
}

}  // namespace hetnoise
