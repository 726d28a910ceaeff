// Copyright 2026 The ClickMIL Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "clickmil/svm.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "clickmil/rng.h"

namespace clickmil {

namespace {

double Dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

double AppearanceModel::Margin(std::span<const double> feature) const {
  if (feature.size() != weights.size()) {
    throw std::invalid_argument("AppearanceModel: feature dimension mismatch");
  }
  return Dot(weights, feature) + bias;
}

AppearanceModel TrainSvm(std::span<const FeatureView> positives,
                         std::span<const FeatureView> negatives,
                         const SvmOptions& options, SvmReport* report) {
  if (positives.empty() || negatives.empty()) {
    throw std::invalid_argument("TrainSvm: both classes must be non-empty");
  }
  if (!(options.lambda > 0.0)) {
    throw std::invalid_argument("TrainSvm: lambda must be positive");
  }
  const std::size_t dim = positives.front().size();
  const std::size_t n = positives.size() + negatives.size();
  auto sample = [&](std::size_t i) -> FeatureView {
    return i < positives.size() ? positives[i] : negatives[i - positives.size()];
  };
  auto label = [&](std::size_t i) { return i < positives.size() ? 1.0 : -1.0; };

  std::vector<double> qdiag(n);
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureView x = sample(i);
    if (x.size() != dim) {
      throw std::invalid_argument("TrainSvm: inconsistent feature dimension");
    }
    qdiag[i] = Dot(x, x) + 1.0;
  }

  // Box constraint per sample: 1 / (lambda * n), or 1 / (2 * lambda * n_class)
  // when the classes are balanced.
  const auto bound = [&](std::size_t count) { return 1.0 / (options.lambda * count); };
  const double c_pos = options.balance_classes ? bound(2 * positives.size()) : bound(n);
  const double c_neg = options.balance_classes ? bound(2 * negatives.size()) : bound(n);
  std::vector<double> alpha(n, 0.0);
  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  double dual = 0.0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(options.seed);

  // Primal objective of the current iterate, scaled like the dual.
  const auto primal = [&] {
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = label(i) * (Dot(w, sample(i)) + b);
      loss += (label(i) > 0 ? c_pos : c_neg) * std::max(0.0, 1.0 - m);
    }
    return 0.5 * (Dot(w, w) + b * b) + loss;
  };

  constexpr int kCheckEvery = 5;
  int epoch = 0;
  while (epoch < options.max_epochs) {
    ++epoch;
    rng.Shuffle(order.begin(), order.end());
    for (std::size_t i : order) {
      const FeatureView x = sample(i);
      const double y = label(i);
      const double c = y > 0 ? c_pos : c_neg;
      const double g = y * (Dot(w, x) + b) - 1.0;
      double pg = g;
      if (alpha[i] == 0.0) {
        pg = std::min(g, 0.0);
      } else if (alpha[i] == c) {
        pg = std::max(g, 0.0);
      }
      if (std::abs(pg) < 1e-12) continue;
      const double updated = std::clamp(alpha[i] - g / qdiag[i], 0.0, c);
      const double delta = updated - alpha[i];
      if (delta == 0.0) continue;
      alpha[i] = updated;
      const double step = delta * y;
      for (std::size_t d = 0; d < dim; ++d) w[d] += step * x[d];
      b += step;
      dual += -delta * g - 0.5 * delta * delta * qdiag[i];
    }
    if (epoch % kCheckEvery == 0 || epoch == options.max_epochs) {
      const double p = primal();
      if (p - dual <= options.tolerance * std::max(p, 1e-12)) break;
    }
  }

  // The C-form (1/2|w|^2 + sum C_i hinge_i) and the lambda-form share the
  // minimizer; objective values differ by a factor lambda.
  if (report != nullptr) {
    report->epochs = epoch;
    report->primal_objective = options.lambda * primal();
    report->dual_objective = options.lambda * dual;
  }
  AppearanceModel model{std::move(w), b};
  return model;
}

}  // namespace clickmil
