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

#ifndef CLICKMIL_SVM_H_
#define CLICKMIL_SVM_H_

#include <cstdint>
#include <span>
#include <vector>

namespace clickmil {

// Linear scorer A(x) = w.x + b.
struct AppearanceModel {
  std::vector<double> weights;
  double bias = 0.0;

  double Margin(std::span<const double> feature) const;
};

struct SvmOptions {
  // Objective: lambda/2 |w|^2 + lambda/2 b^2 + mean hinge loss. Because the
  // loss is a mean, duplicating every sample leaves the optimum unchanged.
  double lambda = 1e-4;
  // Average the hinge loss within each class and weigh both classes equally,
  // so a few positives are not drowned out by many negatives.
  bool balance_classes = false;
  int max_epochs = 200;
  // Stop once the duality gap is at most this fraction of the primal
  // objective. The gap is checked every few epochs.
  double tolerance = 1e-3;
  std::uint64_t seed = 0;
};

struct SvmReport {
  int epochs = 0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
};

using FeatureView = std::span<const double>;

// Dual coordinate descent for the L2-regularized hinge loss with the bias
// folded in as a constant feature. Visiting order is shuffled from
// options.seed, so results are reproducible. Throws std::invalid_argument on
// an empty class or inconsistent feature dimensions.
AppearanceModel TrainSvm(std::span<const FeatureView> positives,
                         std::span<const FeatureView> negatives,
                         const SvmOptions& options, SvmReport* report = nullptr);

}  // namespace clickmil

#endif  // CLICKMIL_SVM_H_
