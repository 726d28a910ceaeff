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

#include "clickmil/polynomial.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace clickmil {

double EvalPolynomial(std::span<const double> coeffs, double x) {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double EvalPolynomialDerivative(std::span<const double> coeffs, double x) {
  double acc = 0.0;
  for (std::size_t i = coeffs.size(); i-- > 1;) {
    acc = acc * x + static_cast<double>(i) * coeffs[i];
  }
  return acc;
}

std::vector<double> FitPolynomial(std::span<const double> xs,
                                  std::span<const double> ys, int degree) {
  if (xs.size() != ys.size()) {
    throw std::invalid_argument("FitPolynomial: length mismatch");
  }
  if (degree < 0) throw std::invalid_argument("FitPolynomial: negative degree");
  const auto n = static_cast<Eigen::Index>(xs.size());
  const Eigen::Index m = degree + 1;
  if (n < m) throw std::invalid_argument("FitPolynomial: too few samples");

  // Center and scale x so the Vandermonde matrix stays well conditioned.
  double lo = xs[0], hi = xs[0];
  for (double x : xs) {
    if (!std::isfinite(x)) throw std::invalid_argument("FitPolynomial: non-finite x");
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double shift = (lo + hi) / 2.0;
  const double scale = hi > lo ? (hi - lo) / 2.0 : 1.0;

  Eigen::MatrixXd design(n, m);
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = (xs[i] - shift) / scale;
    double p = 1.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      design(i, j) = p;
      p *= t;
    }
    target(i) = ys[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < m) {
    throw std::invalid_argument("FitPolynomial: rank-deficient design");
  }
  const Eigen::VectorXd scaled = qr.solve(target);

  // Expand q((x - shift)/scale) back into powers of x.
  std::vector<double> coeffs(m, 0.0);
  for (Eigen::Index j = 0; j < m; ++j) {
    // (x - shift)^j / scale^j = sum_k C(j,k) x^k (-shift)^(j-k) / scale^j
    double c = 1.0;  // C(j, 0)
    for (Eigen::Index k = 0; k <= j; ++k) {
      if (k > 0) c = c * static_cast<double>(j - k + 1) / static_cast<double>(k);
      coeffs[k] += scaled(j) * c * std::pow(-shift, static_cast<double>(j - k)) /
                   std::pow(scale, static_cast<double>(j));
    }
  }
  return coeffs;
}

}  // namespace clickmil
