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

#ifndef CLICKMIL_POLYNOMIAL_H_
#define CLICKMIL_POLYNOMIAL_H_

#include <span>
#include <vector>

namespace clickmil {

// Coefficients in ascending order: c[0] + c[1] x + c[2] x^2 + ...
double EvalPolynomial(std::span<const double> coeffs, double x);

// First derivative at x.
double EvalPolynomialDerivative(std::span<const double> coeffs, double x);

// Ordinary least squares polynomial fit. Throws std::invalid_argument when
// the Vandermonde design is rank deficient (e.g. fewer distinct x values
// than coefficients) or when the inputs have different lengths.
std::vector<double> FitPolynomial(std::span<const double> xs,
                                  std::span<const double> ys, int degree);

}  // namespace clickmil

#endif  // CLICKMIL_POLYNOMIAL_H_
