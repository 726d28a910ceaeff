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

#ifndef CLICKMIL_ANNOTATOR_H_
#define CLICKMIL_ANNOTATOR_H_

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clickmil/defaults.h"
#include "clickmil/geometry.h"
#include "clickmil/rng.h"

namespace clickmil {

struct ClickRecord {
  std::string target_id;
  std::string annotator_id;
  Point position;
  double response_time_ms = 0.0;
};

// Learned annotator behavior. All polynomials use ascending coefficients.
struct ErrorModel {
  double sigma_bc = 0.0;
  double d_max = defaults::kDMaxPixels;
  // Click distance (px) -> log(object bbox area / image area).
  std::vector<double> mu_coeffs;
  // Distance range the regressor was fitted on; evaluation clamps into it.
  double mu_lo = 0.0;
  double mu_hi = 0.0;
  double sigma_ba = 0.0;
  // sqrt(object area) (px) -> expected click error distance (px).
  std::vector<double> sim_distance_coeffs;

  // Estimated log relative area for two clicks `distance` apart.
  double Mu(double distance) const;
  // Expected error distance, floored at zero.
  double SimDistance(double sqrt_area) const;
  // Throws std::invalid_argument naming the first violated invariant.
  void Validate() const;
};

struct QualificationResult {
  std::vector<double> per_polygon_errors;
  double mean_error = 0.0;
  bool passed = false;
};

// Random star-shaped polygon whose bbox covers a uniform [0.02, 0.9] fraction
// of the canvas. About half of the outputs get one vertex dented inward so the
// bbox center and the mass center disagree.
Polygon GeneratePolygon(Rng& rng, double canvas_w, double canvas_h);

// Scores one click per polygon against the polygon's bbox center.
// Throws std::invalid_argument when the counts differ or are zero.
QualificationResult EvaluateQualification(
    std::span<const ClickRecord> clicks, std::span<const Polygon> polygons,
    double pass_threshold = defaults::kQualificationThresholdPixels);

// Maximum-likelihood scale of an isotropic 2-D Gaussian from radial errors:
// sigma^2 = sum(d^2) / (2N). Requires at least 30 non-negative samples and
// a positive result.
double FitSigmaBc(std::span<const double> errors);

// Order statistic of the error distances (linear interpolation).
double FitDMax(std::span<const double> errors,
               double percentile = defaults::kDMaxPercentile);

struct DistanceAreaPair {
  double click_distance = 0.0;
  double log_rel_area = 0.0;
};

// Least-squares polynomial for log relative area against click distance.
// Requires at least 50 pairs.
std::vector<double> FitMu(std::span<const DistanceAreaPair> pairs,
                          int degree = defaults::kMuDegree);

// RMS residual of `mu` over `pairs`, floored at 1e-3.
double ComputeSigmaBa(std::span<const DistanceAreaPair> pairs,
                      std::span<const double> mu_coeffs);

struct AreaErrorPair {
  double sqrt_area = 0.0;
  double error = 0.0;
};

std::vector<double> FitSimDistanceLaw(std::span<const AreaErrorPair> pairs,
                                      int degree = 2);

// Noisy click on `gt`: uniform direction, Rayleigh radius whose mean is
// model.SimDistance(sqrt(area)). The result is clamped into the image.
ClickRecord SimulateClick(const Box& gt, double img_w, double img_h,
                          const ErrorModel& model, Rng& rng,
                          std::string annotator_id = "sim-0",
                          std::string target_id = "");

std::pair<ClickRecord, ClickRecord> SimulateTwoClicks(
    const Box& gt, double img_w, double img_h, const ErrorModel& model,
    Rng& rng, std::string target_id = "");

// One click of the polygon qualification corpus.
struct PolygonClick {
  std::string polygon_id;
  double canvas_w = 0.0;
  double canvas_h = 0.0;
  Polygon polygon;
  ClickRecord click;
};

// Default error-distance law used for simulation when no fitted model is
// given. Grows with object size and flattens for image-sized objects.
std::vector<double> DefaultSimDistanceCoeffs();

// Simulated qualification corpus: `num_polygons` polygons, each clicked by
// `clicks_per_polygon` independent simulated annotators following `law`.
std::vector<PolygonClick> SimulatePolygonCorpus(
    int num_polygons, int clicks_per_polygon, std::span<const double> law,
    std::uint64_t seed, double canvas_w = defaults::kCanvasWidth,
    double canvas_h = defaults::kCanvasHeight);

struct ErrorModelFitOptions {
  int mu_degree = defaults::kMuDegree;
  // When false, d_max keeps the pinned protocol value.
  bool fit_d_max = false;
  double d_max_percentile = defaults::kDMaxPercentile;
};

// Fits every ErrorModel field from polygon clicks. Clicks are grouped by
// polygon id; consecutive clicks of one polygon form the two-click pairs.
ErrorModel FitErrorModel(std::span<const PolygonClick> corpus,
                         const ErrorModelFitOptions& options = {});

// Model fitted on a seeded simulated corpus drawn from the default law.
ErrorModel ReplicaErrorModel(std::uint64_t seed = 0);

}  // namespace clickmil

#endif  // CLICKMIL_ANNOTATOR_H_
