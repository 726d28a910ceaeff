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

#include "clickmil/annotator.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>

#include "clickmil/polynomial.h"

namespace clickmil {

double ErrorModel::Mu(double distance) const {
  const double d = mu_hi > mu_lo ? std::clamp(distance, mu_lo, mu_hi) : distance;
  return EvalPolynomial(mu_coeffs, d);
}

double ErrorModel::SimDistance(double sqrt_area) const {
  return std::max(0.0, EvalPolynomial(sim_distance_coeffs, sqrt_area));
}

void ErrorModel::Validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("ErrorModel: " + what);
  };
  if (!(sigma_bc > 0.0) || !std::isfinite(sigma_bc)) fail("sigma_bc must be > 0");
  if (!(sigma_ba > 0.0) || !std::isfinite(sigma_ba)) fail("sigma_ba must be > 0");
  if (!(d_max > 0.0) || !std::isfinite(d_max)) fail("d_max must be > 0");
  if (mu_coeffs.empty()) fail("mu_coeffs is empty");
  if (sim_distance_coeffs.empty()) fail("sim_distance_coeffs is empty");
  for (double c : mu_coeffs) {
    if (!std::isfinite(c)) fail("mu_coeffs not finite");
  }
  for (double c : sim_distance_coeffs) {
    if (!std::isfinite(c)) fail("sim_distance_coeffs not finite");
  }
  if (mu_hi < mu_lo) fail("mu range inverted");
  // Monotone over the fitted range: a polynomial of degree <= 2 has at most
  // one stationary point, so checking the ends and a dense grid suffices.
  if (mu_hi > mu_lo) {
    constexpr int kSteps = 256;
    double prev = EvalPolynomial(mu_coeffs, mu_lo);
    for (int i = 1; i <= kSteps; ++i) {
      const double d = mu_lo + (mu_hi - mu_lo) * i / kSteps;
      const double v = EvalPolynomial(mu_coeffs, d);
      if (v < prev - 1e-12) fail("mu decreases inside its fitted range");
      prev = v;
    }
  }
}

Polygon GeneratePolygon(Rng& rng, double canvas_w, double canvas_h) {
  if (canvas_w < 100.0 || canvas_h < 100.0) {
    throw std::invalid_argument("GeneratePolygon: canvas must be >= 100x100");
  }
  const int n = 6 + static_cast<int>(rng.UniformInt(7));  // 6..12 vertices

  // Sorted random angles with a minimum gap keep the star shape well formed.
  std::vector<double> gaps(n);
  double total = 0.0;
  for (double& g : gaps) {
    g = rng.Uniform(0.5, 1.5);
    total += g;
  }
  const double start = rng.Uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> angles(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    angles[i] = start + 2.0 * std::numbers::pi * acc / total;
    acc += gaps[i];
  }
  std::vector<double> radii(n);
  for (double& r : radii) r = rng.Uniform(0.45, 1.0);
  if (rng.Uniform() < 0.5) {
    const auto k = rng.UniformInt(n);
    radii[k] *= 1.0 - rng.Uniform(0.4, 0.7);
  }

  std::vector<Point> unit(n);
  double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
  for (int i = 0; i < n; ++i) {
    unit[i] = Point(radii[i] * std::cos(angles[i]), radii[i] * std::sin(angles[i]));
    x0 = std::min(x0, unit[i].x);
    x1 = std::max(x1, unit[i].x);
    y0 = std::min(y0, unit[i].y);
    y1 = std::max(y1, unit[i].y);
  }
  const double w0 = x1 - x0, h0 = y1 - y0;

  // Target bbox area; anisotropic scaling keeps it inside the canvas.
  const double target = rng.Uniform(0.02, 0.9) * canvas_w * canvas_h;
  const double iso = std::sqrt(target / (w0 * h0));
  const double bw = std::clamp(iso * w0, target / canvas_h, canvas_w);
  const double bh = target / bw;
  const double sx = bw / w0, sy = bh / h0;
  const double ox = rng.Uniform(0.0, canvas_w - bw);
  const double oy = rng.Uniform(0.0, canvas_h - bh);

  std::vector<Point> verts(n);
  for (int i = 0; i < n; ++i) {
    verts[i] = Point(ox + (unit[i].x - x0) * sx, oy + (unit[i].y - y0) * sy);
  }
  return Polygon(std::move(verts));
}

QualificationResult EvaluateQualification(std::span<const ClickRecord> clicks,
                                          std::span<const Polygon> polygons,
                                          double pass_threshold) {
  if (polygons.empty()) {
    throw std::invalid_argument("EvaluateQualification: no polygons");
  }
  if (clicks.size() != polygons.size()) {
    throw std::invalid_argument("EvaluateQualification: expected " +
                                std::to_string(polygons.size()) + " clicks, got " +
                                std::to_string(clicks.size()));
  }
  QualificationResult result;
  result.per_polygon_errors.reserve(polygons.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < polygons.size(); ++i) {
    const double e = Euclidean(clicks[i].position, PolygonBboxCenter(polygons[i]).second);
    result.per_polygon_errors.push_back(e);
    sum += e;
  }
  result.mean_error = sum / static_cast<double>(polygons.size());
  result.passed = result.mean_error < pass_threshold;
  return result;
}

double FitSigmaBc(std::span<const double> errors) {
  if (errors.size() < 30) {
    throw std::invalid_argument("FitSigmaBc: need at least 30 samples, got " +
                                std::to_string(errors.size()));
  }
  double sum_sq = 0.0;
  for (double d : errors) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw std::invalid_argument("FitSigmaBc: errors must be finite and >= 0");
    }
    sum_sq += d * d;
  }
  const double sigma = std::sqrt(sum_sq / (2.0 * static_cast<double>(errors.size())));
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("FitSigmaBc: all errors are zero");
  }
  return sigma;
}

double FitDMax(std::span<const double> errors, double percentile) {
  if (errors.empty()) throw std::invalid_argument("FitDMax: empty input");
  if (percentile < 0.0 || percentile > 100.0) {
    throw std::invalid_argument("FitDMax: percentile outside [0,100]");
  }
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = percentile / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  const double v = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
  if (!(v > 0.0)) throw std::invalid_argument("FitDMax: non-positive result");
  return v;
}

std::vector<double> FitMu(std::span<const DistanceAreaPair> pairs, int degree) {
  if (pairs.size() < 50) {
    throw std::invalid_argument("FitMu: need at least 50 pairs, got " +
                                std::to_string(pairs.size()));
  }
  std::vector<double> xs, ys;
  xs.reserve(pairs.size());
  ys.reserve(pairs.size());
  for (const auto& p : pairs) {
    xs.push_back(p.click_distance);
    ys.push_back(p.log_rel_area);
  }
  return FitPolynomial(xs, ys, degree);
}

double ComputeSigmaBa(std::span<const DistanceAreaPair> pairs,
                      std::span<const double> mu_coeffs) {
  if (pairs.empty()) throw std::invalid_argument("ComputeSigmaBa: empty input");
  double sum_sq = 0.0;
  for (const auto& p : pairs) {
    const double r = p.log_rel_area - EvalPolynomial(mu_coeffs, p.click_distance);
    sum_sq += r * r;
  }
  const double rms = std::sqrt(sum_sq / static_cast<double>(pairs.size()));
  return std::max(rms, defaults::kSigmaBaFloor);
}

std::vector<double> FitSimDistanceLaw(std::span<const AreaErrorPair> pairs,
                                      int degree) {
  if (pairs.empty()) throw std::invalid_argument("FitSimDistanceLaw: empty input");
  std::vector<double> xs, ys;
  for (const auto& p : pairs) {
    xs.push_back(p.sqrt_area);
    ys.push_back(p.error);
  }
  return FitPolynomial(xs, ys, degree);
}

ClickRecord SimulateClick(const Box& gt, double img_w, double img_h,
                          const ErrorModel& model, Rng& rng,
                          std::string annotator_id, std::string target_id) {
  const Point center = gt.center();
  const double mean = model.SimDistance(std::sqrt(gt.area()));
  // Rayleigh mean is scale * sqrt(pi/2).
  const double scale = mean / std::sqrt(std::numbers::pi / 2.0);
  const double theta = rng.Uniform(0.0, 2.0 * std::numbers::pi);
  const double radius = scale > 0.0 ? rng.Rayleigh(scale) : 0.0;
  Point p(center.x + radius * std::cos(theta), center.y + radius * std::sin(theta));
  ClickRecord rec;
  rec.target_id = std::move(target_id);
  rec.annotator_id = std::move(annotator_id);
  rec.position = ClampToImage(p, img_w, img_h);
  rec.response_time_ms =
      std::max(200.0, rng.Normal(defaults::kSecondsPerClick * 1000.0, 400.0));
  return rec;
}

std::pair<ClickRecord, ClickRecord> SimulateTwoClicks(
    const Box& gt, double img_w, double img_h, const ErrorModel& model, Rng& rng,
    std::string target_id) {
  ClickRecord first = SimulateClick(gt, img_w, img_h, model, rng, "sim-0", target_id);
  ClickRecord second =
      SimulateClick(gt, img_w, img_h, model, rng, "sim-1", std::move(target_id));
  return {std::move(first), std::move(second)};
}

std::vector<double> DefaultSimDistanceCoeffs() { return {4.0, 0.1, -8e-5}; }

std::vector<PolygonClick> SimulatePolygonCorpus(int num_polygons,
                                                int clicks_per_polygon,
                                                std::span<const double> law,
                                                std::uint64_t seed,
                                                double canvas_w,
                                                double canvas_h) {
  Rng rng(seed);
  ErrorModel sim;
  sim.sim_distance_coeffs.assign(law.begin(), law.end());
  std::vector<PolygonClick> corpus;
  corpus.reserve(static_cast<std::size_t>(num_polygons) * clicks_per_polygon);
  for (int i = 0; i < num_polygons; ++i) {
    Polygon poly = GeneratePolygon(rng, canvas_w, canvas_h);
    const Box bbox = PolygonBboxCenter(poly).first;
    const std::string id = "poly-" + std::to_string(i);
    for (int k = 0; k < clicks_per_polygon; ++k) {
      ClickRecord click = SimulateClick(bbox, canvas_w, canvas_h, sim, rng,
                                        "sim-" + std::to_string(k), id);
      corpus.push_back(PolygonClick{id, canvas_w, canvas_h, poly, std::move(click)});
    }
  }
  return corpus;
}

ErrorModel FitErrorModel(std::span<const PolygonClick> corpus,
                         const ErrorModelFitOptions& options) {
  if (corpus.empty()) throw std::invalid_argument("FitErrorModel: empty corpus");
  std::vector<double> errors;
  std::vector<AreaErrorPair> law_pairs;
  std::map<std::string, std::vector<const PolygonClick*>> by_polygon;
  std::vector<std::string> order;
  for (const PolygonClick& pc : corpus) {
    const auto [bbox, center] = PolygonBboxCenter(pc.polygon);
    const double e = Euclidean(pc.click.position, center);
    errors.push_back(e);
    law_pairs.push_back({std::sqrt(bbox.area()), e});
    auto& group = by_polygon[pc.polygon_id];
    if (group.empty()) order.push_back(pc.polygon_id);
    group.push_back(&pc);
  }
  std::vector<DistanceAreaPair> mu_pairs;
  for (const std::string& id : order) {
    const auto& group = by_polygon[id];
    for (std::size_t k = 0; k + 1 < group.size(); k += 2) {
      const Box bbox = PolygonBboxCenter(group[k]->polygon).first;
      const double rel = bbox.area() / (group[k]->canvas_w * group[k]->canvas_h);
      mu_pairs.push_back({Euclidean(group[k]->click.position,
                                    group[k + 1]->click.position),
                          std::log(rel)});
    }
  }

  ErrorModel model;
  model.sigma_bc = FitSigmaBc(errors);
  model.d_max = options.fit_d_max ? FitDMax(errors, options.d_max_percentile)
                                  : defaults::kDMaxPixels;
  model.mu_coeffs = FitMu(mu_pairs, options.mu_degree);
  model.mu_lo = mu_pairs.front().click_distance;
  model.mu_hi = model.mu_lo;
  for (const auto& p : mu_pairs) {
    model.mu_lo = std::min(model.mu_lo, p.click_distance);
    model.mu_hi = std::max(model.mu_hi, p.click_distance);
  }
  // A concave fit turns over before the largest observed distance; cap the
  // evaluation range at the stationary point so mu stays non-decreasing.
  if (model.mu_coeffs.size() == 3 && model.mu_coeffs[2] < 0.0) {
    const double peak = -model.mu_coeffs[1] / (2.0 * model.mu_coeffs[2]);
    if (peak > model.mu_lo && peak < model.mu_hi) model.mu_hi = peak;
  }
  model.sigma_ba = ComputeSigmaBa(mu_pairs, model.mu_coeffs);
  model.sim_distance_coeffs = FitSimDistanceLaw(law_pairs);
  return model;
}

ErrorModel ReplicaErrorModel(std::uint64_t seed) {
  const auto law = DefaultSimDistanceCoeffs();
  const auto corpus = SimulatePolygonCorpus(2000, 2, law, seed);
  return FitErrorModel(corpus);
}

}  // namespace clickmil
