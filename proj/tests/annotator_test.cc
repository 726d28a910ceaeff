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
#include <cstdio>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "clickmil/polynomial.h"

namespace clickmil {
namespace {

std::uint64_t PolygonDigest(const Polygon& p) {
  std::string s;
  char buf[64];
  for (const Point& v : p.vertices()) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g;", v.x, v.y);
    s += buf;
  }
  return Fnv1a(s);
}

TEST(GeneratePolygonTest, DeterministicUnderSeed) {
  Rng a(7), b(7);
  const Polygon pa = GeneratePolygon(a, 500, 375);
  const Polygon pb = GeneratePolygon(b, 500, 375);
  EXPECT_EQ(PolygonDigest(pa), PolygonDigest(pb));
  // Frozen output; a change here changes every stored qualification corpus.
  EXPECT_EQ(PolygonDigest(pa), 0x8c3560fdc68770aaULL);
}

TEST(GeneratePolygonTest, RelativeAreaIsUniform) {
  Rng rng(1);
  std::vector<double> rel;
  int concave = 0;
  for (int i = 0; i < 1000; ++i) {
    const Polygon p = GeneratePolygon(rng, 500, 375);
    EXPECT_GE(p.size(), 6u);
    EXPECT_TRUE(Polygon::IsSimple(p.vertices()));
    concave += p.IsConcave();
    const Box bb = PolygonBboxCenter(p).first;
    EXPECT_GE(bb.x(), -1e-9);
    EXPECT_GE(bb.y(), -1e-9);
    EXPECT_LE(bb.right(), 500 + 1e-9);
    EXPECT_LE(bb.bottom(), 375 + 1e-9);
    rel.push_back(bb.area() / (500.0 * 375.0));
  }
  std::sort(rel.begin(), rel.end());
  EXPECT_GE(rel.front(), 0.02 - 1e-9);
  EXPECT_LE(rel.back(), 0.9 + 1e-9);
  double ks = 0.0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    const double cdf = (rel[i] - 0.02) / 0.88;
    ks = std::max({ks, std::abs(cdf - double(i) / rel.size()),
                   std::abs(cdf - double(i + 1) / rel.size())});
  }
  EXPECT_LT(ks, 0.1);
  // Random radii already make many shapes concave; the dent step adds more.
  EXPECT_GE(concave, 500);
}

TEST(GeneratePolygonTest, RejectsSmallCanvas) {
  Rng rng(1);
  EXPECT_THROW(GeneratePolygon(rng, 99, 375), std::invalid_argument);
}

std::vector<Polygon> Squares(int n) {
  std::vector<Polygon> out;
  for (int i = 0; i < n; ++i) {
    const double o = 10.0 * i;
    out.emplace_back(std::vector<Point>{{o, 0}, {o + 100, 0}, {o + 100, 100}, {o, 100}});
  }
  return out;
}

std::vector<ClickRecord> ClicksAtOffset(const std::vector<Polygon>& polys, double dx) {
  std::vector<ClickRecord> out;
  for (const Polygon& p : polys) {
    const Point c = PolygonBboxCenter(p).second;
    out.push_back({"", "a", Point(c.x + dx, c.y), 1000});
  }
  return out;
}

TEST(QualificationTest, ThresholdIsStrict) {
  const auto polys = Squares(20);
  const auto exact = EvaluateQualification(ClicksAtOffset(polys, 0), polys);
  EXPECT_DOUBLE_EQ(exact.mean_error, 0.0);
  EXPECT_TRUE(exact.passed);
  EXPECT_TRUE(EvaluateQualification(ClicksAtOffset(polys, 19.0), polys).passed);
  const auto at = EvaluateQualification(ClicksAtOffset(polys, 20.0), polys);
  EXPECT_DOUBLE_EQ(at.mean_error, 20.0);
  EXPECT_FALSE(at.passed);
  EXPECT_FALSE(EvaluateQualification(ClicksAtOffset(polys, 25.0), polys).passed);
}

TEST(QualificationTest, MeanOfErrorsAndPermutationInvariance) {
  const auto polys = Squares(4);
  auto clicks = ClicksAtOffset(polys, 0);
  for (int i = 0; i < 4; ++i) clicks[i].position.x += 10.0 * i;
  const auto r = EvaluateQualification(clicks, polys);
  ASSERT_EQ(r.per_polygon_errors.size(), 4u);
  EXPECT_DOUBLE_EQ(r.mean_error, 15.0);
  std::vector<Polygon> rp(polys.rbegin(), polys.rend());
  std::vector<ClickRecord> rc(clicks.rbegin(), clicks.rend());
  EXPECT_DOUBLE_EQ(EvaluateQualification(rc, rp).mean_error, r.mean_error);
}

TEST(QualificationTest, CountMismatchIsRejected) {
  const auto polys = Squares(20);
  auto clicks = ClicksAtOffset(polys, 0);
  clicks.pop_back();
  EXPECT_THROW(EvaluateQualification(clicks, polys), std::invalid_argument);
}

TEST(FitSigmaBcTest, ClosedFormAndMonteCarlo) {
  std::vector<double> same(40, 6.0);
  EXPECT_NEAR(FitSigmaBc(same), 6.0 / std::sqrt(2.0), 1e-12);

  Rng rng(10);
  std::vector<double> d;
  for (int i = 0; i < 10000; ++i) d.push_back(std::hypot(rng.Normal(0, 10), rng.Normal(0, 10)));
  const double s = FitSigmaBc(d);
  EXPECT_GE(s, 9.7);
  EXPECT_LE(s, 10.3);

  std::vector<double> scaled = d;
  for (double& x : scaled) x *= 3.0;
  EXPECT_NEAR(FitSigmaBc(scaled), 3.0 * s, 1e-9);
}

TEST(FitSigmaBcTest, RejectsDegenerateInput) {
  EXPECT_THROW(FitSigmaBc(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(FitSigmaBc(std::vector<double>(40, 0.0)), std::invalid_argument);
  EXPECT_THROW(FitSigmaBc(std::vector<double>(29, 1.0)), std::invalid_argument);
  std::vector<double> neg(40, 1.0);
  neg[3] = -1.0;
  EXPECT_THROW(FitSigmaBc(neg), std::invalid_argument);
}

TEST(FitDMaxTest, OrderStatistic) {
  std::vector<double> grid;
  for (int i = 1; i <= 100; ++i) grid.push_back(i);
  EXPECT_NEAR(FitDMax(grid), 99.5, 0.01);
  EXPECT_DOUBLE_EQ(FitDMax(std::vector<double>(10, 42.0)), 42.0);
  EXPECT_DOUBLE_EQ(FitDMax(grid, 100.0), 100.0);
  EXPECT_THROW(FitDMax(std::vector<double>{}), std::invalid_argument);
}

std::vector<DistanceAreaPair> LawPairs(double a0, double a1, double a2, int n) {
  std::vector<DistanceAreaPair> out;
  for (int i = 0; i < n; ++i) {
    const double d = 1.0 + i * 0.75;
    out.push_back({d, a0 + a1 * d + a2 * d * d});
  }
  return out;
}

TEST(FitMuTest, ExactRecovery) {
  const auto mu = FitMu(LawPairs(-4.0, 0.05, 0.0, 120));
  ASSERT_EQ(mu.size(), 3u);
  EXPECT_NEAR(mu[0], -4.0, 1e-6);
  EXPECT_NEAR(mu[1], 0.05, 1e-6);
  EXPECT_NEAR(mu[2], 0.0, 1e-6);

  const auto quad = FitMu(LawPairs(-3.0, 0.02, -1e-4, 80));
  EXPECT_NEAR(quad[0], -3.0, 1e-6);
  EXPECT_NEAR(quad[1], 0.02, 1e-6);
  EXPECT_NEAR(quad[2], -1e-4, 1e-6);
}

TEST(FitMuTest, ConstantTarget) {
  const auto mu = FitMu(LawPairs(-1.5, 0.0, 0.0, 60));
  EXPECT_NEAR(mu[0], -1.5, 1e-9);
  EXPECT_NEAR(mu[1], 0.0, 1e-9);
  EXPECT_NEAR(mu[2], 0.0, 1e-9);
}

TEST(FitMuTest, SymmetricNoiseLeavesZeroMeanResidual) {
  auto pairs = LawPairs(-2.0, 0.03, 0.0, 200);
  for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].log_rel_area += (i % 2 ? 0.3 : -0.3);
  const auto mu = FitMu(pairs);
  double mean = 0;
  for (const auto& p : pairs) mean += p.log_rel_area - EvalPolynomial(mu, p.click_distance);
  EXPECT_NEAR(mean / pairs.size(), 0.0, 1e-9);
}

TEST(FitMuTest, RejectsBadInput) {
  std::vector<DistanceAreaPair> same(60, {10.0, -2.0});
  EXPECT_THROW(FitMu(same), std::invalid_argument);
  EXPECT_THROW(FitMu(LawPairs(-4, 0.05, 0, 49)), std::invalid_argument);
}

TEST(SigmaBaTest, Examples) {
  const auto exact = LawPairs(-4.0, 0.05, 0.0, 100);
  const std::vector<double> mu{-4.0, 0.05, 0.0};
  EXPECT_DOUBLE_EQ(ComputeSigmaBa(exact, mu), 1e-3);

  auto pm = exact;
  for (std::size_t i = 0; i < pm.size(); ++i) pm[i].log_rel_area += (i % 2 ? 0.4 : -0.4);
  EXPECT_NEAR(ComputeSigmaBa(pm, mu), 0.4, 1e-12);

  Rng rng(9);
  auto noisy = LawPairs(-4.0, 0.05, 0.0, 10000);
  for (auto& p : noisy) p.log_rel_area += rng.Normal(0, 0.5);
  const double s = ComputeSigmaBa(noisy, mu);
  EXPECT_GE(s, 0.48);
  EXPECT_LE(s, 0.52);
}

TEST(SimDistanceLawTest, ExactRecoveryAndConstant) {
  std::vector<AreaErrorPair> pairs, flat;
  for (int i = 0; i < 100; ++i) {
    const double s = 20 + 4.0 * i;
    pairs.push_back({s, 4.0 + 0.1 * s - 8e-5 * s * s});
    flat.push_back({s, 12.0});
  }
  const auto law = FitSimDistanceLaw(pairs);
  EXPECT_NEAR(law[0], 4.0, 1e-6);
  EXPECT_NEAR(law[1], 0.1, 1e-6);
  EXPECT_NEAR(law[2], -8e-5, 1e-6);
  const auto c = FitSimDistanceLaw(flat);
  EXPECT_NEAR(c[0], 12.0, 1e-9);
  EXPECT_NEAR(c[1], 0.0, 1e-9);
  EXPECT_NEAR(c[2], 0.0, 1e-9);
}

ErrorModel LawModel(std::vector<double> law) {
  ErrorModel m;
  m.sigma_bc = 10;
  m.sigma_ba = 0.5;
  m.mu_coeffs = {-2.0, 0.02};
  m.sim_distance_coeffs = std::move(law);
  return m;
}

TEST(SimulateClickTest, ZeroLawHitsCenter) {
  Rng rng(1);
  const Box gt(10, 20, 60, 40);
  const ClickRecord c = SimulateClick(gt, 200, 200, LawModel({0.0}), rng);
  EXPECT_EQ(c.position, gt.center());
  EXPECT_GE(c.response_time_ms, 0.0);
}

TEST(SimulateClickTest, DeterministicUnderSeed) {
  const Box gt(10, 20, 60, 40);
  const ErrorModel m = LawModel(DefaultSimDistanceCoeffs());
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) {
    const ClickRecord x = SimulateClick(gt, 200, 200, m, a);
    const ClickRecord y = SimulateClick(gt, 200, 200, m, b);
    EXPECT_EQ(x.position, y.position);
    EXPECT_EQ(x.response_time_ms, y.response_time_ms);
  }
}

TEST(SimulateClickTest, ReproducesLawPerAreaBin) {
  const ErrorModel m = LawModel(DefaultSimDistanceCoeffs());
  Rng rng(17);
  for (double side : {40.0, 100.0, 200.0, 300.0, 400.0}) {
    const Box gt(5000 - side / 2, 5000 - side / 2, side, side);
    double sum = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      sum += Euclidean(SimulateClick(gt, 10000, 10000, m, rng).position, gt.center());
    }
    const double expected = m.SimDistance(side);
    EXPECT_NEAR(sum / n, expected, 0.05 * expected) << "side " << side;
  }
}

TEST(SimulateClickTest, ClampsToImage) {
  const ErrorModel m = LawModel({200.0});
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const Point p = SimulateClick(Box(0, 0, 10, 10), 20, 20, m, rng).position;
    EXPECT_GE(p.x, 0.0);
    EXPECT_GE(p.y, 0.0);
    EXPECT_LE(p.x, 20.0);
    EXPECT_LE(p.y, 20.0);
  }
}

TEST(SimulateTwoClicksTest, IndependentErrors) {
  const ErrorModel m = LawModel(DefaultSimDistanceCoeffs());
  const Box gt(4000, 4000, 200, 200);
  Rng rng(3);
  double sxy = 0, sxx = 0, syy = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto [a, b] = SimulateTwoClicks(gt, 10000, 10000, m, rng, "img");
    EXPECT_NE(a.annotator_id, b.annotator_id);
    const double ea = a.position.x - gt.center().x, eb = b.position.x - gt.center().x;
    sxy += ea * eb;
    sxx += ea * ea;
    syy += eb * eb;
  }
  EXPECT_LT(std::abs(sxy / std::sqrt(sxx * syy)), 0.05);
}

TEST(ErrorModelTest, ReplicaFitMatchesProtocol) {
  const ErrorModel m = ReplicaErrorModel(0);
  EXPECT_NO_THROW(m.Validate());
  EXPECT_DOUBLE_EQ(m.d_max, 70.0);
  EXPECT_GT(m.sigma_bc, 0.0);
  EXPECT_GT(m.mu_hi, m.mu_lo);
  // Larger click distance never means a smaller object.
  double prev = m.Mu(m.mu_lo);
  for (double d = m.mu_lo; d <= m.mu_hi; d += 0.5) {
    EXPECT_GE(m.Mu(d), prev - 1e-12);
    prev = m.Mu(d);
  }
  // Evaluation outside the range clamps.
  EXPECT_DOUBLE_EQ(m.Mu(m.mu_hi + 500), m.Mu(m.mu_hi));
}

TEST(ErrorModelTest, FitDMaxOptionUsesPercentile) {
  const auto corpus = SimulatePolygonCorpus(300, 2, DefaultSimDistanceCoeffs(), 4);
  ErrorModelFitOptions opts;
  opts.fit_d_max = true;
  const ErrorModel fitted = FitErrorModel(corpus, opts);
  std::vector<double> errors;
  for (const auto& pc : corpus) {
    errors.push_back(Euclidean(pc.click.position, PolygonBboxCenter(pc.polygon).second));
  }
  EXPECT_NEAR(fitted.d_max, FitDMax(errors), 1e-9);
  EXPECT_DOUBLE_EQ(FitErrorModel(corpus).d_max, 70.0);
}

TEST(ErrorModelTest, ValidateNamesViolations) {
  ErrorModel m = LawModel({1.0});
  EXPECT_NO_THROW(m.Validate());
  m.sigma_bc = 0;
  EXPECT_THROW(m.Validate(), std::invalid_argument);
  m = LawModel({1.0});
  m.mu_coeffs = {0.0, 1.0, -1.0};
  m.mu_lo = 0;
  m.mu_hi = 10;
  EXPECT_THROW(m.Validate(), std::invalid_argument);
}

}  // namespace
}  // namespace clickmil
