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


#include "clickmil/mil.h"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "clickmil/rng.h"

namespace clickmil {
namespace {

const double kHalf = std::exp(-0.5);

ErrorModel Model(double sigma_bc = 10.0) {
  ErrorModel m;
  m.sigma_bc = sigma_bc;
  m.d_max = 70.0;
  m.mu_coeffs = {-2.0, 0.01};
  m.mu_lo = 0.0;
  m.mu_hi = 100.0;
  m.sigma_ba = 0.5;
  m.sim_distance_coeffs = {10.0};
  return m;
}

ClickRecord Click(double x, double y, const char* who = "a") {
  return ClickRecord{"img", who, Point(x, y), 1000.0};
}

Proposal Prop(Box b, std::vector<double> f, double o) {
  return Proposal{b, std::move(f), o};
}

TEST(ScoreSapTest, EqualWeights) {
  EXPECT_DOUBLE_EQ(ScoreSap(0.4, 0.6), 0.5);
  EXPECT_DOUBLE_EQ(ScoreSap(1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(ScoreSap(0.0, 0.0), 0.0);
}

TEST(CalibrateTest, MinMaxAndConstant) {
  const std::vector<double> m{-2.0, 0.0, 2.0};
  EXPECT_EQ(CalibrateMinMax(m), (std::vector<double>{0.0, 0.5, 1.0}));
  const std::vector<double> flat{3.0, 3.0};
  EXPECT_EQ(CalibrateMinMax(flat), (std::vector<double>{0.5, 0.5}));
}

TEST(CalibrateTest, PreservesRanking) {
  Rng rng(1);
  std::vector<double> m;
  for (int i = 0; i < 50; ++i) m.push_back(rng.Normal());
  const auto c = CalibrateMinMax(m);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      if (m[i] < m[j]) EXPECT_LE(c[i], c[j]);
    }
  }
}

TEST(ScoreSbcTest, ClosedForm) {
  const Box p(40, 40, 20, 20);  // center (50, 50)
  const std::vector<Point> at{{50, 50}};
  EXPECT_DOUBLE_EQ(ScoreSbc(p, at, 10.0, 70.0), 1.0);
  const std::vector<Point> one_sigma{{50, 60}};
  EXPECT_NEAR(ScoreSbc(p, one_sigma, 10.0, 70.0), kHalf, 1e-12);
  // Two clicks within d_max act through their midpoint.
  const std::vector<Point> pair{{40, 50}, {60, 50}};
  EXPECT_DOUBLE_EQ(ScoreSbc(p, pair, 10.0, 70.0), 1.0);
  // Same clicks twice equal the one-click score.
  const std::vector<Point> twice{{50, 60}, {50, 60}};
  EXPECT_DOUBLE_EQ(ScoreSbc(p, twice, 10.0, 70.0), ScoreSbc(p, one_sigma, 10.0, 70.0));
}

TEST(ScoreSbcTest, FarClicksUseNearestClick) {
  const Box p(40, 40, 20, 20);
  // 80 px apart: the midpoint would be (90, 50), 40 px from the center.
  const std::vector<Point> far{{50, 60}, {130, 40}};
  EXPECT_NEAR(ScoreSbc(p, far, 10.0, 70.0), kHalf, 1e-12);
  const Box q(120, 30, 20, 20);  // center (130, 40)
  EXPECT_DOUBLE_EQ(ScoreSbc(q, far, 10.0, 70.0), 1.0);
}

TEST(ScoreSbaTest, ClosedFormAndMonotone) {
  ErrorModel m = Model();
  const Point c1(0, 0), c2(30, 40);  // 50 px apart
  const double image_area = 400.0 * 300.0;
  const double mu_hat = m.Mu(50.0) + std::log(image_area);
  const double side = std::exp(mu_hat / 2.0);
  EXPECT_NEAR(ScoreSba(Box(0, 0, side, side), c1, c2, m, image_area), 1.0, 1e-12);
  const double big = std::exp((mu_hat + m.sigma_ba) / 2.0);
  EXPECT_NEAR(ScoreSba(Box(0, 0, big, big), c1, c2, m, image_area), kHalf, 1e-9);
  const double small = std::exp((mu_hat - m.sigma_ba) / 2.0);
  EXPECT_NEAR(ScoreSba(Box(0, 0, small, small), c1, c2, m, image_area), kHalf, 1e-9);
  double prev = 1.0 + 1e-12;
  for (double dev = 0.0; dev < 3.0; dev += 0.1) {
    const double s = std::exp((mu_hat + dev) / 2.0);
    const double v = ScoreSba(Box(0, 0, s, s), c1, c2, m, image_area);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(InitialWindowTest, Examples) {
  Bag bag;
  bag.width = 100;
  bag.height = 60;
  bag.label = BagLabel::kPositive;
  EXPECT_EQ(InitialWindow(bag, Supervision::kNone, 70), Box(0, 0, 100, 60));
  bag.clicks = {Click(10, 30)};
  EXPECT_EQ(InitialWindow(bag, Supervision::kOneClick, 70), Box(0, 0, 20, 60));
  EXPECT_EQ(InitialWindow(bag, Supervision::kNone, 70), Box(0, 0, 100, 60));
  bag.clicks = {Click(20, 30), Click(30, 30, "b")};
  const Box two = InitialWindow(bag, Supervision::kTwoClick, 70);
  EXPECT_NEAR(two.center().x, 25, 1e-12);
  EXPECT_NEAR(two.center().y, 30, 1e-12);
  // A border click still yields a window.
  bag.clicks = {Click(0, 0)};
  EXPECT_NO_THROW(InitialWindow(bag, Supervision::kOneClick, 70));
}

Bag ThreeProposalBag() {
  Bag bag;
  bag.image_id = "img";
  bag.width = 200;
  bag.height = 200;
  bag.label = BagLabel::kPositive;
  bag.proposals = {Prop(Box(10, 10, 40, 40), {1.0}, 0.5),
                   Prop(Box(100, 100, 50, 50), {0.2}, 0.5),
                   Prop(Box(60, 60, 80, 80), {0.0}, 0.5)};
  return bag;
}

TEST(RelocalizeTest, SingleProposal) {
  Bag bag = ThreeProposalBag();
  bag.proposals.erase(bag.proposals.begin() + 1, bag.proposals.end());
  MilConfig cfg;
  cfg.error_model = Model();
  EXPECT_EQ(Relocalize(bag, {{1.0}, 0.0}, cfg)->proposal_index, 0);
  bag.proposals.clear();
  EXPECT_FALSE(Relocalize(bag, {{1.0}, 0.0}, cfg).has_value());
}

TEST(RelocalizeTest, NoSupervisionFollowsAppearance) {
  const Bag bag = ThreeProposalBag();
  MilConfig cfg;
  cfg.error_model = Model();
  EXPECT_EQ(Relocalize(bag, {{1.0}, 0.0}, cfg)->proposal_index, 0);
  EXPECT_EQ(Relocalize(bag, {{-1.0}, 0.0}, cfg)->proposal_index, 2);
}

TEST(RelocalizeTest, TiesGoToLowestIndex) {
  Bag bag = ThreeProposalBag();
  for (auto& p : bag.proposals) p.feature = {0.3};
  MilConfig cfg;
  cfg.error_model = Model();
  EXPECT_EQ(Relocalize(bag, {{1.0}, 0.0}, cfg)->proposal_index, 0);
}

TEST(RelocalizeTest, OracleClickWinsAsSigmaShrinks) {
  Bag bag = ThreeProposalBag();
  bag.clicks = {Click(125, 125)};  // center of proposal 1
  MilConfig cfg;
  cfg.supervision = Supervision::kOneClick;
  cfg.error_model = Model(1e-3);
  // Appearance strongly prefers proposal 0.
  const Selection s = *Relocalize(bag, {{10.0}, 0.0}, cfg);
  EXPECT_EQ(s.proposal_index, 1);
  EXPECT_DOUBLE_EQ(s.s_bc, 1.0);
}

TEST(RelocalizeTest, InvariantToAffineMarginChanges) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    Bag bag;
    bag.image_id = "img";
    bag.width = 300;
    bag.height = 200;
    bag.label = BagLabel::kPositive;
    for (int i = 0; i < 12; ++i) {
      const double w = rng.Uniform(10, 120), h = rng.Uniform(10, 120);
      bag.proposals.push_back(Prop(Box(rng.Uniform(0, 300 - w), rng.Uniform(0, 200 - h), w, h),
                                   {rng.Normal(), rng.Normal()}, rng.Uniform()));
    }
    bag.clicks = {Click(rng.Uniform(0, 300), rng.Uniform(0, 200)),
                  Click(rng.Uniform(0, 300), rng.Uniform(0, 200), "b")};
    const AppearanceModel m{{rng.Normal(), rng.Normal()}, rng.Normal()};
    const double k = rng.Uniform(0.1, 10.0);
    const AppearanceModel scaled{{k * m.weights[0], k * m.weights[1]},
                                 k * m.bias + rng.Normal()};
    for (Supervision sup :
         {Supervision::kNone, Supervision::kOneClick, Supervision::kTwoClick}) {
      MilConfig cfg;
      cfg.supervision = sup;
      cfg.error_model = Model(30.0);
      EXPECT_EQ(Relocalize(bag, m, cfg)->proposal_index,
                Relocalize(bag, scaled, cfg)->proposal_index);
    }
  }
}

TEST(RelocalizeTest, FarClicksDropTheAreaCue) {
  Bag bag = ThreeProposalBag();
  bag.clicks = {Click(20, 20), Click(180, 180, "b")};
  MilConfig cfg;
  cfg.supervision = Supervision::kTwoClick;
  cfg.error_model = Model();
  EXPECT_DOUBLE_EQ(Relocalize(bag, {{1.0}, 0.0}, cfg)->s_ba, 1.0);
  bag.clicks = {Click(20, 20), Click(30, 30, "b")};
  EXPECT_LT(Relocalize(bag, {{1.0}, 0.0}, cfg)->s_ba, 1.0);
}

TEST(SupervisionTest, ParseNames) {
  EXPECT_EQ(ParseSupervision("none"), Supervision::kNone);
  EXPECT_EQ(ParseSupervision("one-click"), Supervision::kOneClick);
  EXPECT_EQ(ParseSupervision("one_click"), Supervision::kOneClick);
  EXPECT_EQ(ParseSupervision("two-click"), Supervision::kTwoClick);
  EXPECT_THROW(ParseSupervision("three-click"), std::invalid_argument);
  EXPECT_STREQ(SupervisionName(Supervision::kTwoClick), "two_click");
}

// Positive bags: object proposal with feature +1 at a random place plus
// clutter; negatives: clutter only.
std::vector<Bag> ToyBags(int positives, int negatives, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Bag> bags;
  for (int i = 0; i < positives + negatives; ++i) {
    Bag bag;
    bag.image_id = "img" + std::to_string(i);
    bag.width = 400;
    bag.height = 300;
    bag.label = i < positives ? BagLabel::kPositive : BagLabel::kNegative;
    const Box gt(rng.Uniform(0, 250), rng.Uniform(0, 150), rng.Uniform(60, 150),
                 rng.Uniform(60, 150));
    for (int k = 0; k < 8; ++k) {
      const double w = rng.Uniform(20, 200), h = rng.Uniform(20, 150);
      bag.proposals.push_back(Prop(Box(rng.Uniform(0, 400 - w), rng.Uniform(0, 300 - h), w, h),
                                   {rng.Normal(0, 0.3), rng.Normal(0, 0.3), 1.0},
                                   rng.Uniform(0, 0.6)));
    }
    if (bag.label == BagLabel::kPositive) {
      bag.gt_boxes = {gt};
      const std::size_t at = rng.UniformInt(bag.proposals.size());
      bag.proposals[at] = Prop(gt, {1.0 + rng.Normal(0, 0.3), rng.Normal(0, 0.3), 1.0}, 0.9);
      bag.clicks = {ClickRecord{bag.image_id, "a", gt.center(), 1000.0}};
    }
    bags.push_back(std::move(bag));
  }
  return bags;
}

TEST(RunMilTest, RejectsTooFewPositives) {
  const auto bags = ToyBags(1, 5, 1);
  MilConfig cfg;
  cfg.folds = 2;
  cfg.error_model = Model();
  EXPECT_THROW(RunMil(bags, cfg), std::invalid_argument);
  cfg.folds = 1;
  EXPECT_THROW(RunMil(ToyBags(10, 5, 1), cfg), std::invalid_argument);
}

TEST(RunMilTest, DeterministicAcrossRunsAndThreads) {
  const auto bags = ToyBags(40, 20, 2);
  MilConfig cfg;
  cfg.folds = 4;
  cfg.iterations = 3;
  cfg.deep_surrogate_iterations = 1;
  cfg.error_model = Model();
  cfg.seed = 9;
  const MilResult a = RunMil(bags, cfg);
  cfg.threads = 3;
  const MilResult b = RunMil(bags, cfg);
  ASSERT_EQ(a.selections.size(), b.selections.size());
  for (std::size_t i = 0; i < a.selections.size(); ++i) {
    EXPECT_EQ(a.selections[i].proposal_index, b.selections[i].proposal_index);
    EXPECT_EQ(a.selections[i].score, b.selections[i].score);
  }
  EXPECT_EQ(a.model.weights, b.model.weights);
  EXPECT_EQ(a.model.bias, b.model.bias);
  EXPECT_EQ(a.corloc_trace, b.corloc_trace);
  EXPECT_EQ(a.corloc_trace.size(), 4u);
}

TEST(RunMilTest, OracleClicksFindEveryObject) {
  const auto bags = ToyBags(30, 10, 3);
  MilConfig cfg;
  cfg.folds = 3;
  cfg.iterations = 2;
  cfg.deep_surrogate_iterations = 0;
  cfg.supervision = Supervision::kOneClick;
  cfg.error_model = Model(1.0);
  const MilResult r = RunMil(bags, cfg);
  EXPECT_DOUBLE_EQ(SelectionCorloc(bags, r.selections), 1.0);
}

TEST(RunMilTest, SkipsBagsWithoutProposals) {
  auto bags = ToyBags(20, 10, 4);
  bags[0].proposals.clear();
  MilConfig cfg;
  cfg.folds = 2;
  cfg.iterations = 1;
  cfg.deep_surrogate_iterations = 0;
  cfg.error_model = Model();
  const MilResult r = RunMil(bags, cfg);
  EXPECT_EQ(r.skipped, std::vector<std::string>{"img0"});
  EXPECT_EQ(r.selections.size(), 19u);
}

TEST(DetectTest, OneProposalAndDuplicates) {
  Bag bag = ThreeProposalBag();
  bag.proposals.erase(bag.proposals.begin() + 1, bag.proposals.end());
  EXPECT_EQ(Detect(std::vector<Bag>{bag}, {{1.0}, 0.0}).size(), 1u);
  bag.proposals.push_back(bag.proposals[0]);
  const auto dets = Detect(std::vector<Bag>{bag}, {{1.0}, 0.0});
  EXPECT_EQ(dets.size(), 1u);
}

}  // namespace
}  // namespace clickmil
