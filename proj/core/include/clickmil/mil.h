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

#ifndef CLICKMIL_MIL_H_
#define CLICKMIL_MIL_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clickmil/annotator.h"
#include "clickmil/defaults.h"
#include "clickmil/eval.h"
#include "clickmil/geometry.h"
#include "clickmil/svm.h"

namespace clickmil {

struct Proposal {
  Box box;
  std::vector<double> feature;
  double objectness = 0.0;  // in [0, 1]
};

enum class BagLabel { kPositive, kNegative };

// One image seen from the point of view of a single class.
struct Bag {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<Proposal> proposals;
  BagLabel label = BagLabel::kNegative;
  std::vector<ClickRecord> clicks;  // 0-2
  std::vector<Box> gt_boxes;        // evaluation only
};

enum class Supervision { kNone, kOneClick, kTwoClick };

const char* SupervisionName(Supervision s);
// Accepts "none", "one_click"/"one-click", "two_click"/"two-click".
Supervision ParseSupervision(const std::string& name);

struct MilConfig {
  int folds = defaults::kFolds;
  int iterations = defaults::kIterations;
  // Extra linear iterations replacing the CNN re-training rounds.
  int deep_surrogate_iterations = defaults::kDeepSurrogateIterations;
  double lambda = 1e-3;
  // Weigh positive and negative hinge losses equally in every SVM fit.
  bool balance_classes = true;
  int negative_cap = defaults::kNegativeCapPerImage;
  Supervision supervision = Supervision::kNone;
  ErrorModel error_model;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Current localization of one positive bag.
struct Selection {
  std::string image_id;
  // -1 while the bag still holds its initialization window.
  int proposal_index = -1;
  Box box{0.0, 0.0, 1.0, 1.0};
  double score = 0.0;
  double s_ap = 0.0;
  double s_bc = 1.0;
  double s_ba = 1.0;
};

// Feature of an arbitrary window in a bag's image.
using WindowFeatureFn =
    std::function<std::vector<double>(const Bag&, const Box&)>;

// Equal-weight fusion of calibrated appearance and objectness.
double ScoreSap(double calibrated_appearance, double objectness);

// Per-image min-max normalization to [0, 1]. A constant input maps to 0.5.
std::vector<double> CalibrateMinMax(std::span<const double> margins);

// Box-center score. One click: Gaussian in the center distance. Two clicks
// within d_max: the same around their midpoint. Two clicks farther apart:
// whichever click is nearer the proposal center.
double ScoreSbc(const Box& proposal, std::span<const Point> clicks,
                double sigma_bc, double d_max);

// Box-area score: Gaussian in log(proposal area) around the area estimated
// from the click distance, mu(d) + log(image area).
double ScoreSba(const Box& proposal, const Point& c1, const Point& c2,
                const ErrorModel& model, double image_area);

// Initial window of a positive bag: the full image, or the largest window
// centered on the click (two clicks within d_max are averaged first).
Box InitialWindow(const Bag& bag, Supervision supervision, double d_max);

// Initial windows of every positive bag, in bag order.
std::vector<Selection> Initialize(std::span<const Bag> bags,
                                  const MilConfig& config);

// Best proposal under the score function of `config.supervision`; ties go
// to the lowest index. Returns nullopt when the bag has no proposals.
std::optional<Selection> Relocalize(const Bag& bag, const AppearanceModel& model,
                                    const MilConfig& config);

struct MilResult {
  // One per positive bag with proposals, in bag order.
  std::vector<Selection> selections;
  AppearanceModel model;
  // CorLoc after each iteration (empty when bags carry no GT).
  std::vector<double> corloc_trace;
  // Positive bags skipped for having no proposals.
  std::vector<std::string> skipped;
};

// Multi-fold alternating optimization. Positive bags are split into
// `folds` seeded folds; each fold is relocalized with a model trained on the
// other folds' current selections plus the capped negatives. Windows from
// Initialize serve as positives in the first iteration; their features come
// from `window_feature` when given, else from the highest-IoU proposal.
// Throws std::invalid_argument when the config is inconsistent with the data.
MilResult RunMil(std::span<const Bag> bags, const MilConfig& config,
                 const WindowFeatureFn& window_feature = nullptr);

// Scores every proposal of every bag with S_ap using a logistic calibration
// of the margin (comparable across images), then applies NMS.
std::vector<Detection> Detect(std::span<const Bag> bags,
                              const AppearanceModel& model,
                              double nms_threshold = defaults::kNmsThreshold);

// CorLoc of selections against the GT carried by the bags.
double SelectionCorloc(std::span<const Bag> bags,
                       std::span<const Selection> selections);

}  // namespace clickmil

#endif  // CLICKMIL_MIL_H_
