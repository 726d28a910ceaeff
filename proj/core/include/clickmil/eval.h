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

#ifndef CLICKMIL_EVAL_H_
#define CLICKMIL_EVAL_H_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clickmil/defaults.h"
#include "clickmil/geometry.h"

namespace clickmil {

struct Detection {
  std::string image_id;
  Box box;
  double score = 0.0;
};

// Ground-truth boxes of one class keyed by image id.
using GtIndex = std::map<std::string, std::vector<Box>>;

// One positive image: what was selected (nothing if the bag was skipped)
// and the ground truth of the target class.
struct LocalizationItem {
  std::optional<Box> selected;
  std::vector<Box> gt;
};

// Fraction of items whose selection has IoU >= 0.5 with some GT box.
// Returns 0 for an empty list.
double Corloc(std::span<const LocalizationItem> items,
              double iou_thresh = defaults::kCorlocIou);

// Greedy score-descending suppression, applied per image. A detection is
// dropped when its IoU with an already kept one is >= iou_thresh. Output is
// ordered by descending score; ties keep input order.
std::vector<Detection> Nms(std::vector<Detection> detections,
                           double iou_thresh = defaults::kNmsThreshold);

enum class ApMode {
  kElevenPoint,  // PASCAL VOC 2007 protocol
  kAllPoint,
};

// Average precision of `detections` against `gt`. Detections are matched in
// descending score order; each goes to its highest-IoU GT box in the same
// image and counts as a true positive if that IoU reaches `iou_thresh` and
// the box is still unmatched. Returns 0 when there are no detections or no
// GT boxes.
double AveragePrecision(std::span<const Detection> detections, const GtIndex& gt,
                        double iou_thresh = 0.5,
                        ApMode mode = ApMode::kElevenPoint);

enum class AnnotationMode {
  kImageLabels,  // weak supervision, no localization effort
  kOneClick,
  kTwoClick,
  kDrawnBoxes,
};

// Localization annotation effort in hours for `positive_pairs` image-class
// pairs.
double AnnotationTimeHours(long long positive_pairs, AnnotationMode mode);

struct MetricReport {
  double corloc = 0.0;
  std::map<std::string, double> corloc_per_class;
  std::map<std::string, double> per_class_ap;
  double map = 0.0;
  double annotation_time_hours = 0.0;
  // Positive image-class pairs the time was computed for.
  long long positive_pairs = 0;
  std::string supervision;
};

// Arithmetic mean of the per-class APs, 0 when empty.
double MeanAp(const std::map<std::string, double>& per_class_ap);

}  // namespace clickmil

#endif  // CLICKMIL_EVAL_H_
