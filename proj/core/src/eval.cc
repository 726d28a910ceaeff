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

#include "clickmil/eval.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace clickmil {

double Corloc(std::span<const LocalizationItem> items, double iou_thresh) {
  if (items.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& item : items) {
    if (!item.selected) continue;
    for (const Box& g : item.gt) {
      if (Iou(*item.selected, g) >= iou_thresh) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(items.size());
}

namespace {

std::vector<std::size_t> ScoreOrder(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

}  // namespace

std::vector<Detection> Nms(std::vector<Detection> detections, double iou_thresh) {
  const auto order = ScoreOrder(detections);
  std::vector<Detection> kept;
  std::map<std::string, std::vector<Box>> kept_by_image;
  for (std::size_t idx : order) {
    const Detection& d = detections[idx];
    auto& boxes = kept_by_image[d.image_id];
    const bool suppressed = std::any_of(boxes.begin(), boxes.end(), [&](const Box& k) {
      return Iou(k, d.box) >= iou_thresh;
    });
    if (suppressed) continue;
    boxes.push_back(d.box);
    kept.push_back(d);
  }
  return kept;
}

double AveragePrecision(std::span<const Detection> detections, const GtIndex& gt,
                        double iou_thresh, ApMode mode) {
  std::size_t npos = 0;
  for (const auto& [id, boxes] : gt) npos += boxes.size();
  if (npos == 0 || detections.empty()) return 0.0;

  std::map<std::string, std::vector<bool>> taken;
  for (const auto& [id, boxes] : gt) taken[id].assign(boxes.size(), false);

  std::vector<double> precision, recall;
  std::size_t tp = 0, fp = 0;
  for (std::size_t idx : ScoreOrder(detections)) {
    const Detection& d = detections[idx];
    bool hit = false;
    auto it = gt.find(d.image_id);
    if (it != gt.end() && !it->second.empty()) {
      std::size_t best = 0;
      double best_iou = -1.0;
      for (std::size_t j = 0; j < it->second.size(); ++j) {
        const double v = Iou(d.box, it->second[j]);
        if (v > best_iou) {
          best_iou = v;
          best = j;
        }
      }
      auto& flags = taken[d.image_id];
      if (best_iou >= iou_thresh && !flags[best]) {
        flags[best] = true;
        hit = true;
      }
    }
    hit ? ++tp : ++fp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(npos));
  }

  if (mode == ApMode::kElevenPoint) {
    double ap = 0.0;
    for (int i = 0; i <= 10; ++i) {
      const double t = i / 10.0;
      double p = 0.0;
      for (std::size_t k = 0; k < recall.size(); ++k) {
        if (recall[k] >= t) p = std::max(p, precision[k]);
      }
      ap += p / 11.0;
    }
    return ap;
  }

  // Area under the monotone precision envelope.
  std::vector<double> mrec{0.0}, mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) {
    mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  }
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i) {
    ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  }
  return ap;
}

double AnnotationTimeHours(long long positive_pairs, AnnotationMode mode) {
  if (positive_pairs < 0) {
    throw std::invalid_argument("AnnotationTimeHours: negative pair count");
  }
  double seconds_per_pair = 0.0;
  switch (mode) {
    case AnnotationMode::kImageLabels:
      seconds_per_pair = 0.0;
      break;
    case AnnotationMode::kOneClick:
      seconds_per_pair = defaults::kSecondsPerClick;
      break;
    case AnnotationMode::kTwoClick:
      seconds_per_pair = 2.0 * defaults::kSecondsPerClick;
      break;
    case AnnotationMode::kDrawnBoxes:
      seconds_per_pair = defaults::kSecondsPerBox;
      break;
  }
  return static_cast<double>(positive_pairs) * seconds_per_pair / 3600.0;
}

double MeanAp(const std::map<std::string, double>& per_class_ap) {
  if (per_class_ap.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [cls, ap] : per_class_ap) sum += ap;
  return sum / static_cast<double>(per_class_ap.size());
}

}  // namespace clickmil
