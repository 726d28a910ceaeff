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


#include "clickmil/pipeline.h"

#include <algorithm>
#include <stdexcept>

#include "clickmil/rng.h"

namespace clickmil {

Dataset DatasetFromWorld(const SyntheticWorld& world, const std::string& name) {
  const SyntheticConfig& cfg = world.config();
  Dataset ds;
  ds.manifest.name = name;
  ds.manifest.classes = cfg.classes;
  ds.manifest.feature_dim = cfg.feature_dim;
  ds.manifest.synthetic = cfg;
  for (const SyntheticImage& img : world.images()) {
    ImageInfo info{img.id, img.width, img.height, {}, img.split};
    if (img.class_index >= 0) {
      const std::string& cls = cfg.classes[img.class_index];
      info.labels.push_back(cls);
      ds.gt.push_back({img.id, cls, img.objects.front().box});
    }
    ds.manifest.images.push_back(std::move(info));
    ds.proposals[img.id] = img.proposals;
  }
  return ds;
}

std::vector<ClickLogEntry> SimulateDatasetClicks(const Dataset& dataset, int clicks,
                                                 const ErrorModel& model,
                                                 std::uint64_t seed) {
  if (clicks < 1 || clicks > 2) throw std::invalid_argument("clicks must be 1 or 2");
  std::map<std::pair<std::string, std::string>, std::vector<Box>> gt;
  for (const GtRecord& g : dataset.gt) gt[{g.image_id, g.class_name}].push_back(g.box);
  Rng rng(MixSeed(seed, 0xc11c));
  std::vector<ClickLogEntry> out;
  std::map<std::string, std::int64_t> seq;
  for (const ImageInfo& img : dataset.manifest.images) {
    if (img.split != "trainval") continue;
    for (const std::string& cls : img.labels) {
      auto it = gt.find({img.id, cls});
      if (it == gt.end()) continue;
      for (int k = 0; k < clicks; ++k) {
        const std::vector<Box>& boxes = it->second;
        const Box& target = boxes[rng.UniformInt(boxes.size())];
        const std::string annotator = "sim-" + std::to_string(k);
        const ClickRecord c =
            SimulateClick(target, img.width, img.height, model, rng, annotator, img.id);
        ClickLogEntry e;
        e.record_id = static_cast<std::int64_t>(out.size()) + 1;
        e.seq = ++seq[annotator];
        e.image_id = img.id;
        e.class_name = cls;
        e.annotator_id = annotator;
        e.x = c.position.x;
        e.y = c.position.y;
        e.time_ms = c.response_time_ms;
        out.push_back(std::move(e));
      }
    }
  }
  return out;
}

TrainResult TrainDataset(const Dataset& dataset, const MilConfig& config) {
  const WindowFeatureFn window = MakeWindowFeatureFn(dataset);
  const std::size_t needed = config.supervision == Supervision::kTwoClick   ? 2
                             : config.supervision == Supervision::kOneClick ? 1
                                                                            : 0;
  TrainResult out;
  for (std::size_t c = 0; c < dataset.manifest.classes.size(); ++c) {
    const std::string& cls = dataset.manifest.classes[c];
    const std::vector<Bag> bags = BuildBags(dataset, cls);
    for (const Bag& b : bags) {
      if (b.label == BagLabel::kPositive && b.clicks.size() < needed) {
        throw std::invalid_argument(
            std::string(SupervisionName(config.supervision)) + " needs " +
            std::to_string(needed) + " click(s) per positive image; " + b.image_id +
            " of class " + cls + " has " + std::to_string(b.clicks.size()));
      }
    }
    MilConfig cfg = config;
    cfg.seed = MixSeed(config.seed, c);
    MilResult r = RunMil(bags, cfg, window);
    for (const Selection& s : r.selections) out.selections.push_back({cls, s});
    out.models[cls] = r.model;
    out.classes.push_back({cls, std::move(r)});
  }
  return out;
}

AnnotationMode ModeFor(Supervision supervision) {
  switch (supervision) {
    case Supervision::kNone: return AnnotationMode::kImageLabels;
    case Supervision::kOneClick: return AnnotationMode::kOneClick;
    case Supervision::kTwoClick: return AnnotationMode::kTwoClick;
  }
  return AnnotationMode::kImageLabels;
}

MetricReport EvaluateRun(const Dataset& dataset,
                         const std::vector<ClassSelection>& selections,
                         const std::map<std::string, AppearanceModel>& models,
                         Supervision supervision) {
  MetricReport report;
  report.supervision = SupervisionName(supervision);
  std::vector<LocalizationItem> all;
  long long positive_pairs = 0;
  for (const std::string& cls : dataset.manifest.classes) {
    std::map<std::string, Box> chosen;
    for (const ClassSelection& s : selections) {
      if (s.class_name == cls) chosen.emplace(s.selection.image_id, s.selection.box);
    }
    std::vector<LocalizationItem> items;
    for (const Bag& b : BuildBags(dataset, cls, "trainval")) {
      if (b.label != BagLabel::kPositive) continue;
      ++positive_pairs;
      if (b.gt_boxes.empty()) continue;
      LocalizationItem item;
      auto it = chosen.find(b.image_id);
      if (it != chosen.end()) item.selected = it->second;
      item.gt = b.gt_boxes;
      items.push_back(item);
    }
    report.corloc_per_class[cls] = Corloc(items);
    all.insert(all.end(), items.begin(), items.end());

    auto mit = models.find(cls);
    const std::vector<Bag> test = BuildBags(dataset, cls, "test");
    if (mit == models.end() || test.empty()) continue;
    GtIndex gt;
    for (const Bag& b : test) {
      if (b.label == BagLabel::kPositive && !b.gt_boxes.empty()) gt[b.image_id] = b.gt_boxes;
    }
    report.per_class_ap[cls] = AveragePrecision(Detect(test, mit->second), gt);
  }
  report.corloc = Corloc(all);
  report.map = MeanAp(report.per_class_ap);
  report.positive_pairs = positive_pairs;
  report.annotation_time_hours = AnnotationTimeHours(positive_pairs, ModeFor(supervision));
  return report;
}

}  // namespace clickmil
