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

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "clickmil/rng.h"

namespace clickmil {

const char* SupervisionName(Supervision s) {
  switch (s) {
    case Supervision::kNone:
      return "none";
    case Supervision::kOneClick:
      return "one_click";
    case Supervision::kTwoClick:
      return "two_click";
  }
  return "none";
}

Supervision ParseSupervision(const std::string& name) {
  if (name == "none") return Supervision::kNone;
  if (name == "one_click" || name == "one-click") return Supervision::kOneClick;
  if (name == "two_click" || name == "two-click") return Supervision::kTwoClick;
  throw std::invalid_argument("unknown supervision '" + name + "'");
}

double ScoreSap(double calibrated_appearance, double objectness) {
  return 0.5 * calibrated_appearance + 0.5 * objectness;
}

std::vector<double> CalibrateMinMax(std::span<const double> margins) {
  std::vector<double> out(margins.size(), 0.5);
  if (margins.empty()) return out;
  const auto [lo, hi] = std::minmax_element(margins.begin(), margins.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    out[i] = (margins[i] - *lo) / range;
  }
  return out;
}

namespace {

double Gaussian(double sq_dist, double sigma) {
  return std::exp(-sq_dist / (2.0 * sigma * sigma));
}

double SquaredDistance(const Point& a, const Point& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

std::vector<Point> ClickPoints(const Bag& bag, Supervision supervision) {
  std::vector<Point> points;
  const std::size_t wanted = supervision == Supervision::kNone      ? 0
                             : supervision == Supervision::kOneClick ? 1
                                                                     : 2;
  for (std::size_t i = 0; i < std::min(wanted, bag.clicks.size()); ++i) {
    points.push_back(bag.clicks[i].position);
  }
  return points;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index writes
// only its own output slot, so the result matches a sequential run.
template <typename Fn>
void ParallelFor(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

double ScoreSbc(const Box& proposal, std::span<const Point> clicks,
                double sigma_bc, double d_max) {
  if (clicks.empty()) return 1.0;
  if (!(sigma_bc > 0.0)) throw std::invalid_argument("ScoreSbc: sigma_bc must be > 0");
  const Point cp = proposal.center();
  if (clicks.size() == 1) return Gaussian(SquaredDistance(cp, clicks[0]), sigma_bc);
  if (Euclidean(clicks[0], clicks[1]) <= d_max) {
    return Gaussian(SquaredDistance(cp, Midpoint(clicks[0], clicks[1])), sigma_bc);
  }
  const double d0 = SquaredDistance(cp, clicks[0]);
  const double d1 = SquaredDistance(cp, clicks[1]);
  return Gaussian(std::min(d0, d1), sigma_bc);
}

double ScoreSba(const Box& proposal, const Point& c1, const Point& c2,
                const ErrorModel& model, double image_area) {
  if (!(model.sigma_ba > 0.0)) throw std::invalid_argument("ScoreSba: sigma_ba must be > 0");
  const double estimate = model.Mu(Euclidean(c1, c2)) + std::log(image_area);
  const double diff = std::log(proposal.area()) - estimate;
  return Gaussian(diff * diff, model.sigma_ba);
}

Box InitialWindow(const Bag& bag, Supervision supervision, double d_max) {
  const std::vector<Point> clicks = ClickPoints(bag, supervision);
  if (clicks.empty()) return Box(0.0, 0.0, bag.width, bag.height);
  Point c = clicks[0];
  if (clicks.size() == 2 && Euclidean(clicks[0], clicks[1]) <= d_max) {
    c = Midpoint(clicks[0], clicks[1]);
  }
  // A click on the border would give an empty window; keep half a pixel in.
  const double margin_x = std::min(0.5, bag.width / 4.0);
  const double margin_y = std::min(0.5, bag.height / 4.0);
  c = Point(std::clamp(c.x, margin_x, bag.width - margin_x),
            std::clamp(c.y, margin_y, bag.height - margin_y));
  return MaxWindowAt(c, bag.width, bag.height);
}

std::vector<Selection> Initialize(std::span<const Bag> bags, const MilConfig& config) {
  std::vector<Selection> out;
  for (const Bag& bag : bags) {
    if (bag.label != BagLabel::kPositive) continue;
    Selection s;
    s.image_id = bag.image_id;
    s.box = InitialWindow(bag, config.supervision, config.error_model.d_max);
    out.push_back(s);
  }
  return out;
}

std::optional<Selection> Relocalize(const Bag& bag, const AppearanceModel& model,
                                    const MilConfig& config) {
  if (bag.proposals.empty()) return std::nullopt;
  std::vector<double> margins;
  margins.reserve(bag.proposals.size());
  for (const Proposal& p : bag.proposals) margins.push_back(model.Margin(p.feature));
  const std::vector<double> calibrated = CalibrateMinMax(margins);

  const std::vector<Point> clicks = ClickPoints(bag, config.supervision);
  const bool use_area = clicks.size() == 2 &&
                        Euclidean(clicks[0], clicks[1]) <= config.error_model.d_max;
  const double image_area = bag.width * bag.height;

  Selection best;
  best.image_id = bag.image_id;
  best.score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < bag.proposals.size(); ++i) {
    const Proposal& p = bag.proposals[i];
    const double s_ap = ScoreSap(calibrated[i], p.objectness);
    const double s_bc =
        clicks.empty() ? 1.0
                       : ScoreSbc(p.box, clicks, config.error_model.sigma_bc,
                                  config.error_model.d_max);
    const double s_ba =
        use_area ? ScoreSba(p.box, clicks[0], clicks[1], config.error_model, image_area)
                 : 1.0;
    const double score = s_ap * s_bc * s_ba;
    if (score > best.score) {
      best.proposal_index = static_cast<int>(i);
      best.box = p.box;
      best.score = score;
      best.s_ap = s_ap;
      best.s_bc = s_bc;
      best.s_ba = s_ba;
    }
  }
  return best;
}

double SelectionCorloc(std::span<const Bag> bags, std::span<const Selection> selections) {
  std::map<std::string, const Selection*> by_id;
  for (const Selection& s : selections) by_id[s.image_id] = &s;
  std::vector<LocalizationItem> items;
  for (const Bag& bag : bags) {
    if (bag.label != BagLabel::kPositive) continue;
    LocalizationItem item;
    item.gt = bag.gt_boxes;
    auto it = by_id.find(bag.image_id);
    if (it != by_id.end()) item.selected = it->second->box;
    items.push_back(std::move(item));
  }
  return Corloc(items);
}

MilResult RunMil(std::span<const Bag> bags, const MilConfig& config,
                 const WindowFeatureFn& window_feature) {
  if (config.folds < 2) throw std::invalid_argument("MilConfig.folds must be >= 2");
  if (config.iterations < 1) throw std::invalid_argument("MilConfig.iterations must be >= 1");
  if (config.deep_surrogate_iterations < 0) {
    throw std::invalid_argument("MilConfig.deep_surrogate_iterations must be >= 0");
  }
  if (config.negative_cap < 1) throw std::invalid_argument("MilConfig.negative_cap must be >= 1");
  if (config.supervision != Supervision::kNone) config.error_model.Validate();

  MilResult result;
  std::vector<const Bag*> positives;
  std::vector<FeatureView> negatives;
  bool has_gt = false;
  for (const Bag& bag : bags) {
    if (bag.label == BagLabel::kPositive) {
      if (bag.proposals.empty()) {
        result.skipped.push_back(bag.image_id);
        continue;
      }
      positives.push_back(&bag);
      has_gt = has_gt || !bag.gt_boxes.empty();
      continue;
    }
    // Highest-objectness negatives first; stable order breaks ties by index.
    std::vector<std::size_t> order(bag.proposals.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return bag.proposals[a].objectness > bag.proposals[b].objectness;
    });
    const std::size_t keep =
        std::min(order.size(), static_cast<std::size_t>(config.negative_cap));
    for (std::size_t k = 0; k < keep; ++k) {
      negatives.push_back(bag.proposals[order[k]].feature);
    }
  }
  if (positives.size() < static_cast<std::size_t>(config.folds)) {
    throw std::invalid_argument("RunMil: " + std::to_string(positives.size()) +
                                " positive bags for " + std::to_string(config.folds) +
                                " folds");
  }
  if (negatives.empty()) throw std::invalid_argument("RunMil: no negative proposals");

  const std::size_t n_pos = positives.size();

  // Initialization windows and the features standing in for them.
  std::vector<Selection> selections(n_pos);
  std::vector<std::vector<double>> init_features(n_pos);
  for (std::size_t b = 0; b < n_pos; ++b) {
    const Bag& bag = *positives[b];
    selections[b].image_id = bag.image_id;
    selections[b].box = InitialWindow(bag, config.supervision, config.error_model.d_max);
    if (window_feature) {
      init_features[b] = window_feature(bag, selections[b].box);
    } else {
      std::size_t best = 0;
      double best_iou = -1.0;
      for (std::size_t i = 0; i < bag.proposals.size(); ++i) {
        const double v = Iou(bag.proposals[i].box, selections[b].box);
        if (v > best_iou) {
          best_iou = v;
          best = i;
        }
      }
      init_features[b] = bag.proposals[best].feature;
    }
  }

  // Seeded fold partition, fixed across iterations.
  std::vector<std::size_t> perm(n_pos);
  std::iota(perm.begin(), perm.end(), 0);
  Rng fold_rng(MixSeed(config.seed, 0xf01d));
  fold_rng.Shuffle(perm.begin(), perm.end());
  const auto folds = static_cast<std::size_t>(config.folds);
  std::vector<std::size_t> fold_of(n_pos);
  for (std::size_t r = 0; r < n_pos; ++r) fold_of[perm[r]] = r % folds;

  auto positive_feature = [&](std::size_t b, const std::vector<Selection>& sel) -> FeatureView {
    if (sel[b].proposal_index < 0) return init_features[b];
    return positives[b]->proposals[static_cast<std::size_t>(sel[b].proposal_index)].feature;
  };
  const int total_iterations = config.iterations + config.deep_surrogate_iterations;
  for (int iter = 0; iter < total_iterations; ++iter) {
    std::vector<Selection> next = selections;
    ParallelFor(folds, config.threads, [&](std::size_t fold) {
      std::vector<FeatureView> train_pos;
      for (std::size_t b = 0; b < n_pos; ++b) {
        if (fold_of[b] != fold) train_pos.push_back(positive_feature(b, selections));
      }
      SvmOptions opts;
      opts.lambda = config.lambda;
      opts.balance_classes = config.balance_classes;
      opts.seed = MixSeed(config.seed, static_cast<std::uint64_t>(iter) * 1000 + fold);
      const AppearanceModel model = TrainSvm(train_pos, negatives, opts);
      for (std::size_t b = 0; b < n_pos; ++b) {
        if (fold_of[b] != fold) continue;
        next[b] = *Relocalize(*positives[b], model, config);
      }
    });
    selections = std::move(next);
    if (has_gt) result.corloc_trace.push_back(SelectionCorloc(bags, selections));
  }

  std::vector<FeatureView> all_pos;
  for (std::size_t b = 0; b < n_pos; ++b) all_pos.push_back(positive_feature(b, selections));
  SvmOptions final_opts;
  final_opts.lambda = config.lambda;
  final_opts.balance_classes = config.balance_classes;
  final_opts.seed = MixSeed(config.seed, 0xf1a1);
  result.model = TrainSvm(all_pos, negatives, final_opts);
  result.selections = std::move(selections);
  return result;
}

std::vector<Detection> Detect(std::span<const Bag> bags, const AppearanceModel& model,
                              double nms_threshold) {
  std::vector<Detection> all;
  for (const Bag& bag : bags) {
    for (const Proposal& p : bag.proposals) {
      const double a = 1.0 / (1.0 + std::exp(-model.Margin(p.feature)));
      all.push_back(Detection{bag.image_id, p.box, ScoreSap(a, p.objectness)});
    }
  }
  return Nms(std::move(all), nms_threshold);
}

}  // namespace clickmil
