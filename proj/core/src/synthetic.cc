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

#include "clickmil/synthetic.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "clickmil/datastore.h"
#include "clickmil/rng.h"

namespace clickmil {

void SyntheticConfig::Validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("synthetic." + field + ": " + why);
  };
  if (images < 1) fail("images", "must be >= 1");
  if (test_images < 0) fail("test_images", "must be >= 0");
  if (classes.empty()) fail("classes", "must not be empty");
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) {
    fail("positive_fraction", "must be in (0, 1)");
  }
  if (proposals_per_image < 1) fail("proposals_per_image", "must be >= 1");
  if (feature_dim < 2) fail("feature_dim", "must be >= 2");
  if (!(feature_noise >= 0.0)) fail("feature_noise", "must be >= 0");
  if (!(iou_floor > 0.0 && iou_floor <= 1.0)) fail("iou_floor", "must be in (0, 1]");
  if (!(rho >= 0.0 && rho <= 1.0)) fail("rho", "must be in [0, 1]");
  if (!(objectness_noise >= 0.0)) fail("objectness_noise", "must be >= 0");
  if (distractors_per_image < 0) fail("distractors_per_image", "must be >= 0");
}

namespace {

std::vector<double> RandomUnit(Rng& rng, int dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.Normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::uint64_t BoxHash(const Box& b) {
  const double vals[4] = {b.x(), b.y(), b.w(), b.h()};
  char bytes[sizeof(vals)];
  std::memcpy(bytes, vals, sizeof(vals));
  return Fnv1a(std::string_view(bytes, sizeof(bytes)));
}

// Intersection of a candidate rectangle with the image, or nullopt if it
// collapses to less than a pixel.
std::optional<Box> ClipToImage(double x0, double y0, double x1, double y1, double w,
                               double h) {
  x0 = std::max(0.0, x0);
  y0 = std::max(0.0, y0);
  x1 = std::min(w, x1);
  y1 = std::min(h, y1);
  if (x1 - x0 < 1.0 || y1 - y0 < 1.0) return std::nullopt;
  return Box(x0, y0, x1 - x0, y1 - y0);
}

Box RandomObjectBox(Rng& rng, double w, double h, double min_rel, double max_rel) {
  const double area = rng.Uniform(min_rel, max_rel) * w * h;
  const double aspect = std::exp(rng.Uniform(std::log(0.5), std::log(2.0)));
  double bw = std::sqrt(area * aspect);
  double bh = area / bw;
  if (bw > w) {
    bw = w;
    bh = std::min(h, area / w);
  }
  if (bh > h) {
    bh = h;
    bw = std::min(w, area / h);
  }
  const double x = rng.Uniform(0.0, w - bw);
  const double y = rng.Uniform(0.0, h - bh);
  return Box(x, y, bw, bh);
}

Box Jitter(Rng& rng, const Box& b, double spread, double w, double h) {
  const double cx = b.center().x + rng.Normal(0.0, spread * b.w());
  const double cy = b.center().y + rng.Normal(0.0, spread * b.h());
  const double bw = b.w() * std::exp(rng.Normal(0.0, spread * 1.5));
  const double bh = b.h() * std::exp(rng.Normal(0.0, spread * 1.5));
  auto clipped = ClipToImage(cx - bw / 2, cy - bh / 2, cx + bw / 2, cy + bh / 2, w, h);
  return clipped.value_or(b);
}

Box Round2(const Box& b) {
  auto r = [](double v) { return std::round(v * 100.0) / 100.0; };
  // Corners are rounded, not sizes, so a box flush with the border stays inside.
  const double x = r(b.x()), y = r(b.y());
  const double w = std::max(0.01, r(b.x() + b.w()) - x);
  const double h = std::max(0.01, r(b.y() + b.h()) - y);
  return Box(x, y, w, h);
}

}  // namespace

SyntheticWorld::SyntheticWorld(SyntheticConfig config) : config_(std::move(config)) {
  config_.Validate();
  Rng rng(MixSeed(config_.seed, 1));
  const int total = static_cast<int>(config_.classes.size()) + num_distractor_kinds_ +
                    num_backgrounds_;
  for (int i = 0; i < total; ++i) prototypes_.push_back(RandomUnit(rng, config_.feature_dim));
  // Distractor kinds are pulled towards one of the classes by rho.
  const int num_classes = static_cast<int>(config_.classes.size());
  for (int k = 0; k < num_distractor_kinds_; ++k) {
    const auto& cls = prototypes_[k % num_classes];
    auto& proto = prototypes_[num_classes + k];
    double norm = 0.0;
    for (int d = 0; d < config_.feature_dim; ++d) {
      proto[d] = (1.0 - config_.rho) * proto[d] + config_.rho * cls[d];
      norm += proto[d] * proto[d];
    }
    norm = std::sqrt(norm);
    for (double& x : proto) x /= norm;
  }
  Generate();
}

const SyntheticImage* SyntheticWorld::Find(const std::string& id) const {
  for (const auto& img : images_) {
    if (img.id == id) return &img;
  }
  return nullptr;
}

void SyntheticWorld::Generate() {
  const int num_classes = static_cast<int>(config_.classes.size());
  auto split_images = [&](int count, const std::string& split, const std::string& prefix,
                          std::uint64_t salt) {
    const int n_pos = static_cast<int>(std::lround(count * config_.positive_fraction));
    std::vector<int> order(count);
    for (int i = 0; i < count; ++i) order[i] = i;
    Rng rng(MixSeed(config_.seed, salt));
    rng.Shuffle(order.begin(), order.end());
    std::vector<int> cls(count, -1);
    for (int r = 0; r < n_pos; ++r) cls[order[r]] = r % num_classes;
    for (int i = 0; i < count; ++i) {
      SyntheticImage img = MakeImage(static_cast<int>(salt) * 1000000 + i, split, cls[i]);
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s_%06d", prefix.c_str(), i);
      img.id = buf;
      images_.push_back(std::move(img));
    }
  };
  split_images(config_.images, "trainval", "img", 2);
  split_images(config_.test_images, "test", "test", 3);
}

SyntheticImage SyntheticWorld::MakeImage(int index, const std::string& split,
                                         int class_index) {
  SyntheticImage img;
  img.split = split;
  img.class_index = class_index;
  img.noise_seed = MixSeed(config_.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(index));
  Rng rng(MixSeed(config_.seed, 0x1a6e0000ULL + static_cast<std::uint64_t>(index)));
  img.width = std::round(rng.Uniform(400.0, 500.0));
  img.height = std::round(rng.Uniform(300.0, 400.0));
  img.background = static_cast<int>(rng.UniformInt(num_backgrounds_));
  const double w = img.width, h = img.height;
  const int num_classes = static_cast<int>(config_.classes.size());

  if (class_index >= 0) {
    img.objects.push_back({Round2(RandomObjectBox(rng, w, h, 0.1, 0.9)), class_index});
  }
  for (int k = 0; k < config_.distractors_per_image; ++k) {
    const int kind = num_classes + static_cast<int>(rng.UniformInt(num_distractor_kinds_));
    img.objects.push_back({Round2(RandomObjectBox(rng, w, h, 0.02, 0.25)), kind});
  }

  std::vector<Box> boxes;
  auto push = [&](std::optional<Box> b) {
    if (b) boxes.push_back(Round2(*b));
  };
  if (class_index >= 0) {
    const Box& gt = img.objects.front().box;
    if (config_.iou_floor >= 1.0) {
      boxes.push_back(gt);
    } else {
      Box best = gt;
      for (int attempt = 0; attempt < 200; ++attempt) {
        const Box cand = Round2(Jitter(rng, gt, 0.06, w, h));
        if (Iou(cand, gt) >= config_.iou_floor) {
          best = cand;
          break;
        }
      }
      boxes.push_back(best);
    }
    // Further loose fits around the object.
    for (int k = 0; k < 3; ++k) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        const Box cand = Round2(Jitter(rng, gt, 0.12, w, h));
        if (Iou(cand, gt) >= 0.5) {
          boxes.push_back(cand);
          break;
        }
      }
    }
    // Roughly centered boxes of the wrong size.
    for (double s : {0.5, 0.68, 1.6, 2.2}) {
      const double hw = gt.w() * s / 2, hh = gt.h() * s / 2;
      const double cx = gt.center().x + rng.Normal(0.0, 0.08 * gt.w());
      const double cy = gt.center().y + rng.Normal(0.0, 0.08 * gt.h());
      push(ClipToImage(cx - hw, cy - hh, cx + hw, cy + hh, w, h));
    }
    // Parts of the object.
    for (int k = 0; k < 4; ++k) {
      const double f = rng.Uniform(0.35, 0.6);
      const double pw = gt.w() * f, ph = gt.h() * f;
      const double px = gt.x() + rng.Uniform(0.0, gt.w() - pw);
      const double py = gt.y() + rng.Uniform(0.0, gt.h() - ph);
      push(ClipToImage(px, py, px + pw, py + ph, w, h));
    }
    // Object plus surrounding context, off-center.
    for (int k = 0; k < 1; ++k) {
      const double l = rng.Uniform(0.0, 1.2) * gt.w(), r = rng.Uniform(0.0, 1.2) * gt.w();
      const double t = rng.Uniform(0.0, 1.2) * gt.h(), b = rng.Uniform(0.0, 1.2) * gt.h();
      push(ClipToImage(gt.x() - l, gt.y() - t, gt.right() + r, gt.bottom() + b, w, h));
    }
  }
  for (std::size_t k = class_index >= 0 ? 1 : 0; k < img.objects.size(); ++k) {
    const Box& ob = img.objects[k].box;
    push(Jitter(rng, ob, 0.06, w, h));
    push(Jitter(rng, ob, 0.12, w, h));
    const Point c = ob.center();
    push(ClipToImage(c.x - ob.w() * 0.8, c.y - ob.h() * 0.8, c.x + ob.w() * 0.8,
                     c.y + ob.h() * 0.8, w, h));
  }
  const auto target = static_cast<std::size_t>(config_.proposals_per_image);
  while (boxes.size() < target) {
    push(RandomObjectBox(rng, w, h, 0.01, 0.7));
  }
  boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(target), boxes.end());
  // The GT proposal sits at index 0 before shuffling; keep it when truncating.
  rng.Shuffle(boxes.begin(), boxes.end());

  img.proposals.reserve(boxes.size());
  for (const Box& b : boxes) {
    img.proposals.push_back(Proposal{b, Feature(img, b), Objectness(img, b)});
  }
  return img;
}

std::vector<double> SyntheticWorld::Feature(const SyntheticImage& image,
                                            const Box& window) const {
  const int dim = config_.feature_dim;
  std::vector<double> v(dim, 0.0);
  double purity_sum = 0.0;
  for (const SceneObject& obj : image.objects) {
    const double inter = IntersectionArea(window, obj.box);
    if (inter <= 0.0) continue;
    const double purity = inter / window.area();
    const double completeness = inter / obj.box.area();
    const auto& proto = prototypes_[obj.prototype];
    for (int d = 0; d < dim; ++d) v[d] += purity * completeness * proto[d];
    purity_sum += purity;
  }
  const double bg_frac = std::max(0.0, 1.0 - purity_sum);
  const int num_classes = static_cast<int>(config_.classes.size());
  const auto& bg = prototypes_[num_classes + num_distractor_kinds_ + image.background];
  for (int d = 0; d < dim; ++d) v[d] += bg_frac * bg[d];
  Rng noise(MixSeed(image.noise_seed, BoxHash(window)));
  for (int d = 0; d < dim; ++d) {
    v[d] += config_.feature_noise * noise.Normal();
    v[d] = RoundFeatureValue(v[d]);
  }
  return v;
}

double SyntheticWorld::Objectness(const SyntheticImage& image, const Box& window) const {
  double best = 0.0;
  for (const SceneObject& obj : image.objects) best = std::max(best, Iou(window, obj.box));
  Rng noise(MixSeed(image.noise_seed ^ 0x0b1ec7ULL, BoxHash(window)));
  const double o = std::clamp(best + config_.objectness_noise * noise.Normal(), 0.0, 1.0);
  return RoundFeatureValue(o);
}

}  // namespace clickmil
