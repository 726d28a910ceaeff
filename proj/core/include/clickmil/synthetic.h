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

#ifndef CLICKMIL_SYNTHETIC_H_
#define CLICKMIL_SYNTHETIC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "clickmil/geometry.h"
#include "clickmil/mil.h"

namespace clickmil {

// Knobs of the generated benchmark. Features are pooled mixtures of
// per-region prototypes: the target object, distractor objects of other
// kinds, and the image background. Each distractor prototype is pulled
// towards one class prototype by `rho`: at 0 distractors are unrelated to
// the class, at 1 they look exactly like it.
struct SyntheticConfig {
  int images = 1000;
  int test_images = 200;
  std::vector<std::string> classes{"object"};
  double positive_fraction = 0.5;
  int proposals_per_image = 30;
  int feature_dim = 32;
  double feature_noise = 0.6;
  // Every positive image holds one proposal with IoU >= iou_floor to its GT.
  double iou_floor = 0.7;
  double rho = 0.5;
  double objectness_noise = 0.25;
  int distractors_per_image = 4;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument naming the offending field.
  void Validate() const;
};

// A region of a generated image with its prototype.
struct SceneObject {
  Box box;
  int prototype = 0;  // index into GeneratedScene::prototypes()
};

struct SyntheticImage {
  std::string id;
  std::string split;
  double width = 0.0;
  double height = 0.0;
  int class_index = -1;  // -1 for images without any class
  std::vector<SceneObject> objects;  // target first when present
  int background = 0;
  std::uint64_t noise_seed = 0;
  std::vector<Proposal> proposals;
};

class SyntheticWorld {
 public:
  explicit SyntheticWorld(SyntheticConfig config);

  const SyntheticConfig& config() const { return config_; }
  const std::vector<SyntheticImage>& images() const { return images_; }
  const SyntheticImage* Find(const std::string& id) const;

  // Pooled feature of an arbitrary window, rounded to storage precision.
  // Noise is seeded by the image and the window, so repeated calls agree.
  std::vector<double> Feature(const SyntheticImage& image, const Box& window) const;
  double Objectness(const SyntheticImage& image, const Box& window) const;

 private:
  void Generate();
  SyntheticImage MakeImage(int index, const std::string& split, int class_index);

  SyntheticConfig config_;
  // Class prototypes first, then distractors, then backgrounds.
  std::vector<std::vector<double>> prototypes_;
  int num_distractor_kinds_ = 8;
  int num_backgrounds_ = 4;
  std::vector<SyntheticImage> images_;
};

}  // namespace clickmil

#endif  // CLICKMIL_SYNTHETIC_H_
