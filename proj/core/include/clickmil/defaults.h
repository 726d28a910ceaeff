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

#ifndef CLICKMIL_DEFAULTS_H_
#define CLICKMIL_DEFAULTS_H_

// Protocol constants of the click-annotation scheme. Changing any of these
// changes the meaning of stored data, so they are pinned by a snapshot test.

namespace clickmil::defaults {

// Two clicks farther apart than this target different instances.
inline constexpr double kDMaxPixels = 70.0;
// Qualification passes iff the mean error is strictly below this.
inline constexpr double kQualificationThresholdPixels = 20.0;
inline constexpr int kQualificationPolygons = 20;
inline constexpr int kBatchSize = 20;
inline constexpr int kGoldenPerBatch = 2;
// Distinct annotators asked to click each image-class pair.
inline constexpr int kClicksPerObject = 2;
inline constexpr int kFolds = 10;
inline constexpr int kIterations = 10;
// Extra linear iterations standing in for the CNN re-training rounds.
inline constexpr int kDeepSurrogateIterations = 2;
inline constexpr int kNegativeCapPerImage = 50;
inline constexpr double kNmsThreshold = 0.3;
inline constexpr double kCorlocIou = 0.5;
// Measured mean response time of one center click.
inline constexpr double kSecondsPerClick = 1.87;
// Drawing (25.5 s) plus verifying (9.0 s) one bounding box.
inline constexpr double kSecondsPerBox = 25.5 + 9.0;
// Pacing suggestion shown to annotators; never enforced.
inline constexpr double kSuggestedSecondsPerClick = 3.0;
inline constexpr int kMuDegree = 2;
inline constexpr double kDMaxPercentile = 99.5;
inline constexpr double kSigmaBaFloor = 1e-3;
// Qualification canvas, roughly the size of a typical photo.
inline constexpr double kCanvasWidth = 500.0;
inline constexpr double kCanvasHeight = 375.0;

}  // namespace clickmil::defaults

#endif  // CLICKMIL_DEFAULTS_H_
