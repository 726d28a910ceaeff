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


#ifndef CLICKMIL_PIPELINE_H_
#define CLICKMIL_PIPELINE_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "clickmil/annotator.h"
#include "clickmil/datastore.h"
#include "clickmil/eval.h"
#include "clickmil/mil.h"
#include "clickmil/synthetic.h"

namespace clickmil {

// Dataset view of a generated world. GT covers target objects only;
// distractors stay unlabeled.
Dataset DatasetFromWorld(const SyntheticWorld& world, const std::string& name);

// Simulated clicks on every positive trainval image-class pair, one record
// per annotator "sim-<k>", k < clicks. Each annotator targets a uniformly
// chosen instance. Record ids and sequence numbers start at 1.
std::vector<ClickLogEntry> SimulateDatasetClicks(const Dataset& dataset, int clicks,
                                                 const ErrorModel& model,
                                                 std::uint64_t seed);

struct ClassRun {
  std::string class_name;
  MilResult result;
};

struct TrainResult {
  std::vector<ClassRun> classes;
  std::vector<ClassSelection> selections;
  std::map<std::string, AppearanceModel> models;
};

// Runs MIL for every class on the trainval split. Class c uses seed
// MixSeed(config.seed, c). Click supervision needs that many clicks on every
// positive bag; std::invalid_argument otherwise.
TrainResult TrainDataset(const Dataset& dataset, const MilConfig& config);

// CorLoc of the selections on trainval, AP of the models on the test split,
// and the annotation time implied by the supervision.
MetricReport EvaluateRun(const Dataset& dataset,
                         const std::vector<ClassSelection>& selections,
                         const std::map<std::string, AppearanceModel>& models,
                         Supervision supervision);

AnnotationMode ModeFor(Supervision supervision);

}  // namespace clickmil

#endif  // CLICKMIL_PIPELINE_H_
