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

#ifndef CLICKMIL_DATASTORE_H_
#define CLICKMIL_DATASTORE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clickmil/annotator.h"
#include "clickmil/eval.h"
#include "clickmil/mil.h"
#include "clickmil/synthetic.h"

namespace clickmil {

inline constexpr int kSchemaVersion = 1;

// Malformed or missing data. what() names the file and, when known, the line.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& file, int line, const std::string& message);
  explicit DataError(const std::string& message) : std::runtime_error(message) {}
};

struct ImageInfo {
  std::string id;
  double width = 0.0;
  double height = 0.0;
  std::vector<std::string> labels;
  std::string split = "trainval";
};

struct GtRecord {
  std::string image_id;
  std::string class_name;
  Box box;
};

struct ClickLogEntry {
  std::int64_t record_id = 0;
  // Per-annotator sequence number, increasing in append order.
  std::int64_t seq = 0;
  std::string image_id;
  std::string class_name;
  std::string annotator_id;
  double x = 0.0;
  double y = 0.0;
  double time_ms = 0.0;
  std::optional<std::int64_t> supersedes;
};

struct DatasetManifest {
  std::string name;
  std::vector<std::string> classes;
  int feature_dim = 0;
  std::vector<ImageInfo> images;
  std::string proposals_file = "proposals.jsonl";
  std::string gt_file = "gt.jsonl";
  std::string clicks_file = "clicks.jsonl";
  // Present for generated datasets; lets loaders rebuild the window features.
  std::optional<SyntheticConfig> synthetic;
};

struct Dataset {
  DatasetManifest manifest;
  std::map<std::string, std::vector<Proposal>> proposals;
  std::vector<GtRecord> gt;
  std::vector<ClickLogEntry> clicks;

  const ImageInfo* FindImage(const std::string& id) const;
};

// Writes `content` to a temporary sibling and renames it over `path`.
void WriteFileAtomic(const std::filesystem::path& path, const std::string& content);

// Rounds to 6 significant decimal digits, the precision features are stored at.
double RoundFeatureValue(double v);

// Dataset directory: manifest.json, proposals.jsonl, gt.jsonl and, when
// there are clicks, clicks.jsonl.
void SaveDataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset LoadDataset(const std::filesystem::path& dir);

// Bags for one class and split. Positive bags carry up to two clicks, taken
// from distinct annotators in log order after dropping superseded records.
std::vector<Bag> BuildBags(const Dataset& dataset, const std::string& class_name,
                           const std::string& split = "trainval");

// Window features for generated datasets, nullptr otherwise.
WindowFeatureFn MakeWindowFeatureFn(const Dataset& dataset);

std::string SerializeErrorModel(const ErrorModel& model);
ErrorModel ParseErrorModel(const std::string& text, const std::string& origin = "<string>");
void SaveErrorModel(const ErrorModel& model, const std::filesystem::path& path);
ErrorModel LoadErrorModel(const std::filesystem::path& path);

struct ClassSelection {
  std::string class_name;
  Selection selection;
};
void SaveSelections(const std::vector<ClassSelection>& selections,
                    const std::filesystem::path& path);
std::vector<ClassSelection> LoadSelections(const std::filesystem::path& path);

std::string SerializeMetrics(const MetricReport& report);
void SaveMetrics(const MetricReport& report, const std::filesystem::path& path);
MetricReport LoadMetrics(const std::filesystem::path& path);

void SaveModels(const std::map<std::string, AppearanceModel>& models,
                const std::filesystem::path& path);
std::map<std::string, AppearanceModel> LoadModels(const std::filesystem::path& path);

// Qualification corpus: one line per click on a polygon.
void SavePolygonClicks(const std::vector<PolygonClick>& corpus,
                       const std::filesystem::path& path);
std::vector<PolygonClick> LoadPolygonClicks(const std::filesystem::path& path);

std::string ClickEntryToJsonLine(const ClickLogEntry& entry);

// Writes a whole click log at once, replacing any existing file.
void SaveClickLog(const std::vector<ClickLogEntry>& entries,
                  const std::filesystem::path& path);

// Reads a click log. An unterminated last line is a torn append and is
// ignored. A missing file reads as an empty log.
std::vector<ClickLogEntry> ReadClickLog(const std::filesystem::path& path);

// Append-only click log. Appends from one process are serialized by a
// mutex, appends from several processes by an exclusive file lock, and
// every append is flushed to disk before returning.
class ClickLog {
 public:
  explicit ClickLog(std::filesystem::path path);

  // Assigns record_id and seq, writes the records as one write, and returns
  // the stored entries.
  std::vector<ClickLogEntry> Append(std::vector<ClickLogEntry> entries);
  ClickLogEntry Append(ClickLogEntry entry);

  std::vector<ClickLogEntry> ReadAll() const { return ReadClickLog(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

}  // namespace clickmil

#endif  // CLICKMIL_DATASTORE_H_
