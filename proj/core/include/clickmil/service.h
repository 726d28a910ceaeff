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


#ifndef CLICKMIL_SERVICE_H_
#define CLICKMIL_SERVICE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "clickmil/datastore.h"
#include "clickmil/defaults.h"
#include "clickmil/geometry.h"
#include "clickmil/rng.h"

namespace clickmil {

struct ServiceConfig {
  int batch_size = defaults::kBatchSize;
  int golden_per_batch = defaults::kGoldenPerBatch;
  int clicks_per_object = defaults::kClicksPerObject;
  int qualification_polygons = defaults::kQualificationPolygons;
  double threshold_px = defaults::kQualificationThresholdPixels;
  double canvas_width = defaults::kCanvasWidth;
  double canvas_height = defaults::kCanvasHeight;
  std::string split = "trainval";
  std::uint64_t seed = 0;

  void Validate() const;
};

enum class SessionState { kUntrained, kQualified, kAnnotating };
const char* SessionStateName(SessionState state);

struct ServiceResponse {
  int status = 200;
  std::string body;
};

// Crowdsourcing protocol over plain requests: sessions, the polygon
// qualification test, batch serving with hidden golden items, and click
// persistence. Every method is safe to call from several threads.
class AnnotationService {
 public:
  // Batches are drawn from the ground truth of `dataset` in `config.split`.
  // Clicks already in the log count towards the per-pair annotator quota.
  AnnotationService(const Dataset& dataset, std::filesystem::path click_log,
                    ServiceConfig config = {});

  // Routes one request. `authorization` is the raw Authorization header.
  ServiceResponse Handle(const std::string& method, const std::string& path,
                         const std::string& authorization,
                         const std::string& body);

  std::optional<SessionState> StateOf(const std::string& annotator_id) const;

 private:
  struct Item {
    std::string item_id;
    std::string image_id;
    double width = 0.0;
    double height = 0.0;
    // Centers of all instances; empty for non-golden items.
    std::vector<Point> golden_centers;
    // Counted against the per-pair quota.
    bool quota = false;
  };
  struct Batch {
    std::string batch_id;
    std::string class_name;
    std::vector<Item> items;
  };
  struct Attempt {
    std::string attempt_id;
    std::vector<std::string> polygon_ids;
    std::vector<Polygon> polygons;
  };
  struct Session {
    std::string annotator_id;
    SessionState state = SessionState::kUntrained;
    int attempts = 0;
    std::optional<Attempt> attempt;
    std::optional<Batch> batch;
  };
  struct Pair {
    std::string image_id;
    double width = 0.0;
    double height = 0.0;
    std::vector<Point> centers;
  };

  ServiceResponse CreateSession(const std::string& body);
  ServiceResponse GetQualification(Session& session);
  ServiceResponse PostQualification(Session& session, const std::string& body);
  ServiceResponse GetBatch(Session& session);
  ServiceResponse PostBatch(Session& session, const std::string& body);
  ServiceResponse Instructions() const;

  std::optional<Batch> AssembleBatch(const std::string& annotator_id);
  void Release(const Batch& batch, const std::string& annotator_id);
  std::string NewId(const char* prefix);

  ServiceConfig config_;
  ClickLog log_;
  mutable std::mutex mu_;
  Rng rng_;
  std::uint64_t counter_ = 0;
  // Class name -> pairs in a fixed order.
  std::map<std::string, std::vector<Pair>> pairs_;
  // (class, image) -> annotators holding or having delivered a click.
  std::map<std::pair<std::string, std::string>, std::set<std::string>> holders_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, std::string> tokens_;
};

// Serves an AnnotationService over HTTP on a background thread.
class HttpServer {
 public:
  explicit HttpServer(AnnotationService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and starts listening. Port 0 picks a free port. Returns the port.
  int Start(const std::string& host, int port);
  // Blocks until Stop() is called from another thread.
  void Wait();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace clickmil

#endif  // CLICKMIL_SERVICE_H_
