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


#include "clickmil/service.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "clickmil/annotator.h"
#include "httplib.h"
#include "json.hpp"

namespace clickmil {
namespace {

using nlohmann::json;

ServiceResponse Reply(int status, json body) {
  body["schema_version"] = kSchemaVersion;
  return {status, body.dump()};
}

ServiceResponse Error(int status, const std::string& message) {
  return Reply(status, json{{"error", message}});
}

// Parses a request body and checks its schema version.
json ParseBody(const std::string& body) {
  json j = json::parse(body);
  if (!j.is_object()) throw std::invalid_argument("body must be a JSON object");
  if (!j.contains("schema_version") || j["schema_version"] != kSchemaVersion) {
    throw std::invalid_argument("unsupported schema_version");
  }
  return j;
}

json PointJson(const Point& p) { return json{{"x", p.x}, {"y", p.y}}; }

double FiniteNumber(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw std::invalid_argument(std::string("missing number '") + key + "'");
  }
  const double v = j[key].get<double>();
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(key) + " is not finite");
  return v;
}

std::string StringField(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw std::invalid_argument(std::string("missing string '") + key + "'");
  }
  return j[key].get<std::string>();
}

const json& ClicksField(const json& j) {
  if (!j.contains("clicks") || !j["clicks"].is_array()) {
    throw std::invalid_argument("missing array 'clicks'");
  }
  return j["clicks"];
}

}  // namespace

void ServiceConfig::Validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (golden_per_batch < 1 || golden_per_batch >= batch_size) {
    throw std::invalid_argument("golden_per_batch must be in [1, batch_size)");
  }
  if (clicks_per_object < 1) throw std::invalid_argument("clicks_per_object must be >= 1");
  if (qualification_polygons < 1) {
    throw std::invalid_argument("qualification_polygons must be >= 1");
  }
  if (!(threshold_px > 0.0)) throw std::invalid_argument("threshold_px must be > 0");
  if (!(canvas_width >= 100.0) || !(canvas_height >= 100.0)) {
    throw std::invalid_argument("canvas must be at least 100x100");
  }
}

const char* SessionStateName(SessionState state) {
  switch (state) {
    case SessionState::kUntrained: return "untrained";
    case SessionState::kQualified: return "qualified";
    case SessionState::kAnnotating: return "annotating";
  }
  return "?";
}

AnnotationService::AnnotationService(const Dataset& dataset,
                                     std::filesystem::path click_log,
                                     ServiceConfig config)
    : config_(std::move(config)), log_(std::move(click_log)), rng_(config_.seed) {
  config_.Validate();
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const ImageInfo& info : dataset.manifest.images) {
    if (info.split != config_.split) continue;
    for (const GtRecord& g : dataset.gt) {
      if (g.image_id != info.id) continue;
      auto [it, fresh] = index.try_emplace({g.class_name, info.id}, 0);
      auto& list = pairs_[g.class_name];
      if (fresh) {
        it->second = list.size();
        list.push_back({info.id, info.width, info.height, {}});
      }
      list[it->second].centers.push_back(g.box.center());
    }
  }
  for (const ClickLogEntry& e : log_.ReadAll()) {
    holders_[{e.class_name, e.image_id}].insert(e.annotator_id);
  }
}

std::optional<SessionState> AnnotationService::StateOf(
    const std::string& annotator_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = sessions_.find(annotator_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second.state;
}

std::string AnnotationService::NewId(const char* prefix) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s-%llu-%016llx", prefix,
                static_cast<unsigned long long>(++counter_),
                static_cast<unsigned long long>(rng_.NextU64()));
  return buf;
}

ServiceResponse AnnotationService::Handle(const std::string& method,
                                          const std::string& path,
                                          const std::string& authorization,
                                          const std::string& body) {
  static const std::set<std::string> kPaths{"/session", "/qualification", "/batch",
                                            "/instructions"};
  if (!kPaths.count(path)) return Error(404, "unknown path " + path);
  std::lock_guard<std::mutex> lock(mu_);
  try {
    if (path == "/instructions") {
      if (method != "GET") return Error(405, "use GET");
      return Instructions();
    }
    if (path == "/session") {
      if (method != "POST") return Error(405, "use POST");
      return CreateSession(body);
    }
    const std::string kBearer = "Bearer ";
    if (authorization.rfind(kBearer, 0) != 0) return Error(401, "missing bearer token");
    auto tok = tokens_.find(authorization.substr(kBearer.size()));
    if (tok == tokens_.end()) return Error(401, "invalid token");
    Session& session = sessions_.at(tok->second);
    if (path == "/qualification") {
      if (method == "GET") return GetQualification(session);
      if (method == "POST") return PostQualification(session, body);
      return Error(405, "use GET or POST");
    }
    if (method == "GET") return GetBatch(session);
    if (method == "POST") return PostBatch(session, body);
    return Error(405, "use GET or POST");
  } catch (const json::exception& e) {
    return Error(400, std::string("malformed JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    return Error(400, e.what());
  } catch (const std::exception& e) {
    return Error(500, e.what());
  }
}

ServiceResponse AnnotationService::CreateSession(const std::string& body) {
  const json req = ParseBody(body);
  const std::string id = StringField(req, "annotator_id");
  if (id.empty()) throw std::invalid_argument("annotator_id must not be empty");
  Session& session = sessions_[id];
  session.annotator_id = id;
  const std::string token = NewId("tok");
  tokens_[token] = id;
  return Reply(200, json{{"token", token},
                         {"annotator_id", id},
                         {"state", SessionStateName(session.state)}});
}

ServiceResponse AnnotationService::Instructions() const {
  json copy = {
      {"title", "Click on the center of the object"},
      {"center",
       "Imagine a perfectly tight rectangular box around the object and click "
       "on the center of that box, not on the center of mass of the object."},
      {"truncation",
       "If the object is cut by the image border, click on the center of the "
       "visible part."},
      {"multiple_instances",
       "If several objects of the class are present, click on the center of any "
       "one of them."},
      {"pacing", "We suggest a time of about 3 s per click."},
      {"suggested_seconds_per_click", defaults::kSuggestedSecondsPerClick},
      {"qualification",
       "Before annotating you click the center of 20 polygons. You pass when "
       "your mean error is below 20 pixels, and you may retry as often as you want."},
      {"threshold_px", config_.threshold_px},
      {"batch_size", config_.batch_size},
  };
  return Reply(200, std::move(copy));
}

ServiceResponse AnnotationService::GetQualification(Session& session) {
  if (session.state != SessionState::kUntrained) {
    return Reply(200, json{{"status", "qualified"},
                           {"state", SessionStateName(session.state)},
                           {"polygons", json::array()}});
  }
  Attempt attempt;
  attempt.attempt_id = NewId("qual");
  Rng rng(MixSeed(config_.seed, rng_.NextU64()));
  json polys = json::array();
  for (int i = 0; i < config_.qualification_polygons; ++i) {
    attempt.polygons.push_back(
        GeneratePolygon(rng, config_.canvas_width, config_.canvas_height));
    attempt.polygon_ids.push_back(attempt.attempt_id + "-p" + std::to_string(i));
    json verts = json::array();
    for (const Point& v : attempt.polygons.back().vertices()) verts.push_back({v.x, v.y});
    polys.push_back({{"polygon_id", attempt.polygon_ids.back()}, {"vertices", verts}});
  }
  json out = {{"status", "pending"},
              {"state", SessionStateName(session.state)},
              {"attempt_id", attempt.attempt_id},
              {"canvas", {{"width", config_.canvas_width}, {"height", config_.canvas_height}}},
              {"threshold_px", config_.threshold_px},
              {"polygons", std::move(polys)}};
  session.attempt = std::move(attempt);
  return Reply(200, std::move(out));
}

ServiceResponse AnnotationService::PostQualification(Session& session,
                                                     const std::string& body) {
  if (session.state != SessionState::kUntrained) {
    return Error(409, "session is already qualified");
  }
  const json req = ParseBody(body);
  if (!session.attempt || StringField(req, "attempt_id") != session.attempt->attempt_id) {
    return Error(409, "no pending qualification attempt with this id");
  }
  const Attempt& attempt = *session.attempt;
  const json& clicks = ClicksField(req);
  if (clicks.size() != attempt.polygons.size()) {
    return Error(400, "expected " + std::to_string(attempt.polygons.size()) +
                          " clicks, got " + std::to_string(clicks.size()));
  }
  std::vector<std::optional<ClickRecord>> by_polygon(attempt.polygons.size());
  for (const json& c : clicks) {
    const std::string pid = StringField(c, "polygon_id");
    auto it = std::find(attempt.polygon_ids.begin(), attempt.polygon_ids.end(), pid);
    if (it == attempt.polygon_ids.end()) return Error(400, "unknown polygon_id " + pid);
    auto& slot = by_polygon[it - attempt.polygon_ids.begin()];
    if (slot) return Error(400, "duplicate click for " + pid);
    const double t = c.contains("response_time_ms") ? FiniteNumber(c, "response_time_ms") : 0.0;
    slot = ClickRecord{pid, session.annotator_id,
                       Point(FiniteNumber(c, "x"), FiniteNumber(c, "y")), t};
  }
  std::vector<ClickRecord> records;
  for (auto& r : by_polygon) records.push_back(*r);
  const QualificationResult result =
      EvaluateQualification(records, attempt.polygons, config_.threshold_px);
  ++session.attempts;
  json feedback = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    feedback.push_back({{"polygon_id", attempt.polygon_ids[i]},
                        {"center", PointJson(PolygonBboxCenter(attempt.polygons[i]).second)},
                        {"click", PointJson(records[i].position)},
                        {"distance", result.per_polygon_errors[i]}});
  }
  if (result.passed) session.state = SessionState::kQualified;
  session.attempt.reset();
  return Reply(200, json{{"passed", result.passed},
                         {"mean_error", result.mean_error},
                         {"threshold_px", config_.threshold_px},
                         {"attempts", session.attempts},
                         {"state", SessionStateName(session.state)},
                         {"feedback", std::move(feedback)}});
}

std::optional<AnnotationService::Batch> AnnotationService::AssembleBatch(
    const std::string& annotator_id) {
  const std::size_t n_real = config_.batch_size - config_.golden_per_batch;
  const auto held_by = [&](const std::string& cls, const Pair& p) {
    auto it = holders_.find({cls, p.image_id});
    return it == holders_.end() ? std::set<std::string>{} : it->second;
  };
  // Class with the most pairs still needing clicks from this annotator.
  const std::string* best = nullptr;
  std::size_t best_open = 0;
  for (const auto& [cls, pairs] : pairs_) {
    if (pairs.size() < static_cast<std::size_t>(config_.batch_size)) continue;
    std::size_t open = 0;
    for (const Pair& p : pairs) {
      const auto h = held_by(cls, p);
      if (h.size() < static_cast<std::size_t>(config_.clicks_per_object) &&
          !h.count(annotator_id)) {
        ++open;
      }
    }
    if (open > best_open) {
      best = &cls;
      best_open = open;
    }
  }
  if (best == nullptr) return std::nullopt;
  const std::string& cls = *best;
  const std::vector<Pair>& pairs = pairs_.at(cls);

  Batch batch;
  batch.batch_id = NewId("batch");
  batch.class_name = cls;
  std::vector<bool> used(pairs.size(), false);
  const auto add = [&](std::size_t i, bool quota, bool golden) {
    used[i] = true;
    Item item{NewId("item"), pairs[i].image_id, pairs[i].width, pairs[i].height,
              golden ? pairs[i].centers : std::vector<Point>{}, quota};
    if (quota) holders_[{cls, pairs[i].image_id}].insert(annotator_id);
    batch.items.push_back(std::move(item));
  };
  for (std::size_t i = 0; i < pairs.size() && batch.items.size() < n_real; ++i) {
    const auto h = held_by(cls, pairs[i]);
    if (h.size() < static_cast<std::size_t>(config_.clicks_per_object) &&
        !h.count(annotator_id)) {
      add(i, true, false);
    }
  }
  // Near the end of a class, fill with pairs this annotator has not clicked.
  for (std::size_t i = 0; i < pairs.size() && batch.items.size() < n_real; ++i) {
    if (!used[i] && !held_by(cls, pairs[i]).count(annotator_id)) add(i, false, false);
  }
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!used[i]) rest.push_back(i);
  }
  rng_.Shuffle(rest.begin(), rest.end());
  std::stable_partition(rest.begin(), rest.end(), [&](std::size_t i) {
    return !held_by(cls, pairs[i]).count(annotator_id);
  });
  for (std::size_t i : rest) {
    if (batch.items.size() >= n_real) break;
    add(i, false, false);
  }
  for (std::size_t k = 0, taken = 0; k < rest.size() && taken <
       static_cast<std::size_t>(config_.golden_per_batch); ++k) {
    if (used[rest[k]]) continue;
    add(rest[k], false, true);
    ++taken;
  }
  rng_.Shuffle(batch.items.begin(), batch.items.end());
  return batch;
}

void AnnotationService::Release(const Batch& batch, const std::string& annotator_id) {
  for (const Item& item : batch.items) {
    if (!item.quota) continue;
    auto it = holders_.find({batch.class_name, item.image_id});
    if (it == holders_.end()) continue;
    it->second.erase(annotator_id);
    if (it->second.empty()) holders_.erase(it);
  }
}

ServiceResponse AnnotationService::GetBatch(Session& session) {
  if (session.state == SessionState::kUntrained) {
    return Error(403, "pass the qualification test first");
  }
  if (!session.batch) session.batch = AssembleBatch(session.annotator_id);
  if (!session.batch) {
    return Reply(200, json{{"batch_id", nullptr},
                           {"class_name", nullptr},
                           {"items", json::array()}});
  }
  session.state = SessionState::kAnnotating;
  json items = json::array();
  for (const Item& item : session.batch->items) {
    items.push_back({{"item_id", item.item_id},
                     {"image_id", item.image_id},
                     {"width", item.width},
                     {"height", item.height}});
  }
  return Reply(200, json{{"batch_id", session.batch->batch_id},
                         {"class_name", session.batch->class_name},
                         {"items", std::move(items)}});
}

ServiceResponse AnnotationService::PostBatch(Session& session, const std::string& body) {
  if (session.state == SessionState::kUntrained) {
    return Error(403, "pass the qualification test first");
  }
  const json req = ParseBody(body);
  if (!session.batch || StringField(req, "batch_id") != session.batch->batch_id) {
    return Error(409, "no open batch with this id");
  }
  const Batch& batch = *session.batch;
  const json& clicks = ClicksField(req);
  if (clicks.size() != batch.items.size()) {
    return Error(400, "expected " + std::to_string(batch.items.size()) + " clicks, got " +
                          std::to_string(clicks.size()));
  }
  std::vector<std::optional<ClickLogEntry>> by_item(batch.items.size());
  for (const json& c : clicks) {
    const std::string id = StringField(c, "item_id");
    auto it = std::find_if(batch.items.begin(), batch.items.end(),
                           [&](const Item& item) { return item.item_id == id; });
    if (it == batch.items.end()) return Error(400, "unknown item_id " + id);
    auto& slot = by_item[it - batch.items.begin()];
    if (slot) return Error(400, "duplicate click for " + id);
    const double x = FiniteNumber(c, "x"), y = FiniteNumber(c, "y");
    const double t = FiniteNumber(c, "response_time_ms");
    if (x < 0.0 || y < 0.0 || x > it->width || y > it->height) {
      return Error(400, "click outside image for " + id);
    }
    if (t < 0.0) return Error(400, "negative response_time_ms for " + id);
    ClickLogEntry e;
    e.image_id = it->image_id;
    e.class_name = batch.class_name;
    e.annotator_id = session.annotator_id;
    e.x = x;
    e.y = y;
    e.time_ms = t;
    slot = e;
  }
  double golden_sum = 0.0, time_sum = 0.0;
  int golden_n = 0;
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    time_sum += by_item[i]->time_ms;
    const auto& centers = batch.items[i].golden_centers;
    if (centers.empty()) continue;
    double best = Euclidean(centers[0], {by_item[i]->x, by_item[i]->y});
    for (const Point& c : centers) {
      best = std::min(best, Euclidean(c, {by_item[i]->x, by_item[i]->y}));
    }
    golden_sum += best;
    ++golden_n;
  }
  const bool accepted = golden_n > 0 && golden_sum / golden_n < config_.threshold_px;
  std::size_t persisted = 0;
  if (accepted) {
    // Quota items always go in. Fillers and goldens only while their pair
    // still has room, so no pair ends up with more than N annotators.
    std::vector<ClickLogEntry> entries;
    const auto n = static_cast<std::size_t>(config_.clicks_per_object);
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
      auto& holders = holders_[{batch.class_name, batch.items[i].image_id}];
      if (!batch.items[i].quota) {
        if (holders.size() >= n || holders.count(session.annotator_id)) continue;
        holders.insert(session.annotator_id);
      }
      entries.push_back(*by_item[i]);
    }
    persisted = log_.Append(std::move(entries)).size();
  } else {
    Release(batch, session.annotator_id);
  }
  json out = {{"batch_id", batch.batch_id},
              {"accepted", accepted},
              {"persisted", persisted},
              {"mean_response_time_ms", time_sum / batch.items.size()},
              {"state", SessionStateName(session.state)}};
  if (!accepted) {
    out["message"] =
        "Some clicks were not close enough to the object centers. Please reread "
        "the instructions and try another batch.";
  }
  session.batch.reset();
  return Reply(200, std::move(out));
}

struct HttpServer::Impl {
  explicit Impl(AnnotationService& s) : service(s) {}
  AnnotationService& service;
  httplib::Server server;
  std::thread thread;
};

HttpServer::HttpServer(AnnotationService& service)
    : impl_(std::make_unique<Impl>(service)) {
  const auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    const ServiceResponse r = impl_->service.Handle(
        req.method, req.path, req.get_header_value("Authorization"), req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
  impl_->server.Put(".*", handler);
  impl_->server.Delete(".*", handler);
}

HttpServer::~HttpServer() { Stop(); }

int HttpServer::Start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::Wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void HttpServer::Stop() {
  impl_->server.stop();
  Wait();
}

}  // namespace clickmil
