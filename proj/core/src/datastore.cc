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

#include "clickmil/datastore.h"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace clickmil {

namespace fs = std::filesystem;
using nlohmann::json;

DataError::DataError(const std::string& file, int line, const std::string& message)
    : std::runtime_error(line > 0 ? file + ":" + std::to_string(line) + ": " + message
                                  : file + ": " + message) {}

const ImageInfo* Dataset::FindImage(const std::string& id) const {
  for (const auto& img : manifest.images) {
    if (img.id == id) return &img;
  }
  return nullptr;
}

void WriteFileAtomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw DataError(tmp.string(), 0, std::strerror(errno));
  std::size_t written = 0;
  while (written < content.size()) {
    const ssize_t n = ::write(fd, content.data() + written, content.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string err = std::strerror(errno);
      ::close(fd);
      throw DataError(tmp.string(), 0, err);
    }
    written += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  fs::rename(tmp, path);
}

double RoundFeatureValue(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.5e", v);
  return std::strtod(buf, nullptr);
}

namespace {

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json Header(const std::string& kind) {
  return json{{"schema_version", kSchemaVersion}, {"kind", kind}};
}

void CheckVersion(const json& j, const std::string& file, int line) {
  if (!j.contains("schema_version") || j["schema_version"] != kSchemaVersion) {
    throw DataError(file, line, "unsupported or missing schema_version");
  }
}

// Parses a JSONL file with a header line; calls fn(record, line_number).
template <typename Fn>
void ForEachRecord(const fs::path& path, const std::string& kind, Fn&& fn) {
  if (!fs::exists(path)) throw DataError(path.string(), 0, "missing file");
  std::ifstream in(path);
  if (!in) throw DataError(path.string(), 0, "cannot open file");
  std::string line;
  int number = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path.string(), number, std::string("malformed JSON: ") + e.what());
    }
    if (!header_seen) {
      CheckVersion(j, path.string(), number);
      if (j.value("kind", "") != kind) {
        throw DataError(path.string(), number, "expected kind '" + kind + "'");
      }
      header_seen = true;
      continue;
    }
    try {
      fn(j, number);
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& e) {
      throw DataError(path.string(), number, std::string("bad record: ") + e.what());
    }
  }
  if (!header_seen) throw DataError(path.string(), 0, "missing header line");
}

json BoxJson(const Box& b) { return json::array({b.x(), b.y(), b.w(), b.h()}); }

Box BoxFromJson(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be [x,y,w,h]");
  return Box(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
             j[3].get<double>());
}

std::string FormatFeature(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.5e", v);
  return buf;
}

json SyntheticToJson(const SyntheticConfig& c) {
  return json{{"images", c.images},
              {"test_images", c.test_images},
              {"classes", c.classes},
              {"positive_fraction", c.positive_fraction},
              {"proposals_per_image", c.proposals_per_image},
              {"feature_dim", c.feature_dim},
              {"feature_noise", c.feature_noise},
              {"iou_floor", c.iou_floor},
              {"rho", c.rho},
              {"objectness_noise", c.objectness_noise},
              {"distractors_per_image", c.distractors_per_image},
              {"seed", c.seed}};
}

SyntheticConfig SyntheticFromJson(const json& j) {
  SyntheticConfig c;
  c.images = j.at("images").get<int>();
  c.test_images = j.at("test_images").get<int>();
  c.classes = j.at("classes").get<std::vector<std::string>>();
  c.positive_fraction = j.at("positive_fraction").get<double>();
  c.proposals_per_image = j.at("proposals_per_image").get<int>();
  c.feature_dim = j.at("feature_dim").get<int>();
  c.feature_noise = j.at("feature_noise").get<double>();
  c.iou_floor = j.at("iou_floor").get<double>();
  c.rho = j.at("rho").get<double>();
  c.objectness_noise = j.at("objectness_noise").get<double>();
  c.distractors_per_image = j.at("distractors_per_image").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json ClickEntryJson(const ClickLogEntry& e) {
  json j{{"record_id", e.record_id}, {"seq", e.seq},
         {"image_id", e.image_id},   {"class", e.class_name},
         {"annotator_id", e.annotator_id}, {"x", e.x},
         {"y", e.y},                 {"time_ms", e.time_ms}};
  if (e.supersedes) j["supersedes"] = *e.supersedes;
  return j;
}

ClickLogEntry ClickEntryFromJson(const json& j) {
  ClickLogEntry e;
  e.record_id = j.value("record_id", std::int64_t{0});
  e.seq = j.value("seq", std::int64_t{0});
  e.image_id = j.at("image_id").get<std::string>();
  e.class_name = j.at("class").get<std::string>();
  e.annotator_id = j.at("annotator_id").get<std::string>();
  e.x = j.at("x").get<double>();
  e.y = j.at("y").get<double>();
  e.time_ms = j.at("time_ms").get<double>();
  if (!std::isfinite(e.x) || !std::isfinite(e.y)) throw std::invalid_argument("non-finite click");
  if (!(e.time_ms >= 0.0)) throw std::invalid_argument("time_ms must be >= 0");
  if (j.contains("supersedes") && !j["supersedes"].is_null()) {
    e.supersedes = j["supersedes"].get<std::int64_t>();
  }
  return e;
}

}  // namespace

void SaveClickLog(const std::vector<ClickLogEntry>& entries, const fs::path& path) {
  std::string out = Header("clicks").dump() + "\n";
  for (const auto& c : entries) out += ClickEntryToJsonLine(c);
  WriteFileAtomic(path, out);
}

std::string ClickEntryToJsonLine(const ClickLogEntry& entry) {
  return ClickEntryJson(entry).dump() + "\n";
}

void SaveDataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  const DatasetManifest& m = dataset.manifest;
  json images = json::array();
  for (const auto& img : m.images) {
    images.push_back(json{{"id", img.id},
                          {"width", img.width},
                          {"height", img.height},
                          {"labels", img.labels},
                          {"split", img.split}});
  }
  json manifest{{"schema_version", kSchemaVersion},
                {"name", m.name},
                {"classes", m.classes},
                {"feature_dim", m.feature_dim},
                {"images", images},
                {"files",
                 {{"proposals", m.proposals_file},
                  {"gt", m.gt_file},
                  {"clicks", m.clicks_file}}}};
  if (m.synthetic) manifest["synthetic"] = SyntheticToJson(*m.synthetic);

  std::string proposals = Header("proposals").dump() + "\n";
  for (const auto& img : m.images) {
    auto it = dataset.proposals.find(img.id);
    if (it == dataset.proposals.end()) continue;
    for (const Proposal& p : it->second) {
      std::string line =
          json{{"image_id", img.id}, {"box", BoxJson(p.box)}, {"objectness", p.objectness}}
              .dump();
      line.pop_back();  // reopen the object for the fixed-width feature array
      line += ",\"feature\":[";
      for (std::size_t d = 0; d < p.feature.size(); ++d) {
        if (d > 0) line += ',';
        line += FormatFeature(p.feature[d]);
      }
      line += "]}\n";
      proposals += line;
    }
  }
  std::string gt = Header("gt").dump() + "\n";
  for (const auto& g : dataset.gt) {
    gt += json{{"image_id", g.image_id}, {"class", g.class_name}, {"box", BoxJson(g.box)}}
              .dump() +
          "\n";
  }
  WriteFileAtomic(dir / m.proposals_file, proposals);
  WriteFileAtomic(dir / m.gt_file, gt);
  if (!dataset.clicks.empty()) {
    SaveClickLog(dataset.clicks, dir / m.clicks_file);
  }
  WriteFileAtomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset LoadDataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw DataError(manifest_path.string(), 0, "missing file");
  json j;
  try {
    j = json::parse(ReadFile(manifest_path));
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string(), 0, std::string("malformed JSON: ") + e.what());
  }
  CheckVersion(j, manifest_path.string(), 0);
  Dataset ds;
  DatasetManifest& m = ds.manifest;
  std::set<std::string> ids;
  try {
    m.name = j.at("name").get<std::string>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.feature_dim = j.at("feature_dim").get<int>();
    for (const auto& ij : j.at("images")) {
      ImageInfo img;
      img.id = ij.at("id").get<std::string>();
      img.width = ij.at("width").get<double>();
      img.height = ij.at("height").get<double>();
      img.labels = ij.at("labels").get<std::vector<std::string>>();
      img.split = ij.value("split", "trainval");
      if (!(img.width > 0 && img.height > 0)) throw std::invalid_argument("image size");
      if (!ids.insert(img.id).second) {
        throw std::invalid_argument("duplicate image id " + img.id);
      }
      m.images.push_back(std::move(img));
    }
    const auto& files = j.at("files");
    m.proposals_file = files.at("proposals").get<std::string>();
    m.gt_file = files.at("gt").get<std::string>();
    m.clicks_file = files.value("clicks", "clicks.jsonl");
    if (j.contains("synthetic")) m.synthetic = SyntheticFromJson(j["synthetic"]);
  } catch (const std::exception& e) {
    throw DataError(manifest_path.string(), 0, std::string("bad manifest: ") + e.what());
  }

  const fs::path prop_path = dir / m.proposals_file;
  ForEachRecord(prop_path, "proposals", [&](const json& r, int line) {
    const std::string id = r.at("image_id").get<std::string>();
    if (!ids.count(id)) {
      throw DataError(prop_path.string(), line, "unknown image_id '" + id + "'");
    }
    Proposal p{BoxFromJson(r.at("box")), r.at("feature").get<std::vector<double>>(),
               r.at("objectness").get<double>()};
    if (static_cast<int>(p.feature.size()) != m.feature_dim) {
      throw DataError(prop_path.string(), line, "feature dimension mismatch");
    }
    if (!(p.objectness >= 0.0 && p.objectness <= 1.0)) {
      throw DataError(prop_path.string(), line, "objectness outside [0,1]");
    }
    ds.proposals[id].push_back(std::move(p));
  });
  const fs::path gt_path = dir / m.gt_file;
  ForEachRecord(gt_path, "gt", [&](const json& r, int line) {
    GtRecord g{r.at("image_id").get<std::string>(), r.at("class").get<std::string>(),
               BoxFromJson(r.at("box"))};
    if (!ids.count(g.image_id)) {
      throw DataError(gt_path.string(), line, "unknown image_id '" + g.image_id + "'");
    }
    ds.gt.push_back(std::move(g));
  });
  const fs::path clicks_path = dir / m.clicks_file;
  if (fs::exists(clicks_path)) ds.clicks = ReadClickLog(clicks_path);
  return ds;
}

std::vector<Bag> BuildBags(const Dataset& dataset, const std::string& class_name,
                           const std::string& split) {
  std::set<std::int64_t> superseded;
  for (const auto& c : dataset.clicks) {
    if (c.supersedes) superseded.insert(*c.supersedes);
  }
  std::map<std::string, std::vector<const ClickLogEntry*>> clicks_by_image;
  for (const auto& c : dataset.clicks) {
    if (c.class_name != class_name || superseded.count(c.record_id)) continue;
    clicks_by_image[c.image_id].push_back(&c);
  }
  std::map<std::string, std::vector<Box>> gt_by_image;
  for (const auto& g : dataset.gt) {
    if (g.class_name == class_name) gt_by_image[g.image_id].push_back(g.box);
  }
  std::vector<Bag> bags;
  for (const auto& img : dataset.manifest.images) {
    if (img.split != split) continue;
    Bag bag;
    bag.image_id = img.id;
    bag.width = img.width;
    bag.height = img.height;
    const bool positive =
        std::find(img.labels.begin(), img.labels.end(), class_name) != img.labels.end();
    bag.label = positive ? BagLabel::kPositive : BagLabel::kNegative;
    auto pit = dataset.proposals.find(img.id);
    if (pit != dataset.proposals.end()) bag.proposals = pit->second;
    if (positive) {
      auto git = gt_by_image.find(img.id);
      if (git != gt_by_image.end()) bag.gt_boxes = git->second;
      auto cit = clicks_by_image.find(img.id);
      if (cit != clicks_by_image.end()) {
        std::set<std::string> annotators;
        for (const ClickLogEntry* c : cit->second) {
          if (bag.clicks.size() == 2) break;
          if (!annotators.insert(c->annotator_id).second) continue;
          bag.clicks.push_back(ClickRecord{img.id, c->annotator_id,
                                           ClampToImage(Point(c->x, c->y), img.width, img.height),
                                           c->time_ms});
        }
      }
    }
    bags.push_back(std::move(bag));
  }
  return bags;
}

WindowFeatureFn MakeWindowFeatureFn(const Dataset& dataset) {
  if (!dataset.manifest.synthetic) return nullptr;
  auto world = std::make_shared<SyntheticWorld>(*dataset.manifest.synthetic);
  return [world](const Bag& bag, const Box& window) {
    const SyntheticImage* img = world->Find(bag.image_id);
    if (img == nullptr) {
      throw std::invalid_argument("synthetic world has no image " + bag.image_id);
    }
    return world->Feature(*img, window);
  };
}

std::string SerializeErrorModel(const ErrorModel& model) {
  json j{{"schema_version", kSchemaVersion},
         {"sigma_bc", model.sigma_bc},
         {"d_max", model.d_max},
         {"mu",
          {{"coeffs", model.mu_coeffs},
           {"range", json::array({model.mu_lo, model.mu_hi})},
           {"target", "log_area_relative_to_image"}}},
         {"sigma_ba", model.sigma_ba},
         {"sim_distance_coeffs", model.sim_distance_coeffs}};
  return j.dump(2) + "\n";
}

ErrorModel ParseErrorModel(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(origin, 0, std::string("malformed JSON: ") + e.what());
  }
  CheckVersion(j, origin, 0);
  ErrorModel m;
  try {
    m.sigma_bc = j.at("sigma_bc").get<double>();
    m.d_max = j.at("d_max").get<double>();
    m.mu_coeffs = j.at("mu").at("coeffs").get<std::vector<double>>();
    m.mu_lo = j.at("mu").at("range").at(0).get<double>();
    m.mu_hi = j.at("mu").at("range").at(1).get<double>();
    m.sigma_ba = j.at("sigma_ba").get<double>();
    m.sim_distance_coeffs = j.at("sim_distance_coeffs").get<std::vector<double>>();
    m.Validate();
  } catch (const std::exception& e) {
    throw DataError(origin, 0, std::string("bad error model: ") + e.what());
  }
  return m;
}

void SaveErrorModel(const ErrorModel& model, const fs::path& path) {
  WriteFileAtomic(path, SerializeErrorModel(model));
}

ErrorModel LoadErrorModel(const fs::path& path) {
  if (!fs::exists(path)) throw DataError(path.string(), 0, "missing file");
  return ParseErrorModel(ReadFile(path), path.string());
}

void SaveSelections(const std::vector<ClassSelection>& selections, const fs::path& path) {
  std::string out = Header("selections").dump() + "\n";
  for (const auto& cs : selections) {
    const Selection& s = cs.selection;
    out += json{{"image_id", s.image_id},
                {"class", cs.class_name},
                {"proposal_index", s.proposal_index},
                {"box", BoxJson(s.box)},
                {"score", s.score},
                {"s_ap", s.s_ap},
                {"s_bc", s.s_bc},
                {"s_ba", s.s_ba}}
               .dump() +
           "\n";
  }
  WriteFileAtomic(path, out);
}

std::vector<ClassSelection> LoadSelections(const fs::path& path) {
  std::vector<ClassSelection> out;
  ForEachRecord(path, "selections", [&](const json& r, int) {
    ClassSelection cs;
    cs.class_name = r.at("class").get<std::string>();
    cs.selection.image_id = r.at("image_id").get<std::string>();
    cs.selection.proposal_index = r.at("proposal_index").get<int>();
    cs.selection.box = BoxFromJson(r.at("box"));
    cs.selection.score = r.at("score").get<double>();
    cs.selection.s_ap = r.at("s_ap").get<double>();
    cs.selection.s_bc = r.at("s_bc").get<double>();
    cs.selection.s_ba = r.at("s_ba").get<double>();
    out.push_back(std::move(cs));
  });
  return out;
}

std::string SerializeMetrics(const MetricReport& report) {
  json j{{"schema_version", kSchemaVersion},
         {"supervision", report.supervision},
         {"corloc", report.corloc},
         {"corloc_per_class", report.corloc_per_class},
         {"per_class_ap", report.per_class_ap},
         {"map", report.map},
         {"annotation_time_hours", report.annotation_time_hours},
         {"positive_pairs", report.positive_pairs}};
  return j.dump(2) + "\n";
}

void SaveMetrics(const MetricReport& report, const fs::path& path) {
  WriteFileAtomic(path, SerializeMetrics(report));
}

MetricReport LoadMetrics(const fs::path& path) {
  if (!fs::exists(path)) throw DataError(path.string(), 0, "missing file");
  MetricReport r;
  try {
    const json j = json::parse(ReadFile(path));
    CheckVersion(j, path.string(), 0);
    r.supervision = j.value("supervision", "");
    r.corloc = j.at("corloc").get<double>();
    r.corloc_per_class = j.value("corloc_per_class", std::map<std::string, double>{});
    r.per_class_ap = j.at("per_class_ap").get<std::map<std::string, double>>();
    r.map = j.at("map").get<double>();
    r.annotation_time_hours = j.at("annotation_time_hours").get<double>();
    r.positive_pairs = j.value("positive_pairs", 0LL);
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(path.string(), 0, std::string("bad metrics: ") + e.what());
  }
  return r;
}

void SaveModels(const std::map<std::string, AppearanceModel>& models, const fs::path& path) {
  json classes = json::object();
  for (const auto& [name, m] : models) {
    classes[name] = json{{"weights", m.weights}, {"bias", m.bias}};
  }
  WriteFileAtomic(path, json{{"schema_version", kSchemaVersion}, {"classes", classes}}.dump() +
                            "\n");
}

std::map<std::string, AppearanceModel> LoadModels(const fs::path& path) {
  if (!fs::exists(path)) throw DataError(path.string(), 0, "missing file");
  std::map<std::string, AppearanceModel> out;
  try {
    const json j = json::parse(ReadFile(path));
    CheckVersion(j, path.string(), 0);
    for (const auto& [name, m] : j.at("classes").items()) {
      out[name] = AppearanceModel{m.at("weights").get<std::vector<double>>(),
                                  m.at("bias").get<double>()};
    }
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(path.string(), 0, std::string("bad model file: ") + e.what());
  }
  return out;
}

void SavePolygonClicks(const std::vector<PolygonClick>& corpus, const fs::path& path) {
  std::string out = Header("polygon_clicks").dump() + "\n";
  for (const PolygonClick& pc : corpus) {
    json verts = json::array();
    for (const Point& v : pc.polygon.vertices()) verts.push_back(json::array({v.x, v.y}));
    out += json{{"polygon_id", pc.polygon_id},
                {"canvas", json::array({pc.canvas_w, pc.canvas_h})},
                {"vertices", verts},
                {"annotator_id", pc.click.annotator_id},
                {"x", pc.click.position.x},
                {"y", pc.click.position.y},
                {"time_ms", pc.click.response_time_ms}}
               .dump() +
           "\n";
  }
  WriteFileAtomic(path, out);
}

std::vector<PolygonClick> LoadPolygonClicks(const fs::path& path) {
  std::vector<PolygonClick> out;
  ForEachRecord(path, "polygon_clicks", [&](const json& r, int) {
    std::vector<Point> verts;
    for (const auto& v : r.at("vertices")) {
      verts.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
    }
    ClickRecord click;
    click.target_id = r.at("polygon_id").get<std::string>();
    click.annotator_id = r.at("annotator_id").get<std::string>();
    click.position = Point(r.at("x").get<double>(), r.at("y").get<double>());
    click.response_time_ms = r.value("time_ms", 0.0);
    out.push_back(PolygonClick{click.target_id, r.at("canvas").at(0).get<double>(),
                               r.at("canvas").at(1).get<double>(), Polygon(std::move(verts)),
                               std::move(click)});
  });
  return out;
}

std::vector<ClickLogEntry> ReadClickLog(const fs::path& path) {
  std::vector<ClickLogEntry> out;
  if (!fs::exists(path)) return out;
  const std::string content = ReadFile(path);
  std::size_t pos = 0;
  int number = 0;
  bool header_seen = false;
  while (pos < content.size()) {
    const std::size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) break;  // torn final append
    const std::string line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++number;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path.string(), number, std::string("malformed JSON: ") + e.what());
    }
    if (!header_seen) {
      CheckVersion(j, path.string(), number);
      header_seen = true;
      continue;
    }
    try {
      out.push_back(ClickEntryFromJson(j));
    } catch (const std::exception& e) {
      throw DataError(path.string(), number, std::string("bad click record: ") + e.what());
    }
  }
  return out;
}

ClickLog::ClickLog(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
}

namespace {

// Holds an exclusive flock on an open descriptor.
class LockedFile {
 public:
  explicit LockedFile(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_APPEND, 0644);
    if (fd_ < 0) throw DataError(path.string(), 0, std::strerror(errno));
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno != EINTR) {
        ::close(fd_);
        throw DataError(path.string(), 0, "cannot lock click log");
      }
    }
  }
  ~LockedFile() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  LockedFile(const LockedFile&) = delete;
  LockedFile& operator=(const LockedFile&) = delete;
  int fd() const { return fd_; }

 private:
  int fd_ = -1;
};

}  // namespace

std::vector<ClickLogEntry> ClickLog::Append(std::vector<ClickLogEntry> entries) {
  std::lock_guard<std::mutex> guard(mu_);
  LockedFile file(path_);
  // Drop a torn tail left by a crashed writer before appending after it.
  const std::string raw = ReadFile(path_);
  if (!raw.empty() && raw.back() != '\n') {
    const std::size_t keep = raw.rfind('\n') == std::string::npos ? 0 : raw.rfind('\n') + 1;
    if (::ftruncate(file.fd(), static_cast<off_t>(keep)) != 0) {
      throw DataError(path_.string(), 0, "cannot truncate torn record");
    }
  }
  // Counters are recomputed under the lock so several writers agree.
  const std::vector<ClickLogEntry> existing = ReadClickLog(path_);
  std::string out;
  if (fs::file_size(path_) == 0) out += Header("clicks").dump() + "\n";
  std::int64_t next_id = 1;
  std::map<std::string, std::int64_t> seq;
  for (const auto& e : existing) {
    next_id = std::max(next_id, e.record_id + 1);
    seq[e.annotator_id] = std::max(seq[e.annotator_id], e.seq);
  }
  for (auto& e : entries) {
    e.record_id = next_id++;
    e.seq = ++seq[e.annotator_id];
    out += ClickEntryToJsonLine(e);
  }
  std::size_t written = 0;
  while (written < out.size()) {
    const ssize_t n = ::write(file.fd(), out.data() + written, out.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw DataError(path_.string(), 0, std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  ::fsync(file.fd());
  return entries;
}

ClickLogEntry ClickLog::Append(ClickLogEntry entry) {
  std::vector<ClickLogEntry> one;
  one.push_back(std::move(entry));
  return Append(std::move(one)).front();
}

}  // namespace clickmil
