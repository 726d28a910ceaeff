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


#include "cli.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"
#include "clickmil/annotator.h"
#include "clickmil/datastore.h"
#include "clickmil/eval.h"
#include "clickmil/mil.h"
#include "clickmil/pipeline.h"
#include "clickmil/rng.h"
#include "clickmil/service.h"
#include "clickmil/synthetic.h"
#include "json.hpp"

namespace clickmil::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Bad configuration value; the message starts with the setting name.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Kind { kInt, kDouble, kString, kBool, kStrings, kDoubles };

struct Entry {
  std::string key;
  Kind kind = Kind::kString;
  json def;
  std::string raw;
  std::vector<std::string> raw_list;
  bool raw_flag = false;
  CLI::Option* opt = nullptr;
  json value;
  std::string source;
};

std::string Dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

json ParseScalar(const Entry& e, const std::string& text) {
  const std::string name = e.key;
  std::size_t used = 0;
  try {
    switch (e.kind) {
      case Kind::kInt: {
        const long long v = std::stoll(text, &used);
        if (used != text.size()) break;
        return v;
      }
      case Kind::kDouble:
      case Kind::kDoubles: {
        const double v = std::stod(text, &used);
        if (used != text.size()) break;
        return v;
      }
      default:
        return text;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(name + ": cannot parse '" + text + "' as " +
                    (e.kind == Kind::kInt ? "an integer" : "a number"));
}

json CheckFileValue(const Entry& e, const json& v) {
  const auto bad = [&](const char* want) {
    return ConfigError(e.key + ": expected " + want + " in config file, got " + v.dump());
  };
  switch (e.kind) {
    case Kind::kInt:
      if (!v.is_number_integer()) throw bad("an integer");
      return v;
    case Kind::kDouble:
      if (!v.is_number()) throw bad("a number");
      return v.get<double>();
    case Kind::kString:
      if (!v.is_string()) throw bad("a string");
      return v;
    case Kind::kBool:
      if (!v.is_boolean()) throw bad("a boolean");
      return v;
    case Kind::kStrings:
      if (!v.is_array() || !std::all_of(v.begin(), v.end(),
                                        [](const json& x) { return x.is_string(); })) {
        throw bad("a list of strings");
      }
      return v;
    case Kind::kDoubles:
      if (!v.is_array() || !std::all_of(v.begin(), v.end(),
                                        [](const json& x) { return x.is_number(); })) {
        throw bad("a list of numbers");
      }
      return v;
  }
  return v;
}

// Named settings of one subcommand with flag > config file > default
// precedence.
class Settings {
 public:
  void Add(CLI::App* app, const std::string& key, Kind kind, json def,
           const std::string& help) {
    auto e = std::make_unique<Entry>();
    e->key = key;
    e->kind = kind;
    e->def = std::move(def);
    const std::string flag = Dashed(key);
    switch (kind) {
      case Kind::kBool:
        e->opt = app->add_flag(flag, e->raw_flag, help);
        break;
      case Kind::kStrings:
      case Kind::kDoubles:
        e->opt = app->add_option(flag, e->raw_list, help)->delimiter(',');
        break;
      default:
        e->opt = app->add_option(flag, e->raw, help);
    }
    static const char* const kTypeNames[] = {"INT", "FLOAT", "TEXT", "", "TEXT,...",
                                             "FLOAT,..."};
    e->opt->type_name(kTypeNames[static_cast<int>(kind)]);
    entries_.push_back(std::move(e));
  }

  void Resolve(const json& file, const std::string& file_name) {
    for (auto& e : entries_) {
      if (e->opt->count() > 0) {
        e->source = "flag";
        if (e->kind == Kind::kBool) {
          e->value = e->raw_flag;
        } else if (e->kind == Kind::kStrings || e->kind == Kind::kDoubles) {
          e->value = json::array();
          for (const std::string& r : e->raw_list) e->value.push_back(ParseScalar(*e, r));
        } else {
          e->value = ParseScalar(*e, e->raw);
        }
      } else if (file.contains(e->key)) {
        e->source = "file " + file_name;
        e->value = CheckFileValue(*e, file.at(e->key));
      } else {
        e->source = "default";
        e->value = e->def;
      }
    }
  }

  bool Has(const std::string& key) const { return !Find(key).value.is_null(); }
  const json& Get(const std::string& key) const { return Find(key).value; }
  const json& Require(const std::string& key, const std::string& why) const {
    const json& v = Get(key);
    if (v.is_null()) throw ConfigError(key + ": required " + why);
    return v;
  }
  long long Int(const std::string& key) const { return Require(key, "").get<long long>(); }
  double Double(const std::string& key) const { return Require(key, "").get<double>(); }
  std::string String(const std::string& key) const {
    return Require(key, "").get<std::string>();
  }
  bool Bool(const std::string& key) const { return Get(key).get<bool>(); }
  bool Contains(const std::string& key) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto& e) { return e->key == key; });
  }

  json Snapshot() const {
    json j = json::object();
    for (const auto& e : entries_) j[e->key] = e->value;
    return j;
  }

  void Print(std::ostream& os) const {
    for (const auto& e : entries_) {
      os << "config " << e->key << " = " << e->value.dump() << "  (" << e->source << ")\n";
    }
  }

 private:
  const Entry& Find(const std::string& key) const {
    for (const auto& e : entries_) {
      if (e->key == key) return *e;
    }
    throw std::logic_error("unknown setting " + key);
  }

  std::vector<std::unique_ptr<Entry>> entries_;
};

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string HexDigest(const std::string& bytes) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(Fnv1a(bytes)));
  return std::string("fnv1a64:") + buf;
}

// Settings for one subcommand from the config file: top-level keys, then the
// section named after the subcommand. Unknown keys in that section are errors.
json ConfigSection(const std::string& path, const std::string& subcommand,
                   const Settings& settings) {
  if (path.empty()) return json::object();
  json doc;
  try {
    doc = json::parse(ReadText(path));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + path + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: " + path + " must hold a JSON object");
  json merged = json::object();
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!it.value().is_object() && settings.Contains(it.key())) merged[it.key()] = it.value();
  }
  if (doc.contains(subcommand)) {
    const json& section = doc[subcommand];
    if (!section.is_object()) throw ConfigError("config: section '" + subcommand + "' must be an object");
    for (auto it = section.begin(); it != section.end(); ++it) {
      if (!settings.Contains(it.key())) {
        throw ConfigError(it.key() + ": unknown setting in config section '" + subcommand + "'");
      }
      merged[it.key()] = it.value();
    }
  }
  return merged;
}

struct Context {
  std::string name;
  Settings settings;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
  // Input files whose digests go into run.json.
  std::vector<fs::path> inputs;
};

void WriteRunJson(const Context& ctx, const fs::path& dir) {
  const json config = ctx.settings.Snapshot();
  // The output location does not change results, so it stays out of the digest.
  json digested = config;
  digested.erase("out");
  json inputs = json::object();
  for (const fs::path& p : ctx.inputs) {
    if (fs::is_regular_file(p)) inputs[p.string()] = HexDigest(ReadText(p));
  }
  json run = {{"schema_version", kSchemaVersion},
              {"kind", "run"},
              {"subcommand", ctx.name},
              {"seed", config.contains("seed") ? config["seed"] : json(nullptr)},
              {"config", config},
              {"config_digest", HexDigest(digested.dump())},
              {"inputs", inputs},
              {"versions", {{"clickmil", kVersion}, {"schema", kSchemaVersion}}}};
  fs::create_directories(dir);
  WriteFileAtomic(dir / "run.json", run.dump(2) + "\n");
}

std::uint64_t Seed(const Context& ctx, const char* why) {
  const long long s = ctx.settings.Require("seed", why).get<long long>();
  if (s < 0) throw ConfigError("seed: must be >= 0");
  return static_cast<std::uint64_t>(s);
}

int Threads(const Context& ctx) {
  long long n = ctx.settings.Int("threads");
  if (n < 0) throw ConfigError("threads: must be >= 0");
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CLICKMIL_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1) {
      throw ConfigError("CLICKMIL_THREADS: expected a positive integer, got '" +
                        std::string(env) + "'");
    }
    n = std::min<long long>(n, cap);
  }
  return static_cast<int>(n);
}

ErrorModel LoadModelOrReplica(Context& ctx) {
  if (!ctx.settings.Has("error_model")) return ReplicaErrorModel(0);
  const fs::path p = ctx.settings.String("error_model");
  ctx.inputs.push_back(p);
  return LoadErrorModel(p);
}

Dataset LoadDatasetInput(Context& ctx) {
  const fs::path dir = ctx.settings.Require("dataset", "(dataset directory)").get<std::string>();
  Dataset ds = LoadDataset(dir);
  ctx.inputs.push_back(dir / "manifest.json");
  ctx.inputs.push_back(dir / ds.manifest.proposals_file);
  ctx.inputs.push_back(dir / ds.manifest.gt_file);
  return ds;
}

std::vector<double> DoubleList(const json& v) {
  std::vector<double> out;
  for (const json& x : v) out.push_back(x.get<double>());
  return out;
}

// Subcommands -----------------------------------------------------------

void SetupGenPolygons(CLI::App* app, Settings& s) {
  s.Add(app, "count", Kind::kInt, 2000, "number of polygons");
  s.Add(app, "clicks_per_polygon", Kind::kInt, 2, "simulated clicks per polygon");
  s.Add(app, "law", Kind::kDoubles, DefaultSimDistanceCoeffs(),
        "error-distance law coefficients (ascending, vs sqrt area)");
  s.Add(app, "canvas_width", Kind::kDouble, defaults::kCanvasWidth, "canvas width");
  s.Add(app, "canvas_height", Kind::kDouble, defaults::kCanvasHeight, "canvas height");
  s.Add(app, "seed", Kind::kInt, 0, "random seed");
  s.Add(app, "out", Kind::kString, "polygons", "output directory");
}

int GenPolygons(Context& ctx) {
  const Settings& s = ctx.settings;
  const long long count = s.Int("count"), clicks = s.Int("clicks_per_polygon");
  if (count < 1) throw ConfigError("count: must be >= 1");
  if (clicks < 1) throw ConfigError("clicks_per_polygon: must be >= 1");
  const std::vector<double> law = DoubleList(s.Get("law"));
  if (law.empty()) throw ConfigError("law: needs at least one coefficient");
  std::vector<PolygonClick> corpus;
  try {
    corpus = SimulatePolygonCorpus(static_cast<int>(count), static_cast<int>(clicks), law,
                                   Seed(ctx, ""), s.Double("canvas_width"),
                                   s.Double("canvas_height"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("canvas: ") + e.what());
  }
  const fs::path out = s.String("out");
  fs::create_directories(out);
  SavePolygonClicks(corpus, out / "polygon_clicks.jsonl");
  WriteRunJson(ctx, out);
  *ctx.out << "wrote " << corpus.size() << " clicks on " << count << " polygons to "
           << (out / "polygon_clicks.jsonl").string() << "\n";
  return kExitOk;
}

void SetupFitErrorModel(CLI::App* app, Settings& s) {
  s.Add(app, "polygon_clicks", Kind::kString, nullptr, "polygon click corpus (jsonl)");
  s.Add(app, "mu_degree", Kind::kInt, defaults::kMuDegree, "degree of the area regressor");
  s.Add(app, "fit_d_max", Kind::kBool, false,
        "fit d_max as a high percentile of the errors instead of the fixed value");
  s.Add(app, "d_max_percentile", Kind::kDouble, defaults::kDMaxPercentile,
        "percentile used with --fit-d-max");
  s.Add(app, "out", Kind::kString, nullptr, "output directory (default: next to the corpus)");
}

int FitErrorModelCmd(Context& ctx) {
  const Settings& s = ctx.settings;
  const fs::path in = s.Require("polygon_clicks", "(path to polygon_clicks.jsonl)")
                          .get<std::string>();
  ctx.inputs.push_back(in);
  const std::vector<PolygonClick> corpus = LoadPolygonClicks(in);
  ErrorModelFitOptions opts;
  opts.mu_degree = static_cast<int>(s.Int("mu_degree"));
  if (opts.mu_degree < 1) throw ConfigError("mu_degree: must be >= 1");
  opts.fit_d_max = s.Bool("fit_d_max");
  opts.d_max_percentile = s.Double("d_max_percentile");
  if (!(opts.d_max_percentile > 0.0 && opts.d_max_percentile <= 100.0)) {
    throw ConfigError("d_max_percentile: must be in (0, 100]");
  }
  const ErrorModel model = FitErrorModel(corpus, opts);
  const fs::path out = s.Has("out") ? fs::path(s.String("out")) : in.parent_path();
  fs::create_directories(out.empty() ? "." : out);
  SaveErrorModel(model, out / "error_model.json");
  WriteRunJson(ctx, out.empty() ? "." : out);
  char line[256];
  std::snprintf(line, sizeof(line),
                "sigma_bc %.3f px  d_max %.1f px  sigma_ba %.4f  mu range [%.1f, %.1f] px\n",
                model.sigma_bc, model.d_max, model.sigma_ba, model.mu_lo, model.mu_hi);
  *ctx.out << line << "wrote " << (out / "error_model.json").string() << "\n";
  return kExitOk;
}

void SetupGenSynthetic(CLI::App* app, Settings& s) {
  const SyntheticConfig d;
  s.Add(app, "name", Kind::kString, "synthetic", "dataset name");
  s.Add(app, "images", Kind::kInt, d.images, "trainval images");
  s.Add(app, "test_images", Kind::kInt, d.test_images, "test images");
  s.Add(app, "classes", Kind::kStrings, d.classes, "class names (comma separated)");
  s.Add(app, "positive_fraction", Kind::kDouble, d.positive_fraction,
        "fraction of images holding a class object");
  s.Add(app, "proposals", Kind::kInt, d.proposals_per_image, "proposals per image");
  s.Add(app, "feature_dim", Kind::kInt, d.feature_dim, "feature dimension");
  s.Add(app, "feature_noise", Kind::kDouble, d.feature_noise, "feature noise stddev");
  s.Add(app, "iou_floor", Kind::kDouble, d.iou_floor, "IoU of the best proposal to the GT");
  s.Add(app, "rho", Kind::kDouble, d.rho, "similarity of distractors to the classes");
  s.Add(app, "objectness_noise", Kind::kDouble, d.objectness_noise, "objectness noise stddev");
  s.Add(app, "distractors", Kind::kInt, d.distractors_per_image, "distractors per image");
  s.Add(app, "seed", Kind::kInt, 0, "random seed");
  s.Add(app, "out", Kind::kString, "data", "dataset directory");
}

int GenSynthetic(Context& ctx) {
  const Settings& s = ctx.settings;
  SyntheticConfig c;
  c.images = static_cast<int>(s.Int("images"));
  c.test_images = static_cast<int>(s.Int("test_images"));
  c.classes = s.Get("classes").get<std::vector<std::string>>();
  c.positive_fraction = s.Double("positive_fraction");
  c.proposals_per_image = static_cast<int>(s.Int("proposals"));
  c.feature_dim = static_cast<int>(s.Int("feature_dim"));
  c.feature_noise = s.Double("feature_noise");
  c.iou_floor = s.Double("iou_floor");
  c.rho = s.Double("rho");
  c.objectness_noise = s.Double("objectness_noise");
  c.distractors_per_image = static_cast<int>(s.Int("distractors"));
  c.seed = Seed(ctx, "");
  try {
    c.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const SyntheticWorld world(c);
  const Dataset ds = DatasetFromWorld(world, s.String("name"));
  const fs::path out = s.String("out");
  SaveDataset(ds, out);
  WriteRunJson(ctx, out);
  *ctx.out << "wrote " << ds.manifest.images.size() << " images (" << ds.gt.size()
           << " objects) to " << out.string() << "\n";
  return kExitOk;
}

void SetupSimulateClicks(CLI::App* app, Settings& s) {
  s.Add(app, "dataset", Kind::kString, nullptr, "dataset directory");
  s.Add(app, "clicks", Kind::kInt, 2, "clicks per object (1 or 2)");
  s.Add(app, "error_model", Kind::kString, nullptr,
        "error_model.json (default: model fitted on the built-in replica corpus)");
  s.Add(app, "seed", Kind::kInt, nullptr, "random seed (required)");
  s.Add(app, "out", Kind::kString, nullptr, "output directory (default: the dataset)");
}

int SimulateClicks(Context& ctx) {
  const Settings& s = ctx.settings;
  const std::uint64_t seed = Seed(ctx, "for simulate-clicks");
  const long long k = s.Int("clicks");
  if (k != 1 && k != 2) throw ConfigError("clicks: must be 1 or 2");
  const Dataset ds = LoadDatasetInput(ctx);
  const ErrorModel model = LoadModelOrReplica(ctx);
  const std::vector<ClickLogEntry> clicks =
      SimulateDatasetClicks(ds, static_cast<int>(k), model, seed);
  const fs::path out = s.Has("out") ? fs::path(s.String("out")) : fs::path(s.String("dataset"));
  fs::create_directories(out);
  const fs::path file = out / ds.manifest.clicks_file;
  SaveClickLog(clicks, file);
  WriteRunJson(ctx, out);
  *ctx.out << "wrote " << clicks.size() << " clicks to " << file.string() << "\n";
  return kExitOk;
}

void SetupTrain(CLI::App* app, Settings& s) {
  const MilConfig d;
  s.Add(app, "dataset", Kind::kString, nullptr, "dataset directory");
  s.Add(app, "clicks", Kind::kString, nullptr, "click log (default: the dataset's)");
  s.Add(app, "supervision", Kind::kString, "none", "none | one-click | two-click");
  s.Add(app, "error_model", Kind::kString, nullptr,
        "error_model.json (default: model fitted on the built-in replica corpus)");
  s.Add(app, "folds", Kind::kInt, d.folds, "folds");
  s.Add(app, "iterations", Kind::kInt, d.iterations, "relocalization iterations");
  s.Add(app, "deep_iterations", Kind::kInt, d.deep_surrogate_iterations,
        "extra refinement iterations");
  s.Add(app, "lambda", Kind::kDouble, d.lambda, "SVM regularization");
  s.Add(app, "balance_classes", Kind::kBool, d.balance_classes,
        "weigh positive and negative SVM losses equally (--balance-classes=false to disable)");
  s.Add(app, "negative_cap", Kind::kInt, d.negative_cap, "negatives per negative image");
  s.Add(app, "threads", Kind::kInt, 0, "worker threads (0: all cores)");
  s.Add(app, "seed", Kind::kInt, nullptr, "random seed (required)");
  s.Add(app, "out", Kind::kString, nullptr, "output directory (default: runs/<supervision>)");
}

int Train(Context& ctx) {
  const Settings& s = ctx.settings;
  MilConfig cfg;
  cfg.seed = Seed(ctx, "for train");
  try {
    cfg.supervision = ParseSupervision(s.String("supervision"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("supervision: ") + e.what());
  }
  cfg.folds = static_cast<int>(s.Int("folds"));
  cfg.iterations = static_cast<int>(s.Int("iterations"));
  cfg.deep_surrogate_iterations = static_cast<int>(s.Int("deep_iterations"));
  cfg.lambda = s.Double("lambda");
  cfg.balance_classes = s.Bool("balance_classes");
  cfg.negative_cap = static_cast<int>(s.Int("negative_cap"));
  cfg.threads = Threads(ctx);
  Dataset ds = LoadDatasetInput(ctx);
  const fs::path clicks = s.Has("clicks")
                              ? fs::path(s.String("clicks"))
                              : fs::path(s.String("dataset")) / ds.manifest.clicks_file;
  if (s.Has("clicks")) ds.clicks = ReadClickLog(clicks);
  ctx.inputs.push_back(clicks);
  cfg.error_model = LoadModelOrReplica(ctx);

  TrainResult result;
  try {
    result = TrainDataset(ds, cfg);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  const fs::path out = s.Has("out") ? fs::path(s.String("out"))
                                    : fs::path("runs") / SupervisionName(cfg.supervision);
  fs::create_directories(out);
  SaveSelections(result.selections, out / "selections.jsonl");
  SaveModels(result.models, out / "model.json");
  std::string iters =
      json{{"schema_version", kSchemaVersion}, {"kind", "iterations"}}.dump() + "\n";
  for (const ClassRun& run : result.classes) {
    for (std::size_t i = 0; i < run.result.corloc_trace.size(); ++i) {
      const bool deep = static_cast<int>(i) >= cfg.iterations;
      iters += json{{"class", run.class_name},
                    {"iteration", i + 1},
                    {"phase", deep ? "deep_surrogate" : "mil"},
                    {"corloc", run.result.corloc_trace[i]}}
                   .dump() +
               "\n";
    }
    for (const std::string& id : run.result.skipped) {
      *ctx.err << "warning: " << run.class_name << " image " << id
               << " has no proposals and was skipped\n";
    }
  }
  WriteFileAtomic(out / "iterations.jsonl", iters);
  WriteRunJson(ctx, out);
  for (const ClassRun& run : result.classes) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %zu selections  training corloc %.4f\n",
                  run.class_name.c_str(), run.result.selections.size(),
                  run.result.corloc_trace.empty() ? 0.0 : run.result.corloc_trace.back());
    *ctx.out << line;
  }
  *ctx.out << "wrote " << out.string() << "\n";
  return kExitOk;
}

void SetupEvaluate(CLI::App* app, Settings& s) {
  s.Add(app, "dataset", Kind::kString, nullptr, "dataset directory");
  s.Add(app, "run", Kind::kString, nullptr, "train output directory");
  s.Add(app, "supervision", Kind::kString, nullptr,
        "supervision for the time model (default: from the run)");
  s.Add(app, "out", Kind::kString, nullptr, "output directory (default: <run>/eval)");
}

int Evaluate(Context& ctx) {
  const Settings& s = ctx.settings;
  const Dataset ds = LoadDatasetInput(ctx);
  const fs::path run = s.Require("run", "(train output directory)").get<std::string>();
  for (const char* f : {"selections.jsonl", "model.json", "run.json"}) ctx.inputs.push_back(run / f);
  std::string sup_name;
  if (s.Has("supervision")) {
    sup_name = s.String("supervision");
  } else {
    const json r = json::parse(ReadText(run / "run.json"));
    sup_name = r.at("config").at("supervision").get<std::string>();
  }
  Supervision sup;
  try {
    sup = ParseSupervision(sup_name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("supervision: ") + e.what());
  }
  const MetricReport report = EvaluateRun(ds, LoadSelections(run / "selections.jsonl"),
                                          LoadModels(run / "model.json"), sup);
  const fs::path out = s.Has("out") ? fs::path(s.String("out")) : run / "eval";
  fs::create_directories(out);
  SaveMetrics(report, out / "metrics.json");
  WriteRunJson(ctx, out);
  char line[200];
  std::snprintf(line, sizeof(line), "%s: CorLoc %.4f  mAP %.4f  annotation time %.3f h\n",
                report.supervision.c_str(), report.corloc, report.map,
                report.annotation_time_hours);
  *ctx.out << line << "wrote " << (out / "metrics.json").string() << "\n";
  return kExitOk;
}

std::atomic<bool> g_stop{false};
extern "C" void OnSignal(int) { g_stop = true; }

void SetupServe(CLI::App* app, Settings& s) {
  s.Add(app, "dataset", Kind::kString, nullptr, "dataset directory");
  s.Add(app, "click_log", Kind::kString, nullptr, "click log (default: the dataset's)");
  s.Add(app, "host", Kind::kString, "127.0.0.1", "bind address");
  s.Add(app, "port", Kind::kInt, 8080, "port (0: any free port)");
  s.Add(app, "seed", Kind::kInt, 0, "seed for polygons and ids");
  s.Add(app, "out", Kind::kString, nullptr, "run.json directory (default: the dataset)");
}

int Serve(Context& ctx) {
  const Settings& s = ctx.settings;
  const Dataset ds = LoadDatasetInput(ctx);
  const fs::path dataset_dir = s.String("dataset");
  const fs::path log = s.Has("click_log") ? fs::path(s.String("click_log"))
                                          : dataset_dir / ds.manifest.clicks_file;
  ServiceConfig cfg;
  cfg.seed = Seed(ctx, "");
  const long long port = s.Int("port");
  if (port < 0 || port > 65535) throw ConfigError("port: must be in [0, 65535]");
  AnnotationService service(ds, log, cfg);
  HttpServer server(service);
  WriteRunJson(ctx, s.Has("out") ? fs::path(s.String("out")) : dataset_dir);
  const int bound = server.Start(s.String("host"), static_cast<int>(port));
  *ctx.out << "serving on http://" << s.String("host") << ":" << bound
           << "  click log " << log.string() << std::endl;
  std::signal(SIGINT, OnSignal);
  std::signal(SIGTERM, OnSignal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.Stop();
  *ctx.out << "stopped\n";
  return kExitOk;
}

void SetupReport(CLI::App* app, Settings& s, std::vector<std::string>& files) {
  app->add_option("metrics", files, "metrics.json files")->required();
  s.Add(app, "out", Kind::kString, "report", "output directory");
}

std::string RenderReport(std::vector<std::pair<std::string, MetricReport>> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second.annotation_time_hours < b.second.annotation_time_hours;
  });
  long long pairs = 0;
  for (const auto& r : rows) pairs = std::max(pairs, r.second.positive_pairs);
  double max_h = 0.0;
  for (const auto& r : rows) max_h = std::max(max_h, r.second.annotation_time_hours);
  const double box_h = AnnotationTimeHours(pairs, AnnotationMode::kDrawnBoxes);
  max_h = std::max(max_h, box_h);
  constexpr int kWidth = 30;
  const auto bar = [&](double h) {
    const int n = max_h > 0 ? static_cast<int>(std::lround(kWidth * h / max_h)) : 0;
    return "|" + std::string(n, '#') + std::string(kWidth - n, ' ') + "|";
  };
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %10s  %-32s %8s %8s  %s\n", "supervision",
                "time (h)", "annotation time", "CorLoc", "mAP", "source");
  os << line;
  for (const auto& [file, m] : rows) {
    std::snprintf(line, sizeof(line), "%-12s %10.3f  %-32s %8.4f %8.4f  %s\n",
                  m.supervision.c_str(), m.annotation_time_hours,
                  bar(m.annotation_time_hours).c_str(), m.corloc, m.map, file.c_str());
    os << line;
  }
  if (pairs > 0) {
    std::snprintf(line, sizeof(line), "%-12s %10.3f  %-32s %8s %8s  %lld pairs at %.1f s\n",
                  "drawn boxes", box_h, bar(box_h).c_str(), "-", "-", pairs,
                  defaults::kSecondsPerBox);
    os << line;
  }
  return os.str();
}

int Report(Context& ctx, const std::vector<std::string>& files) {
  std::vector<std::pair<std::string, MetricReport>> rows;
  for (const std::string& f : files) {
    ctx.inputs.push_back(f);
    rows.emplace_back(f, LoadMetrics(f));
  }
  const std::string table = RenderReport(rows);
  const fs::path out = ctx.settings.String("out");
  fs::create_directories(out);
  WriteFileAtomic(out / "report.txt", table);
  WriteRunJson(ctx, out);
  *ctx.out << table;
  return kExitOk;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Click-supervised weakly supervised object localization", "clickmil"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override it")
      ->check(CLI::ExistingFile);

  struct Command {
    CLI::App* app;
    std::unique_ptr<Context> ctx;
    std::function<int(Context&)> run;
  };
  std::vector<Command> commands;
  std::vector<std::string> report_files;
  const auto add = [&](const char* name, const char* help,
                       const std::function<void(CLI::App*, Settings&)>& setup,
                       std::function<int(Context&)> run) {
    Command c{app.add_subcommand(name, help), std::make_unique<Context>(), std::move(run)};
    c.ctx->name = name;
    c.ctx->out = &out;
    c.ctx->err = &err;
    setup(c.app, c.ctx->settings);
    commands.push_back(std::move(c));
  };
  add("gen-polygons", "Generate qualification polygons with simulated clicks",
      SetupGenPolygons, GenPolygons);
  add("fit-error-model", "Fit the annotator error model from polygon clicks",
      SetupFitErrorModel, FitErrorModelCmd);
  add("gen-synthetic", "Generate a seeded synthetic dataset", SetupGenSynthetic, GenSynthetic);
  add("simulate-clicks", "Simulate center clicks on a dataset", SetupSimulateClicks,
      SimulateClicks);
  add("train", "Run multi-fold MIL with optional click supervision", SetupTrain, Train);
  add("evaluate", "Compute CorLoc, mAP and annotation time", SetupEvaluate, Evaluate);
  add("serve", "Start the annotation service", SetupServe, Serve);
  add("report", "Tabulate metrics against annotation time",
      [&](CLI::App* a, Settings& s) { SetupReport(a, s, report_files); },
      [&](Context& c) { return Report(c, report_files); });

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    CLI::App* failed = &app;
    for (CLI::App* sub : app.get_subcommands()) failed = sub;
    err << failed->help();
    return kExitUsage;
  }

  for (Command& c : commands) {
    if (!c.app->parsed()) continue;
    try {
      c.ctx->settings.Resolve(ConfigSection(config_path, c.ctx->name, c.ctx->settings),
                              config_path);
      err << "clickmil " << kVersion << " " << c.ctx->name << "\n";
      c.ctx->settings.Print(err);
      return c.run(*c.ctx);
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << "\n";
    } catch (const DataError& e) {
      err << "data error: " << e.what() << "\n";
    } catch (const std::invalid_argument& e) {
      err << "invalid input: " << e.what() << "\n";
    } catch (const json::exception& e) {
      err << "data error: " << e.what() << "\n";
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
    }
    return kExitDataError;
  }
  return kExitUsage;
}

}  // namespace clickmil::cli
