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

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>

#include "clickmil/pipeline.h"

namespace clickmil {
namespace {

namespace fs = std::filesystem;

class DatastoreTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("clickmil_datastore_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  static Dataset SmallDataset(std::uint64_t seed = 3) {
    SyntheticConfig config;
    config.images = 12;
    config.test_images = 4;
    config.classes = {"cat", "dog"};
    config.proposals_per_image = 8;
    config.feature_dim = 6;
    config.seed = seed;
    Dataset ds = DatasetFromWorld(SyntheticWorld(config), "small");
    ds.clicks = SimulateDatasetClicks(ds, 2, ReplicaErrorModel(0), seed);
    return ds;
  }

  static std::string Slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static void Spit(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
  }

  fs::path dir_;
};

TEST_F(DatastoreTest, DatasetRoundTrip) {
  const Dataset ds = SmallDataset();
  SaveDataset(ds, dir_ / "a");
  const Dataset back = LoadDataset(dir_ / "a");
  EXPECT_EQ(back.manifest.name, "small");
  EXPECT_EQ(back.manifest.classes, ds.manifest.classes);
  ASSERT_EQ(back.manifest.images.size(), ds.manifest.images.size());
  EXPECT_EQ(back.manifest.images[0].labels, ds.manifest.images[0].labels);
  ASSERT_TRUE(back.manifest.synthetic.has_value());
  EXPECT_EQ(back.manifest.synthetic->seed, 3u);
  ASSERT_EQ(back.proposals.size(), ds.proposals.size());
  for (const auto& [id, props] : ds.proposals) {
    const auto& other = back.proposals.at(id);
    ASSERT_EQ(other.size(), props.size());
    for (std::size_t i = 0; i < props.size(); ++i) {
      EXPECT_EQ(other[i].box, props[i].box);
      EXPECT_DOUBLE_EQ(other[i].objectness, props[i].objectness);
      ASSERT_EQ(other[i].feature.size(), props[i].feature.size());
      for (std::size_t k = 0; k < props[i].feature.size(); ++k) {
        EXPECT_DOUBLE_EQ(other[i].feature[k], props[i].feature[k]);
      }
    }
  }
  ASSERT_EQ(back.gt.size(), ds.gt.size());
  ASSERT_EQ(back.clicks.size(), ds.clicks.size());
  for (std::size_t i = 0; i < ds.clicks.size(); ++i) {
    EXPECT_EQ(back.clicks[i].record_id, ds.clicks[i].record_id);
    EXPECT_EQ(back.clicks[i].annotator_id, ds.clicks[i].annotator_id);
    EXPECT_DOUBLE_EQ(back.clicks[i].x, ds.clicks[i].x);
    EXPECT_DOUBLE_EQ(back.clicks[i].y, ds.clicks[i].y);
  }
  // Saving what was loaded reproduces the files byte for byte.
  SaveDataset(back, dir_ / "b");
  for (const char* f : {"manifest.json", "proposals.jsonl", "gt.jsonl", "clicks.jsonl"}) {
    EXPECT_EQ(Slurp(dir_ / "a" / f), Slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(DatastoreTest, SameSeedGivesIdenticalFiles) {
  SaveDataset(SmallDataset(5), dir_ / "a");
  SaveDataset(SmallDataset(5), dir_ / "b");
  SaveDataset(SmallDataset(6), dir_ / "c");
  EXPECT_EQ(Slurp(dir_ / "a" / "proposals.jsonl"), Slurp(dir_ / "b" / "proposals.jsonl"));
  EXPECT_EQ(Slurp(dir_ / "a" / "clicks.jsonl"), Slurp(dir_ / "b" / "clicks.jsonl"));
  EXPECT_NE(Slurp(dir_ / "a" / "proposals.jsonl"), Slurp(dir_ / "c" / "proposals.jsonl"));
}

TEST_F(DatastoreTest, MalformedLineNamesFileAndLine) {
  SaveDataset(SmallDataset(), dir_);
  const fs::path gt = dir_ / "gt.jsonl";
  std::string content = Slurp(gt);
  const std::size_t second = content.find('\n', content.find('\n') + 1);
  content.insert(second + 1, "{not json\n");
  Spit(gt, content);
  try {
    LoadDataset(dir_);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("gt.jsonl:3:"), std::string::npos) << e.what();
  }
}

TEST_F(DatastoreTest, MissingFileIsNamed) {
  try {
    LoadDataset(dir_ / "nowhere");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("manifest.json"), std::string::npos);
  }
  EXPECT_THROW(LoadMetrics(dir_ / "metrics.json"), DataError);
  EXPECT_THROW(LoadSelections(dir_ / "selections.jsonl"), DataError);
}

TEST_F(DatastoreTest, WrongSchemaVersionRejected) {
  Spit(dir_ / "s.jsonl", "{\"schema_version\":99,\"kind\":\"selections\"}\n");
  EXPECT_THROW(LoadSelections(dir_ / "s.jsonl"), DataError);
}

TEST_F(DatastoreTest, ArtifactRoundTrips) {
  std::vector<ClassSelection> sels;
  Selection s;
  s.image_id = "img-1";
  s.proposal_index = 4;
  s.box = Box(1.5, 2.25, 30, 40.125);
  s.score = 0.123456789;
  s.s_ap = 0.5;
  s.s_bc = 0.25;
  s.s_ba = 0.75;
  sels.push_back({"cat", s});
  SaveSelections(sels, dir_ / "sel.jsonl");
  const auto sb = LoadSelections(dir_ / "sel.jsonl");
  ASSERT_EQ(sb.size(), 1u);
  EXPECT_EQ(sb[0].class_name, "cat");
  EXPECT_EQ(sb[0].selection.proposal_index, 4);
  EXPECT_EQ(sb[0].selection.box, s.box);
  EXPECT_DOUBLE_EQ(sb[0].selection.score, s.score);

  MetricReport m;
  m.corloc = 0.5;
  m.corloc_per_class = {{"cat", 0.5}};
  m.per_class_ap = {{"cat", 0.25}};
  m.map = 0.25;
  m.annotation_time_hours = 3.795;
  m.positive_pairs = 7306;
  m.supervision = "one_click";
  SaveMetrics(m, dir_ / "m.json");
  const MetricReport mb = LoadMetrics(dir_ / "m.json");
  EXPECT_DOUBLE_EQ(mb.corloc, 0.5);
  EXPECT_EQ(mb.per_class_ap, m.per_class_ap);
  EXPECT_EQ(mb.positive_pairs, 7306);
  EXPECT_EQ(mb.supervision, "one_click");

  const ErrorModel em = ReplicaErrorModel(0);
  SaveErrorModel(em, dir_ / "em.json");
  const ErrorModel eb = LoadErrorModel(dir_ / "em.json");
  EXPECT_DOUBLE_EQ(eb.sigma_bc, em.sigma_bc);
  EXPECT_DOUBLE_EQ(eb.d_max, em.d_max);
  EXPECT_EQ(eb.mu_coeffs, em.mu_coeffs);
  EXPECT_DOUBLE_EQ(eb.sigma_ba, em.sigma_ba);
  EXPECT_EQ(eb.sim_distance_coeffs, em.sim_distance_coeffs);

  std::map<std::string, AppearanceModel> models{{"cat", {{0.5, -1.25, 3.0}, 0.125}}};
  SaveModels(models, dir_ / "model.json");
  const auto mob = LoadModels(dir_ / "model.json");
  EXPECT_EQ(mob.at("cat").weights, models["cat"].weights);
  EXPECT_DOUBLE_EQ(mob.at("cat").bias, 0.125);

  const auto corpus = SimulatePolygonCorpus(5, 2, DefaultSimDistanceCoeffs(), 11);
  SavePolygonClicks(corpus, dir_ / "poly.jsonl");
  const auto cb = LoadPolygonClicks(dir_ / "poly.jsonl");
  ASSERT_EQ(cb.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(cb[i].polygon_id, corpus[i].polygon_id);
    EXPECT_EQ(cb[i].polygon.vertices().size(), corpus[i].polygon.vertices().size());
    EXPECT_DOUBLE_EQ(cb[i].click.position.x, corpus[i].click.position.x);
  }
}

ClickLogEntry Entry(const std::string& annotator, const std::string& image, double x) {
  ClickLogEntry e;
  e.annotator_id = annotator;
  e.image_id = image;
  e.class_name = "cat";
  e.x = x;
  e.y = 1.0;
  e.time_ms = 1500.0;
  return e;
}

TEST_F(DatastoreTest, ClickLogAssignsIdsAndSequences) {
  ClickLog log(dir_ / "clicks.jsonl");
  log.Append(Entry("a", "i1", 1));
  log.Append({Entry("b", "i1", 2), Entry("a", "i2", 3)});
  const auto all = log.ReadAll();
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].record_id, 1);
  EXPECT_EQ(all[2].record_id, 3);
  EXPECT_EQ(all[0].seq, 1);
  EXPECT_EQ(all[1].seq, 1);
  EXPECT_EQ(all[2].seq, 2);
}

TEST_F(DatastoreTest, ConcurrentThreadAppendsAreNotLost) {
  const fs::path path = dir_ / "clicks.jsonl";
  ClickLog shared(path);
  ClickLog other(path);
  auto writer = [](ClickLog* log, const std::string& who) {
    for (int i = 0; i < 50; ++i) log->Append({Entry(who, "i", i), Entry(who, "j", i)});
  };
  std::thread t1(writer, &shared, "a");
  std::thread t2(writer, &other, "b");
  std::thread t3(writer, &shared, "c");
  t1.join();
  t2.join();
  t3.join();
  const auto all = ReadClickLog(path);
  ASSERT_EQ(all.size(), 300u);
  std::set<std::int64_t> ids;
  for (const auto& e : all) ids.insert(e.record_id);
  EXPECT_EQ(ids.size(), 300u);
  EXPECT_EQ(*ids.rbegin(), 300);
}

TEST_F(DatastoreTest, ConcurrentProcessAppendsAreNotLost) {
  const fs::path path = dir_ / "clicks.jsonl";
  std::vector<pid_t> children;
  for (int p = 0; p < 2; ++p) {
    const pid_t pid = ::fork();
    ASSERT_GE(pid, 0);
    if (pid == 0) {
      ClickLog log(path);
      for (int i = 0; i < 40; ++i) log.Append(Entry("proc" + std::to_string(p), "i", i));
      ::_exit(0);
    }
    children.push_back(pid);
  }
  for (pid_t pid : children) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    EXPECT_TRUE(WIFEXITED(status) && WEXITSTATUS(status) == 0);
  }
  const auto all = ReadClickLog(path);
  ASSERT_EQ(all.size(), 80u);
  std::set<std::int64_t> ids;
  std::map<std::string, std::set<std::int64_t>> seqs;
  for (const auto& e : all) {
    ids.insert(e.record_id);
    seqs[e.annotator_id].insert(e.seq);
  }
  EXPECT_EQ(ids.size(), 80u);
  EXPECT_EQ(seqs["proc0"].size(), 40u);
  EXPECT_EQ(seqs["proc1"].size(), 40u);
}

TEST_F(DatastoreTest, TornTailIsIgnoredAndRepaired) {
  const fs::path path = dir_ / "clicks.jsonl";
  ClickLog log(path);
  log.Append(Entry("a", "i1", 1));
  {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    out << "{\"record_id\":2,\"image_id\":\"i";
  }
  EXPECT_EQ(ReadClickLog(path).size(), 1u);
  log.Append(Entry("a", "i2", 2));
  const auto all = ReadClickLog(path);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[1].record_id, 2);
  EXPECT_EQ(all[1].image_id, "i2");
}

TEST_F(DatastoreTest, BuildBagsUsesDistinctAnnotatorsAndDropsSuperseded) {
  Dataset ds;
  ds.manifest.name = "t";
  ds.manifest.classes = {"cat"};
  ds.manifest.images = {{"p", 100, 100, {"cat"}, "trainval"},
                        {"n", 100, 100, {}, "trainval"},
                        {"t", 100, 100, {"cat"}, "test"}};
  ds.gt = {{"p", "cat", Box(10, 10, 20, 20)}, {"t", "cat", Box(0, 0, 5, 5)}};
  auto add = [&](std::int64_t id, const std::string& who, double x,
                 std::optional<std::int64_t> sup = std::nullopt) {
    ClickLogEntry e = Entry(who, "p", x);
    e.record_id = id;
    e.supersedes = sup;
    ds.clicks.push_back(e);
  };
  add(1, "a", 10);
  add(2, "a", 11);  // same annotator again: ignored
  add(3, "b", 12);
  add(4, "c", 13, 3);  // replaces b's click
  add(5, "d", 500);    // clamped into the image
  const auto bags = BuildBags(ds, "cat");
  ASSERT_EQ(bags.size(), 2u);
  EXPECT_EQ(bags[0].label, BagLabel::kPositive);
  ASSERT_EQ(bags[0].clicks.size(), 2u);
  EXPECT_EQ(bags[0].clicks[0].annotator_id, "a");
  EXPECT_DOUBLE_EQ(bags[0].clicks[0].position.x, 10);
  EXPECT_EQ(bags[0].clicks[1].annotator_id, "c");
  EXPECT_EQ(bags[0].gt_boxes.size(), 1u);
  EXPECT_EQ(bags[1].label, BagLabel::kNegative);
  EXPECT_TRUE(bags[1].clicks.empty());
  EXPECT_EQ(BuildBags(ds, "cat", "test").size(), 1u);
}

}  // namespace
}  // namespace clickmil
