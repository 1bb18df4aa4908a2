// Copyright 2026 The ReKD Lab Authors.
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

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "rekd/checkpoint.hpp"
#include "rekd/experiment.hpp"

namespace rekd {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rekd_experiment_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    nlohmann::json cfg = {{"seed", 2},
                          {"epochs", 3},
                          {"warmup_epochs", 1},
                          {"batch_size", 16},
                          {"embed_dim", 8},
                          {"teacher_dims", {16}},
                          {"student_dims", {8}},
                          {"queue_capacity", 64},
                          {"num_prototypes", 4},
                          {"theta", 0.5},
                          {"probe_epochs", 3},
                          {"mixture", {{"num_classes", 4}, {"dim", 8}, {"samples_per_class", 20}}}};
    cfg_path_ = (dir_ / "cfg.json").string();
    std::ofstream(cfg_path_) << cfg.dump();
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(Mode mode, const ExperimentOptions& opts = {}) {
    return run_experiment(cfg_path_, (dir_ / "out").string(), mode, opts, log_, err_);
  }

  fs::path dir_;
  std::string cfg_path_;
  std::ostringstream log_, err_;
};

TEST_F(ExperimentTest, MissingConfigExitsTwoAndNamesPath) {
  const std::string missing = (dir_ / "nope.json").string();
  EXPECT_EQ(run_experiment(missing, (dir_ / "out").string(), Mode::kNce, {}, log_, err_), 2);
  EXPECT_NE(err_.str().find(missing), std::string::npos);
}

TEST_F(ExperimentTest, InvalidConfigExitsTwo) {
  std::ofstream(cfg_path_) << R"({"epochs": 3, "bogus": 1})";
  EXPECT_EQ(run(Mode::kNce), 2);
  EXPECT_NE(err_.str().find("bogus"), std::string::npos);
  std::ofstream(cfg_path_) << "{not json";
  EXPECT_EQ(run(Mode::kNce), 2);
}

TEST_F(ExperimentTest, RekdWritesOneRecordPerEpoch) {
  ASSERT_EQ(run(Mode::kRekd), 0) << err_.str();
  const std::string csv = read_file(dir_ / "out" / "records.csv");
  EXPECT_EQ(csv.rfind(std::string(kRecordsHeader) + "\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  const auto mats = load_checkpoint((dir_ / "out" / "model.ckpt").string());
  EXPECT_NO_THROW(extract_encoder(mats, "student"));
  EXPECT_NO_THROW(extract_encoder(mats, "teacher"));
  EXPECT_TRUE(fs::exists(dir_ / "out" / "similarity_teacher.csv"));
  const TrainConfig resolved = load_config((dir_ / "out" / "config.resolved.json").string());
  EXPECT_EQ(resolved, load_config(cfg_path_));
}

TEST_F(ExperimentTest, SeedOverrideAndDeterministicRecords) {
  ExperimentOptions o;
  o.seed = 11;
  ASSERT_EQ(run(Mode::kNce, o), 0);
  const std::string first = read_file(dir_ / "out" / "records.csv");
  ASSERT_EQ(run(Mode::kNce, o), 0);
  EXPECT_EQ(read_file(dir_ / "out" / "records.csv"), first);
  EXPECT_EQ(load_config((dir_ / "out" / "config.resolved.json").string()).seed, 11u);
}

TEST_F(ExperimentTest, SupmocoRecordsPurity) {
  ExperimentOptions o;
  o.purity = 0.5;
  o.tpn_cap = 2;
  ASSERT_EQ(run(Mode::kSupmoco, o), 0) << err_.str();
  EXPECT_TRUE(fs::exists(dir_ / "out" / "model.ckpt"));
}

TEST_F(ExperimentTest, BoundsReportAllPremiseCasesHold) {
  ASSERT_EQ(run(Mode::kBounds), 0);
  const auto rep = nlohmann::json::parse(read_file(dir_ / "out" / "bounds_report.json"));
  EXPECT_EQ(rep["instances"], 1000);
  EXPECT_GT(rep["premise_cases"].get<int>(), 0);
  EXPECT_EQ(rep["premise_inequality_holds"], rep["premise_cases"]);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "bounds_instances.csv"));
}

TEST_F(ExperimentTest, KmeansDemoWritesReport) {
  ASSERT_EQ(run(Mode::kKmeansDemo), 0);
  const auto rep = nlohmann::json::parse(read_file(dir_ / "out" / "kmeans_report.json"));
  EXPECT_GE(rep["ari"].get<double>(), 0.9);
  EXPECT_EQ(load_checkpoint((dir_ / "out" / "model.ckpt").string()).at(0).name, "protobank");
}

TEST(ParseMode, KnownAndUnknown) {
  EXPECT_EQ(parse_mode("rekd"), Mode::kRekd);
  EXPECT_EQ(parse_mode("kmeans-demo"), Mode::kKmeansDemo);
  EXPECT_FALSE(parse_mode("moco").has_value());
}

TEST(RecordsCsv, FixedColumnsAndUndefinedMarker) {
  std::ostringstream os;
  EpochRecord r;
  r.epoch = 7;
  r.loss_student = 0.5;
  write_records_csv(os, {r});
  EXPECT_EQ(os.str(), std::string(kRecordsHeader) + "\n7,-1,0.5,-1,-1,-1,-1,-1,-1,-1,-1,-1\n");
}

}  // namespace
}  // namespace rekd
