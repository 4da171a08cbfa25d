#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "owr/error.hpp"
#include "owr/protocol.hpp"

namespace owr::protocol {
namespace {

namespace fs = std::filesystem;

TEST(Metrics, Top1) {
  const std::vector<Label> truth{1, 2, 3, 0};
  EXPECT_DOUBLE_EQ(top1_accuracy(truth, truth), 1.0);
  EXPECT_DOUBLE_EQ(top1_accuracy(std::vector<Label>{0, 0, 0}, std::vector<Label>{1, 2, 3}), 0.0);
  EXPECT_DOUBLE_EQ(top1_accuracy(std::vector<Label>{1, 2, 3, 4}, truth), 0.75);
  EXPECT_THROW(top1_accuracy(std::vector<Label>{1}, truth), Error);
  EXPECT_THROW(top1_accuracy(std::vector<Label>{}, std::vector<Label>{}), Error);
}

TEST(Metrics, MulticlassError) {
  const std::vector<Label> truth{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(multiclass_error(truth, truth), 0.0);
  EXPECT_DOUBLE_EQ(multiclass_error(std::vector<Label>{2, 3, 4, 1}, truth), 1.0);
  EXPECT_DOUBLE_EQ(multiclass_error(std::vector<Label>{1, 2, 3, 0}, truth), 0.25);
  EXPECT_THROW(multiclass_error(truth, std::vector<Label>{1, 2, 0, 4}), Error);
}

TEST(Metrics, OpenWorldError) {
  const std::vector<Label> truth{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(open_world_error(std::vector<Label>{1, 2, 3, 5}, truth, std::vector<Label>{0, 2}), 0.75);
  EXPECT_DOUBLE_EQ(open_world_error(truth, truth, std::vector<Label>{0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(open_world_error(std::vector<Label>{1, 1, 3, 4}, truth, std::vector<Label>{}),
                   multiclass_error(std::vector<Label>{1, 1, 3, 4}, truth));
}

TEST(Metrics, OpenWorldErrorDominatesKnownError) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<Label> label(0, 4);
  for (int t = 0; t < 50; ++t) {
    std::vector<Label> truth(1 + rng() % 20), pred(truth.size()), unk(rng() % 20);
    for (auto& v : truth) v = 1 + label(rng) % 4;
    for (auto& v : pred) v = label(rng);
    for (auto& v : unk) v = label(rng);
    const double ow = open_world_error(pred, truth, unk);
    EXPECT_GE(ow, multiclass_error(pred, truth));
    EXPECT_LE(ow, 2.0);
  }
}

ProtocolConfig small_config(std::uint64_t seed) {
  ProtocolConfig cfg;
  cfg.initial_known = 3;
  cfg.increment_size = 2;
  cfg.stage_count = 2;
  cfg.unknown_count = 3;
  cfg.seed = seed;
  cfg.m = 4;
  cfg.sgd.iterations = 1500;
  cfg.sgd.batch_size = 32;
  cfg.tau_grid_size = 20;
  return cfg;
}

LabeledDataset small_data() { return data::gen_synthetic({12, 6, 30, 40.0, 1.0, 21}); }

const EvalReport& small_report() {
  static const EvalReport report = run_open_world_protocol(small_data(), small_config(4));
  return report;
}

TEST(RunProtocol, StageBookkeeping) {
  const auto& report = small_report();
  ASSERT_EQ(report.stages.size(), 3u);
  EXPECT_EQ(report.stages[0].known_classes, 3u);
  EXPECT_EQ(report.stages[1].known_classes, 5u);
  EXPECT_EQ(report.stages[2].known_classes, 7u);
  EXPECT_EQ(report.initial_classes.size(), 3u);
  EXPECT_EQ(report.incremental_classes.size(), 4u);
  EXPECT_EQ(report.unknown_classes.size(), 3u);
  EXPECT_GT(report.tau, 0.0);
  EXPECT_GE(report.theta, 0.1);
  EXPECT_LE(report.theta, 0.99);
  for (const auto& s : report.stages) {
    for (double v : {s.cs_ncm_top1, s.os_ncm_top1, s.cs_nno_top1, s.os_nno_top1, s.os_ncm_sth_top1, s.eps_k}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_GE(s.eps_ow, s.eps_k);
    EXPECT_LE(s.eps_ow, 2.0);
    // NCM never rejects, so every unknown test row is wrong for it
    EXPECT_LT(s.os_ncm_top1, s.cs_ncm_top1 + 1e-12);
    EXPECT_GE(s.os_nno_top1, s.os_ncm_top1);
  }
}

TEST(RunProtocol, ClassSetsAreDisjoint) {
  const auto& report = small_report();
  std::vector<Label> all = report.initial_classes;
  all.insert(all.end(), report.incremental_classes.begin(), report.incremental_classes.end());
  all.insert(all.end(), report.unknown_classes.begin(), report.unknown_classes.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
}

TEST(RunProtocol, TestRowsNeverTouchedByTraining) {
  const auto& rows = small_report().rows;
  ASSERT_FALSE(rows.test_rows.empty());
  auto sorted = [](std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto test = sorted(rows.test_rows);
  for (const auto* other : {&rows.train_rows, &rows.threshold_rows}) {
    const auto s = sorted(*other);
    std::vector<std::size_t> common;
    std::set_intersection(test.begin(), test.end(), s.begin(), s.end(), std::back_inserter(common));
    EXPECT_TRUE(common.empty());
  }
}

TEST(RunProtocol, Deterministic) {
  const auto again = run_open_world_protocol(small_data(), small_config(4));
  const auto& report = small_report();
  ASSERT_EQ(again.stages.size(), report.stages.size());
  for (std::size_t i = 0; i < again.stages.size(); ++i) EXPECT_TRUE(again.stages[i].same_metrics(report.stages[i]));
  EXPECT_EQ(again.tau, report.tau);
  EXPECT_EQ(again.rows.test_rows, report.rows.test_rows);
}

TEST(RunProtocol, NoUnknownsMakesOpenEqualClosed) {
  auto cfg = small_config(5);
  cfg.unknown_count = 0;
  const auto report = run_open_world_protocol(small_data(), cfg);
  for (const auto& s : report.stages) {
    EXPECT_EQ(s.os_ncm_top1, s.cs_ncm_top1);
    EXPECT_EQ(s.os_nno_top1, s.cs_nno_top1);
    EXPECT_EQ(s.eps_ow, s.eps_k);
  }
}

TEST(RunProtocol, BudgetAndConfigErrors) {
  auto cfg = small_config(1);
  cfg.unknown_count = 6;
  try {
    run_open_world_protocol(small_data(), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("class budget"), std::string::npos);
  }
  cfg = small_config(1);
  cfg.m = 7;
  EXPECT_THROW(run_open_world_protocol(small_data(), cfg), Error);
  cfg = small_config(1);
  cfg.initial_known = 1;
  EXPECT_THROW(run_open_world_protocol(small_data(), cfg), Error);
  cfg = small_config(1);
  cfg.test_fraction = 1.0;
  EXPECT_THROW(run_open_world_protocol(small_data(), cfg), Error);
}

class ReportFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("owr_report_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(ReportFiles, RoundTrip) {
  const auto& report = small_report();
  emit_report(report, dir_);
  const auto parsed = read_stages_csv(dir_ / "stages.csv");
  ASSERT_EQ(parsed.size(), report.stages.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) EXPECT_TRUE(parsed[i].same_metrics(report.stages[i]));
  std::ifstream csv(dir_ / "stages.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, kStagesHeader);
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 3u);
  EXPECT_TRUE(fs::exists(dir_ / "config.txt"));
}

TEST_F(ReportFiles, RejectsBadReports) {
  EvalReport empty = small_report();
  empty.stages.clear();
  EXPECT_THROW(emit_report(empty, dir_), Error);
  EvalReport short_report = small_report();
  short_report.stages.pop_back();
  EXPECT_THROW(emit_report(short_report, dir_), Error);
}

TEST_F(ReportFiles, MalformedCsv) {
  fs::create_directories(dir_);
  {
    std::ofstream out(dir_ / "stages.csv");
    out << "known,x\n1,2\n";
  }
  EXPECT_THROW(read_stages_csv(dir_ / "stages.csv"), FormatError);
  {
    std::ofstream out(dir_ / "stages.csv");
    out << kStagesHeader << "\n5,1,1,1,1,1,0,zero\n";
  }
  EXPECT_THROW(read_stages_csv(dir_ / "stages.csv"), FormatError);
}

}  // namespace
}  // namespace owr::protocol
