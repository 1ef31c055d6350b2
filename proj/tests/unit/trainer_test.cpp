#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "frn/error.hpp"
#include "frn/trainer.hpp"

namespace frn {
namespace {

TrainConfig small(NormKind kind, ActKind act, std::size_t steps) {
  TrainConfig c;
  c.norm.kind = kind;
  c.norm.group_size = 8;
  c.act = act;
  c.batch_size = 8;
  c.total_steps = steps;
  c.seed = 3;
  return c;
}

std::string csv_of(const TrainResult& r) {
  std::ostringstream os;
  write_metrics_csv(os, r.rows);
  return os.str();
}

TEST(TrainerTest, ResolvedDefaults) {
  TrainConfig c;
  EXPECT_DOUBLE_EQ(resolved_lr(c), 0.1 * 32 / 256);
  EXPECT_EQ(resolved_warmup(c), 100u);
  EXPECT_EQ(resolved_eval_every(c), 200u);
  c.base_lr = 0.3;
  c.warmup_steps = 7;
  c.eval_every = 5;
  EXPECT_EQ(resolved_lr(c), 0.3);
  EXPECT_EQ(resolved_warmup(c), 7u);
  EXPECT_EQ(resolved_eval_every(c), 5u);
}

TEST(TrainerTest, ValidationErrors) {
  TrainConfig c;
  c.warmup_steps = c.total_steps + 1;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.momentum = 1.0;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.norm.kind = NormKind::GN;
  c.norm.group_size = 5;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.base_lr = -1.0;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(TrainerTest, DatasetSpecParsing) {
  EXPECT_TRUE(parse_dataset_spec("synthetic").synthetic());
  const DatasetSpec idx = parse_dataset_spec("idx:/a/img:/b/lbl");
  EXPECT_EQ(idx.images_path, "/a/img");
  EXPECT_EQ(idx.labels_path, "/b/lbl");
  EXPECT_THROW(parse_dataset_spec("mnist"), ConfigError);
  EXPECT_THROW(parse_dataset_spec("idx:only"), ConfigError);
}

TEST(TrainerTest, RowsScheduleAndEvalCadence) {
  TrainConfig c = small(NormKind::FRN, ActKind::TLU, 40);
  c.eval_every = 15;
  const TrainResult r = train(c);
  ASSERT_EQ(r.rows.size(), 40u);
  EXPECT_FALSE(r.diverged);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const MetricsRow& row = r.rows[i];
    EXPECT_EQ(row.step, i);
    EXPECT_TRUE(std::isfinite(row.train_loss));
    EXPECT_GE(row.train_accuracy, 0.0);
    EXPECT_LE(row.train_accuracy, 1.0);
    EXPECT_EQ(row.eval_accuracy.has_value(), i == 14 || i == 29 || i == 39) << i;
  }
  EXPECT_EQ(r.rows[0].lr, 0.0);
  EXPECT_EQ(r.final_eval_accuracy, r.rows.back().eval_accuracy);
}

TEST(TrainerTest, DeterministicInSeed) {
  const TrainConfig c = small(NormKind::FRN, ActKind::TLU, 30);
  const std::string a = csv_of(train(c));
  EXPECT_EQ(a, csv_of(train(c)));
  TrainConfig d = c;
  d.seed = 4;
  EXPECT_NE(a, csv_of(train(d)));
}

TEST(TrainerTest, NoneReluBaselineTrains) {
  TrainConfig c = small(NormKind::NONE, ActKind::RELU, 30);
  c.measure_train_accuracy = true;
  const TrainResult r = train(c);
  EXPECT_FALSE(r.diverged);
  EXPECT_EQ(r.rows.size(), 30u);
  ASSERT_TRUE(r.final_train_accuracy);
  EXPECT_GE(*r.final_train_accuracy, 0.0);
}

TEST(TrainerTest, BatchNormCellCompletes) {
  const TrainResult r = train(small(NormKind::BN, ActKind::RELU, 30));
  EXPECT_FALSE(r.diverged);
  ASSERT_TRUE(r.final_eval_accuracy);
  EXPECT_TRUE(std::isfinite(*r.final_eval_accuracy));
}

TEST(TrainerTest, DivergenceTruncatesMetrics) {
  TrainConfig c = small(NormKind::NONE, ActKind::RELU, 200);
  c.base_lr = 10.0;
  c.warmup_steps = 0;
  const TrainResult r = train(c);
  EXPECT_TRUE(r.diverged);
  EXPECT_LT(r.rows.size(), 200u);
  EXPECT_FALSE(r.abort_reason.empty());
}

TEST(TrainerTest, LearnsTheSyntheticTask) {
  TrainConfig c = small(NormKind::FRN, ActKind::TLU, 300);
  c.batch_size = 32;
  const TrainResult r = train(c);
  ASSERT_TRUE(r.final_eval_accuracy);
  EXPECT_GT(*r.final_eval_accuracy, 0.5);  // chance is 0.25
}

TEST(TrainerTest, BatchLargerThanDatasetIsRejected) {
  DatasetSplit data = make_synthetic(1, {8, 4, 16, 8, 0.3});
  TrainConfig c = small(NormKind::FRN, ActKind::TLU, 2);
  c.batch_size = 17;
  EXPECT_THROW(train(c, data), ConfigError);
}

TEST(TrainerTest, MetricsCsvFormat) {
  std::vector<MetricsRow> rows(2);
  rows[0] = {0, 0.0, 1.5, 0.25, std::nullopt};
  rows[1] = {1, 0.1, 0.1 + 0.2, 1.0, 0.5};
  std::ostringstream os;
  write_metrics_csv(os, rows);
  EXPECT_EQ(os.str(), "step,lr,train_loss,train_acc,eval_acc\n0,0,1.5,0.25,\n1,0.1,0.30000000000000004,1,0.5\n");
}

}  // namespace
}  // namespace frn
