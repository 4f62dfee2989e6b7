#include <gtest/gtest.h>

#include <sstream>

#include "fastertucker/report.hpp"

namespace fastertucker {
namespace {

TEST(Report, MetricsRows) {
  std::vector<EpochMetrics> rows(2);
  rows[0].train = {0.5, 0.25};
  rows[1].epoch = 1;
  rows[1].train = {0.5, 0.25};
  rows[1].test = EvalResult{1.0, 0.75};
  rows[1].seconds = 0.5;
  rows[1].multiplies = 1234;
  std::ostringstream out;
  write_metrics_csv(out, rows);
  EXPECT_EQ(out.str(),
            "epoch,train_rmse,test_rmse,train_mae,test_mae,seconds,multiplies\n"
            "0,0.5,,0.25,,0,0\n"
            "1,0.5,1,0.25,0.75,0.5,1234\n");
}

TEST(Report, CounterRowsSkipZeroChannels) {
  SweepRecord rec;
  rec.plan = Plan::Uncached;
  rec.kind = SweepKind::Factor;
  rec.mode = 2;
  rec.counts.add(Channel::AbProducts, 10);
  rec.counts.add(Channel::Gradient, 4);
  std::ostringstream out;
  write_counter_csv(out, std::vector<SweepRecord>{rec});
  EXPECT_EQ(out.str(),
            "plan,sweep,mode,channel,count\n"
            "uncached,factor,3,ab_products,10\n"
            "uncached,factor,3,gradient,4\n");
}

}  // namespace
}  // namespace fastertucker
