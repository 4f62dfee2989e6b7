#include "fastertucker/report.hpp"

#include <limits>
#include <ostream>

namespace fastertucker {

void write_metrics_header(std::ostream& out) {
  out << "epoch,train_rmse,test_rmse,train_mae,test_mae,seconds,multiplies\n";
}

void write_metrics_row(std::ostream& out, const EpochMetrics& m) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  out << m.epoch << ',' << m.train.rmse << ',';
  if (m.test) out << m.test->rmse;
  out << ',' << m.train.mae << ',';
  if (m.test) out << m.test->mae;
  out << ',' << m.seconds << ',' << m.multiplies << '\n';
  out.precision(old);
}

void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> metrics) {
  write_metrics_header(out);
  for (const auto& m : metrics) write_metrics_row(out, m);
}

void write_counter_header(std::ostream& out) { out << "plan,sweep,mode,channel,count\n"; }

void write_counter_rows(std::ostream& out, const SweepRecord& record) {
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    const auto ch = static_cast<Channel>(c);
    const auto n = record.counts.get(ch);
    if (n == 0) continue;
    out << plan_name(record.plan) << ',' << sweep_name(record.kind) << ',' << record.mode + 1 << ','
        << channel_name(ch) << ',' << n << '\n';
  }
}

void write_counter_csv(std::ostream& out, std::span<const SweepRecord> records) {
  write_counter_header(out);
  for (const auto& r : records) write_counter_rows(out, r);
}

}  // namespace fastertucker
