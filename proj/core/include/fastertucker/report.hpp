#pragma once

#include <iosfwd>
#include <span>

#include "fastertucker/trainer.hpp"

namespace fastertucker {

// epoch,train_rmse,test_rmse,train_mae,test_mae,seconds,multiplies
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const EpochMetrics& m);
void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> metrics);

// plan,sweep,mode,channel,count (mode 1-based), one row per nonzero channel
void write_counter_header(std::ostream& out);
void write_counter_rows(std::ostream& out, const SweepRecord& record);
void write_counter_csv(std::ostream& out, std::span<const SweepRecord> records);

}  // namespace fastertucker
