#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rsplab::metrics {

// One training-step record as logged to metrics.jsonl.
struct Row {
  std::int64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  double l_m = 0.0;
  double l_a = 0.0;
  double l_total = 0.0;
  double nce_acc = 0.0;
};

// Reads a metrics.jsonl stream. A resumed run re-logs the steps of its
// partial epoch, so duplicate step indices keep the last occurrence; rows
// come back sorted by step. img::IoError when the file cannot be opened;
// config::ConfigError naming the line on malformed records.
std::vector<Row> read_metrics_jsonl(const std::string& path);

}  // namespace rsplab::metrics
