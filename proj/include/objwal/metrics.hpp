// Copyright 2026 The objwal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "objwal/clock.hpp"

namespace objwal {

/// Exact latency samples (microsecond resolution); percentiles by nearest
/// rank over the sorted samples.
class LatencyRecorder {
 public:
  void add(Duration d);
  void merge(const LatencyRecorder& other);
  std::size_t count() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  /// p in (0, 100]; 0 for an empty recorder. Value in milliseconds.
  double percentile_ms(double p);
  double mean_ms() const;
  double max_ms();
  const std::vector<std::uint32_t>& samples_us() const { return samples_; }

 private:
  void sort();

  std::vector<std::uint32_t> samples_;
  double sum_us_ = 0;
  bool sorted_ = true;
};

/// Nearest-rank percentile of an already sorted sample vector.
double nearest_rank(const std::vector<double>& sorted, double p);

struct RunMetrics {
  std::string variant;
  std::string workload;
  std::string dist;
  std::size_t threads = 0;
  std::size_t group_size = 0;
  std::uint64_t buffer_bytes = 0;
  std::string tracking;

  std::uint64_t committed = 0;
  std::uint64_t aborted = 0;
  double duration_s = 0;
  double throughput = 0;  // committed transactions per second
  double avg_ms = 0;
  double p50 = 0, p90 = 0, p99 = 0, p999 = 0, p9999 = 0;
  std::uint64_t appends = 0;
  std::uint64_t bytes = 0;
  double cost_usd = 0;
  bool valid = true;

  void fill_latency(LatencyRecorder& rec);
};

/// Comma-separated report, one row per run.
std::string csv_header();
std::string to_csv_row(const RunMetrics& m);
std::string emit_csv(const std::vector<RunMetrics>& runs);
/// Parses what emit_csv wrote (only the CSV columns are restored).
std::vector<RunMetrics> parse_csv(const std::string& text);
/// Aligned table for terminals.
std::string emit_human(const std::vector<RunMetrics>& runs);

/// True when the CSV columns of two runs are equal.
bool same_csv_fields(const RunMetrics& a, const RunMetrics& b);

}  // namespace objwal
