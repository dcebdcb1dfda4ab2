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

#include "objwal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace objwal {

void LatencyRecorder::add(Duration d) {
  const auto us = std::max<std::int64_t>(0, d.count() / 1000);
  const auto v = static_cast<std::uint32_t>(std::min<std::int64_t>(us, std::numeric_limits<std::uint32_t>::max()));
  samples_.push_back(v);
  sum_us_ += v;
  sorted_ = false;
}

void LatencyRecorder::merge(const LatencyRecorder& other) {
  samples_.insert(samples_.end(), other.samples_.begin(), other.samples_.end());
  sum_us_ += other.sum_us_;
  sorted_ = false;
}

void LatencyRecorder::sort() {
  if (!sorted_) std::sort(samples_.begin(), samples_.end());
  sorted_ = true;
}

double LatencyRecorder::percentile_ms(double p) {
  if (samples_.empty()) return 0;
  sort();
  const auto n = samples_.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return samples_[rank - 1] / 1000.0;
}

double LatencyRecorder::mean_ms() const {
  return samples_.empty() ? 0 : sum_us_ / static_cast<double>(samples_.size()) / 1000.0;
}

double LatencyRecorder::max_ms() {
  if (samples_.empty()) return 0;
  sort();
  return samples_.back() / 1000.0;
}

double nearest_rank(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0;
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

void RunMetrics::fill_latency(LatencyRecorder& rec) {
  avg_ms = rec.mean_ms();
  p50 = rec.percentile_ms(50);
  p90 = rec.percentile_ms(90);
  p99 = rec.percentile_ms(99);
  p999 = rec.percentile_ms(99.9);
  p9999 = rec.percentile_ms(99.99);
}

namespace {

constexpr const char* kColumns[] = {"variant", "workload", "dist",  "threads", "group_size", "buffer_bytes",
                                    "tracking", "throughput", "p50", "p90",     "p99",        "p999",
                                    "p9999",   "appends",    "bytes", "cost_usd"};

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string csv_header() {
  std::string h;
  for (const char* c : kColumns) {
    if (!h.empty()) h += ',';
    h += c;
  }
  return h + "\n";
}

std::string to_csv_row(const RunMetrics& m) {
  std::ostringstream os;
  os << m.variant << ',' << m.workload << ',' << m.dist << ',' << m.threads << ',' << m.group_size << ','
     << m.buffer_bytes << ',' << m.tracking << ',' << num(m.throughput) << ',' << num(m.p50) << ',' << num(m.p90)
     << ',' << num(m.p99) << ',' << num(m.p999) << ',' << num(m.p9999) << ',' << m.appends << ',' << m.bytes << ','
     << num(m.cost_usd) << '\n';
  return os.str();
}

std::string emit_csv(const std::vector<RunMetrics>& runs) {
  std::string out = csv_header();
  for (const auto& m : runs) out += to_csv_row(m);
  return out;
}

std::vector<RunMetrics> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<RunMetrics> out;
  if (!std::getline(in, line) || line + "\n" != csv_header()) throw std::invalid_argument("unexpected CSV header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != std::size(kColumns)) throw std::invalid_argument("wrong column count in CSV row");
    RunMetrics m;
    m.variant = f[0];
    m.workload = f[1];
    m.dist = f[2];
    m.threads = std::stoull(f[3]);
    m.group_size = std::stoull(f[4]);
    m.buffer_bytes = std::stoull(f[5]);
    m.tracking = f[6];
    m.throughput = std::stod(f[7]);
    m.p50 = std::stod(f[8]);
    m.p90 = std::stod(f[9]);
    m.p99 = std::stod(f[10]);
    m.p999 = std::stod(f[11]);
    m.p9999 = std::stod(f[12]);
    m.appends = std::stoull(f[13]);
    m.bytes = std::stoull(f[14]);
    m.cost_usd = std::stod(f[15]);
    out.push_back(std::move(m));
  }
  return out;
}

bool same_csv_fields(const RunMetrics& a, const RunMetrics& b) {
  return a.variant == b.variant && a.workload == b.workload && a.dist == b.dist && a.threads == b.threads &&
         a.group_size == b.group_size && a.buffer_bytes == b.buffer_bytes && a.tracking == b.tracking &&
         a.throughput == b.throughput && a.p50 == b.p50 && a.p90 == b.p90 && a.p99 == b.p99 && a.p999 == b.p999 &&
         a.p9999 == b.p9999 && a.appends == b.appends && a.bytes == b.bytes && a.cost_usd == b.cost_usd;
}

std::string emit_human(const std::vector<RunMetrics>& runs) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "variant" << std::right << std::setw(12) << "txn/s" << std::setw(9) << "avg"
     << std::setw(9) << "p50" << std::setw(9) << "p90" << std::setw(9) << "p99" << std::setw(9) << "p99.9"
     << std::setw(9) << "p99.99" << std::setw(11) << "appends" << std::setw(11) << "cost $" << std::setw(12) << "committed" << std::setw(9)
     << "aborted" << "\n";
  os << std::fixed;
  for (const auto& m : runs) {
    os << std::left << std::setw(22) << m.variant << std::right << std::setprecision(0) << std::setw(12)
       << m.throughput << std::setprecision(2) << std::setw(9) << m.avg_ms << std::setw(9) << m.p50 << std::setw(9)
       << m.p90 << std::setw(9) << m.p99 << std::setw(9) << m.p999 << std::setw(9) << m.p9999 << std::setw(11)
       << m.appends << std::setprecision(4) << std::setw(11) << m.cost_usd << std::setw(12) << m.committed
       << std::setw(9) << m.aborted << (m.valid ? "" : "  (invalid)") << "\n";
  }
  os << "latencies in ms (enqueue to release)\n";
  return os.str();
}

}  // namespace objwal
