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
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "objwal/mvcc.hpp"

namespace objwal {

/// Zipfian ranks in [0, n) with P(rank k) proportional to 1 / (k + 1)^theta,
/// using the closed-form generator of Gray et al. (as in YCSB).
class ZipfGenerator {
 public:
  ZipfGenerator(std::uint64_t n, double theta);

  std::uint64_t operator()(std::mt19937_64& rng) const;
  std::uint64_t n() const { return n_; }
  double theta() const { return theta_; }

  static double zeta(std::uint64_t n, double theta);

 private:
  std::uint64_t n_;
  double theta_;
  double alpha_;
  double zetan_;
  double eta_;
  double half_pow_theta_;
};

enum class WorkloadKind { kYcsbA, kYcsbB, kDepStress };
enum class Distribution { kUniform, kZipfian };

const char* to_string(WorkloadKind k);
const char* to_string(Distribution d);
WorkloadKind parse_workload(const std::string& s);
Distribution parse_distribution(const std::string& s);

struct WorkloadConfig {
  WorkloadKind workload = WorkloadKind::kYcsbA;
  std::uint64_t record_count = 1'000'000;
  std::uint32_t ops_per_txn = 10;
  Distribution distribution = Distribution::kUniform;
  double theta = 0.99;
  // Defaults to 0.5 for ycsb_a / dep_stress and 0.95 for ycsb_b when unset.
  std::optional<double> read_fraction;
  std::size_t worker_threads = 8;
  double duration_seconds = 10.0;
  std::uint64_t seed = 1;
  // dep_stress: chance that an operation reads another group's handoff row.
  double handoff_fraction = 0.2;

  double effective_read_fraction() const;
  /// Throws ConfigError.
  void validate() const;
};

inline constexpr TableId kMainTable = 1;
inline constexpr TableId kHandoffTable = 2;

struct Op {
  enum Kind : std::uint8_t { kRead, kUpdate } kind;
  TableId table;
  Rid rid;
  std::uint32_t field;
  std::uint64_t value;
};

/// Per-worker operation source.
class TxnGenerator {
 public:
  TxnGenerator(const WorkloadConfig& config, std::size_t worker, std::size_t group_size);

  /// Operations of the next transaction.
  const std::vector<Op>& next();

 private:
  const WorkloadConfig config_;
  std::size_t worker_;
  std::size_t group_size_;
  std::mt19937_64 rng_;
  std::optional<ZipfGenerator> zipf_;
  std::vector<Op> ops_;
};

/// Creates the tables and loads record_count rows (and one handoff row per
/// worker for dep_stress) in bulk transactions.
void load_tables(MvccEngine& engine, const WorkloadConfig& config);

/// Runs the operations in `txn`. Updates are read-modify-writes of one field.
/// Throws WriteConflict.
void execute_ops(MvccEngine& engine, Transaction& txn, const std::vector<Op>& ops);

/// Deterministic initial image of a row.
Bytes initial_image(TableId table, Rid rid);

}  // namespace objwal
