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

#include "objwal/workload.hpp"

#include <cmath>

namespace objwal {

ZipfGenerator::ZipfGenerator(std::uint64_t n, double theta) : n_(n), theta_(theta) {
  if (n == 0) throw ConfigError("zipf needs n >= 1");
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("zipf theta must be in (0, 1)");
  zetan_ = zeta(n, theta);
  alpha_ = 1.0 / (1.0 - theta);
  const double zeta2 = zeta(std::min<std::uint64_t>(n, 2), theta);
  eta_ = (1.0 - std::pow(2.0 / static_cast<double>(n), 1.0 - theta)) / (1.0 - zeta2 / zetan_);
  half_pow_theta_ = std::pow(0.5, theta);
}

double ZipfGenerator::zeta(std::uint64_t n, double theta) {
  double s = 0;
  for (std::uint64_t i = 1; i <= n; ++i) s += 1.0 / std::pow(static_cast<double>(i), theta);
  return s;
}

std::uint64_t ZipfGenerator::operator()(std::mt19937_64& rng) const {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const double uz = u * zetan_;
  if (uz < 1.0) return 0;
  if (n_ >= 2 && uz < 1.0 + half_pow_theta_) return 1;
  const auto r = static_cast<std::uint64_t>(static_cast<double>(n_) * std::pow(eta_ * u - eta_ + 1.0, alpha_));
  return std::min(r, n_ - 1);
}

const char* to_string(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::kYcsbA: return "ycsb_a";
    case WorkloadKind::kYcsbB: return "ycsb_b";
    case WorkloadKind::kDepStress: return "dep_stress";
  }
  return "?";
}

const char* to_string(Distribution d) { return d == Distribution::kUniform ? "uniform" : "zipfian"; }

WorkloadKind parse_workload(const std::string& s) {
  if (s == "ycsb_a") return WorkloadKind::kYcsbA;
  if (s == "ycsb_b") return WorkloadKind::kYcsbB;
  if (s == "dep_stress") return WorkloadKind::kDepStress;
  throw ConfigError("unknown workload '" + s + "'");
}

Distribution parse_distribution(const std::string& s) {
  if (s == "uniform") return Distribution::kUniform;
  if (s == "zipfian" || s == "zipf") return Distribution::kZipfian;
  throw ConfigError("unknown distribution '" + s + "'");
}

double WorkloadConfig::effective_read_fraction() const {
  if (read_fraction) return *read_fraction;
  return workload == WorkloadKind::kYcsbB ? 0.95 : 0.5;
}

void WorkloadConfig::validate() const {
  const double rf = effective_read_fraction();
  if (!(rf >= 0.0 && rf <= 1.0)) throw ConfigError("read_fraction must be in [0, 1]");
  if (distribution == Distribution::kZipfian && !(theta > 0.0 && theta < 1.0))
    throw ConfigError("theta must be in (0, 1)");
  if (record_count == 0) throw ConfigError("record_count must be positive");
  if (ops_per_txn == 0) throw ConfigError("ops_per_txn must be positive");
  if (worker_threads == 0) throw ConfigError("worker_threads must be positive");
  if (duration_seconds < 0) throw ConfigError("duration must not be negative");
  if (!(handoff_fraction >= 0.0 && handoff_fraction <= 1.0)) throw ConfigError("handoff_fraction must be in [0, 1]");
}

TxnGenerator::TxnGenerator(const WorkloadConfig& config, std::size_t worker, std::size_t group_size)
    : config_(config), worker_(worker), group_size_(std::max<std::size_t>(group_size, 1)) {
  std::seed_seq seq{config.seed, std::uint64_t{worker}, std::uint64_t{0x5eed}};
  rng_.seed(seq);
  if (config.distribution == Distribution::kZipfian) zipf_.emplace(config.record_count, config.theta);
  ops_.reserve(config.ops_per_txn + 1);
}

const std::vector<Op>& TxnGenerator::next() {
  ops_.clear();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double rf = config_.effective_read_fraction();
  const std::size_t groups = (config_.worker_threads + group_size_ - 1) / group_size_;
  const bool stress = config_.workload == WorkloadKind::kDepStress && groups > 1;
  for (std::uint32_t i = 0; i < config_.ops_per_txn; ++i) {
    if (stress && u(rng_) < config_.handoff_fraction) {
      // A handoff row of a worker in another group.
      const std::size_t my_group = worker_ / group_size_;
      std::size_t other;
      do {
        other = rng_() % config_.worker_threads;
      } while (other / group_size_ == my_group);
      ops_.push_back({Op::kRead, kHandoffTable, other, 0, 0});
      continue;
    }
    const Rid rid = zipf_ ? (*zipf_)(rng_) : rng_() % config_.record_count;
    if (u(rng_) < rf) {
      ops_.push_back({Op::kRead, kMainTable, rid, 0, 0});
    } else {
      ops_.push_back({Op::kUpdate, kMainTable, rid, static_cast<std::uint32_t>(rng_() % 10), rng_()});
    }
  }
  if (stress) ops_.push_back({Op::kUpdate, kHandoffTable, worker_, 0, rng_()});
  return ops_;
}

Bytes initial_image(TableId table, Rid rid) {
  Bytes b(80);
  for (std::uint32_t f = 0; f < 10; ++f) le::put_u64(b.data() + 8 * f, (std::uint64_t{table} << 56) ^ (rid << 4) ^ f);
  return b;
}

void load_tables(MvccEngine& engine, const WorkloadConfig& config) {
  config.validate();
  engine.create_table(kMainTable);
  constexpr std::uint64_t kBatch = 10'000;
  for (std::uint64_t start = 0; start < config.record_count; start += kBatch) {
    auto txn = engine.begin();
    const std::uint64_t end = std::min(config.record_count, start + kBatch);
    for (Rid r = start; r < end; ++r) engine.insert(txn, kMainTable, r, initial_image(kMainTable, r));
    engine.precommit(txn);
  }
  if (config.workload == WorkloadKind::kDepStress) {
    engine.create_table(kHandoffTable);
    auto txn = engine.begin();
    for (Rid r = 0; r < config.worker_threads; ++r) engine.insert(txn, kHandoffTable, r, initial_image(kHandoffTable, r));
    engine.precommit(txn);
  }
}

void execute_ops(MvccEngine& engine, Transaction& txn, const std::vector<Op>& ops) {
  std::byte value[8];
  std::byte image[80];
  for (const Op& op : ops) {
    engine.read_into(txn, op.table, op.rid, image);
    if (op.kind == Op::kUpdate) {
      le::put_u64(value, op.value);
      engine.update(txn, op.table, op.rid, std::uint64_t{1} << op.field, ByteView(value, 8));
    }
  }
}

}  // namespace objwal
