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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "objwal/commit_pipeline.hpp"
#include "objwal/group_logging.hpp"
#include "objwal/metrics.hpp"
#include "objwal/mvcc.hpp"
#include "objwal/object_store.hpp"
#include "objwal/workload.hpp"

namespace objwal {

/// Simulated worker CPU time per transaction. Calibration knob: it sets how
/// much log bandwidth a worker generates.
struct CpuModel {
  Duration per_txn{1000};
  Duration per_read{500};
  Duration per_update{700};
  double ns_per_log_byte = 1.0;

  Duration cost(std::size_t reads, std::size_t updates, std::size_t log_bytes) const;
};

struct SimConfig {
  WorkloadConfig workload;
  // worker_count is taken from workload.worker_threads.
  LoggingConfig logging;
  PipelineOptions pipeline;
  LatencyProfile profile = LatencyProfile::express();
  std::uint64_t latency_seed = 1;
  // Replica buckets; per-bucket seeds override latency_seed when given.
  std::vector<std::string> buckets{"wal"};
  std::vector<std::uint64_t> bucket_seeds;
  AckPolicy ack = AckPolicy::kAll;
  RetryPolicy retry;
  CpuModel cpu;
  Pricing pricing;

  // Run transactions on MvccEngine. Otherwise a last-writer table yields the
  // same CSNs, DSNs and records at a fraction of the cost (no conflicts can
  // occur since each simulated transaction executes atomically).
  bool full_engine = false;
  // Stop issuing transactions after this many (0: run for the duration).
  std::uint64_t max_txns = 0;
  bool record_flushes = false;
  bool record_payloads = false;
  bool record_txns = false;
  bool record_releases = false;
  // Runs after the tables are loaded and before the first transaction;
  // requires full_engine.
  std::function<void(MvccEngine&)> after_load;

  std::string variant;
};

struct FlushRecord {
  LogId log_id = 0;
  SealReason reason = SealReason::kFull;
  std::string key;
  std::uint64_t offset = 0;
  std::uint64_t bytes = 0;
  Bytes payload;  // with record_payloads
  std::uint32_t segment_index = 0;
  bool seals_segment = false;
  Lsn end_lsn;
  TimePoint issued{0};
  TimePoint acked{0};
  std::vector<Duration> replica_latency;  // per bucket, in bucket order
};

struct TxnRecord {
  Csn csn;
  Dsn dsn;
  std::optional<LogId> log_id;
  Lsn end_lsn;
  TimePoint commit_time{0};
  std::vector<DeltaRecord> records;
};

struct SimResult {
  RunMetrics metrics;
  std::vector<FlushRecord> flushes;  // in issue order
  std::vector<TxnRecord> txns;       // in csn order
  std::vector<ReleaseEvent> releases;
  std::uint64_t seals_full = 0;
  std::uint64_t seals_timeout = 0;
  std::uint64_t seals_shutdown = 0;
  std::uint64_t worker_stalls = 0;
  std::uint64_t requests = 0;
  Csn load_ts;  // last csn used by the bulk load
  TimePoint end_time{0};
};

/// Single-threaded discrete-event run of the full commit path (engine, log
/// groups, pipeline) against the latency model. Deterministic in the seeds.
SimResult run_simulation(const SimConfig& config);

/// Storage that tracks object lengths and part counts but keeps no data.
class LengthOnlyStore final : public ObjectStore {
 public:
  explicit LengthOnlyStore(StoreLimits limits = {}) : limits_(limits) {}

  std::uint64_t append(const ObjectKey& key, std::uint64_t expected_offset, ByteView payload) override;
  Bytes get(const ObjectKey& key, std::optional<ByteRange> range = std::nullopt) override;
  void put(const ObjectKey& key, ByteView data) override;
  void remove(const ObjectKey& key) override;
  std::optional<ObjectInfo> head(const ObjectKey& key) override;
  std::vector<std::string> list(const std::string& bucket, const std::string& prefix) override;

 private:
  StoreLimits limits_;
  std::map<std::string, ObjectInfo> objects_;
};

}  // namespace objwal
