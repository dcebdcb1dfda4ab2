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
#include <filesystem>
#include <string>

#include "objwal/commit_pipeline.hpp"
#include "objwal/group_logging.hpp"
#include "objwal/metrics.hpp"
#include "objwal/object_store.hpp"
#include "objwal/workload.hpp"

namespace objwal {

enum class Backend { kSim, kLocalDir, kS3 };

const char* to_string(Backend b);
Backend parse_backend(const std::string& s);
TrackingMode parse_tracking(const std::string& s);
AckPolicy parse_ack(const std::string& s);

struct BenchConfig {
  WorkloadConfig workload;
  // worker_count is taken from workload.worker_threads.
  LoggingConfig logging;
  TrackingMode tracking = TrackingMode::kRecordLevel;
  Backend backend = Backend::kSim;
  std::string profile = "express";  // express | standard
  std::size_t replicas = 1;
  AckPolicy ack = AckPolicy::kAll;
  std::uint64_t seed = 1;
  std::filesystem::path data_dir = "objwal-data";
  std::string variant;

  /// Throws ConfigError.
  void validate() const;
  /// "g{group}-{buffer}-{tracking}" unless variant is set.
  std::string variant_name() const;
  /// Replica bucket names: "wal" or "wal-r0".."wal-r{n-1}".
  std::vector<std::string> buckets(const std::string& base = "wal") const;
};

/// Runs one benchmark. Sim runs are a deterministic discrete-event
/// simulation; localdir and s3 run real worker threads against the backend.
/// A backend failure returns the partial metrics with valid = false.
/// Throws ConfigError before loading when the configuration is invalid.
RunMetrics run_benchmark(const BenchConfig& config);

}  // namespace objwal
