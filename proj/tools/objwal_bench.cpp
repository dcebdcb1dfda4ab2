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

// objwal_bench: runs one benchmark variant and reports throughput, commit
// latency percentiles, request counts and estimated cost.
//
// Exit codes: 0 success, 2 invalid configuration, 3 backend failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "objwal/bench.hpp"

int main(int argc, char** argv) {
  using namespace objwal;
  CLI::App app{"Decentralized WAL benchmark over object storage"};

  std::string workload = "ycsb_a", dist = "uniform", backend = "sim", profile = "express", tracking = "record";
  std::string ack = "all", csv, data_dir = "objwal-data", variant;
  double theta = 0.99, duration = 10.0, flush_timeout_ms = 3.0;
  std::uint64_t records = 1'000'000, seed = 1;
  std::size_t threads = 8, group_size = 2, buffer_bytes = kMiB, base_bytes = 512 * kKiB, replicas = 1;

  app.add_option("--workload", workload, "ycsb_a | ycsb_b | dep_stress")->capture_default_str();
  app.add_option("--dist", dist, "uniform | zipfian")->capture_default_str();
  app.add_option("--theta", theta, "zipfian skew in (0, 1)")->capture_default_str();
  app.add_option("--records", records, "rows in the main table")->capture_default_str();
  app.add_option("--threads", threads, "worker threads")->capture_default_str();
  app.add_option("--duration", duration, "seconds of load")->capture_default_str();
  app.add_option("--backend", backend, "sim | localdir | s3")->capture_default_str();
  app.add_option("--backend-profile", profile, "express | standard")->capture_default_str();
  app.add_option("--group-size", group_size, "workers sharing one log")->capture_default_str();
  app.add_option("--buffer-bytes", buffer_bytes, "log buffer size per group")->capture_default_str();
  app.add_option("--per-thread-base-bytes", base_bytes, "buffer share per worker")->capture_default_str();
  app.add_option("--tracking", tracking, "record | txn")->capture_default_str();
  app.add_option("--flush-timeout-ms", flush_timeout_ms, "seal a partial buffer after this long")->capture_default_str();
  app.add_option("--replicas", replicas, "buckets each flush is written to")->capture_default_str();
  app.add_option("--ack", ack, "all | majority")->capture_default_str();
  app.add_option("--seed", seed, "workload and latency seed")->capture_default_str();
  app.add_option("--csv", csv, "write the CSV report here");
  app.add_option("--data-dir", data_dir, "localdir backend root")->capture_default_str();
  app.add_option("--variant", variant, "label for the report row");
  CLI11_PARSE(app, argc, argv);

  BenchConfig c;
  try {
    c.workload.workload = parse_workload(workload);
    c.workload.distribution = parse_distribution(dist);
    c.workload.theta = theta;
    c.workload.record_count = records;
    c.workload.worker_threads = threads;
    c.workload.duration_seconds = duration;
    c.workload.seed = seed;
    c.backend = parse_backend(backend);
    c.profile = profile;
    c.logging.group_size = group_size;
    c.logging.buffer_bytes = buffer_bytes;
    c.logging.per_thread_base_bytes = base_bytes;
    c.logging.flush_timeout = from_ms(flush_timeout_ms);
    c.tracking = parse_tracking(tracking);
    c.replicas = replicas;
    c.ack = parse_ack(ack);
    c.seed = seed;
    c.data_dir = data_dir;
    c.variant = variant;
    if (flush_timeout_ms <= 0) throw ConfigError("--flush-timeout-ms must be positive");
    c.validate();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  RunMetrics m;
  try {
    m = run_benchmark(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  std::cout << emit_human({m});
  if (!csv.empty()) {
    std::ofstream out(csv);
    out << emit_csv({m});
    if (!out) {
      std::cerr << "cannot write " << csv << "\n";
      return 3;
    }
  }
  if (!m.valid) {
    std::cerr << "run aborted by a backend failure; metrics are partial\n";
    return 3;
  }
  return 0;
}
