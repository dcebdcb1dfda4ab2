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

#include "objwal/bench.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "objwal/database.hpp"
#include "objwal/s3_store.hpp"
#include "objwal/simulation.hpp"

namespace objwal {

const char* to_string(Backend b) {
  switch (b) {
    case Backend::kSim: return "sim";
    case Backend::kLocalDir: return "localdir";
    case Backend::kS3: return "s3";
  }
  return "?";
}

Backend parse_backend(const std::string& s) {
  if (s == "sim") return Backend::kSim;
  if (s == "localdir") return Backend::kLocalDir;
  if (s == "s3") return Backend::kS3;
  throw ConfigError("unknown backend '" + s + "'");
}

TrackingMode parse_tracking(const std::string& s) {
  if (s == "record") return TrackingMode::kRecordLevel;
  if (s == "txn") return TrackingMode::kTxnLevel;
  throw ConfigError("unknown tracking mode '" + s + "'");
}

AckPolicy parse_ack(const std::string& s) {
  if (s == "all") return AckPolicy::kAll;
  if (s == "majority") return AckPolicy::kMajority;
  throw ConfigError("unknown ack policy '" + s + "'");
}

void BenchConfig::validate() const {
  workload.validate();
  LoggingConfig l = logging;
  l.worker_count = workload.worker_threads;
  l.validate();
  if (profile != "express" && profile != "standard") throw ConfigError("unknown backend profile '" + profile + "'");
  if (replicas == 0) throw ConfigError("replicas must be at least 1");
  if (backend == Backend::kLocalDir && data_dir.empty()) throw ConfigError("localdir needs --data-dir");
}

std::string BenchConfig::variant_name() const {
  if (!variant.empty()) return variant;
  const std::size_t b = logging.buffer_bytes;
  const std::string size = b % kMiB == 0 ? std::to_string(b / kMiB) + "MiB"
                           : b % kKiB == 0 ? std::to_string(b / kKiB) + "KiB"
                                           : std::to_string(b) + "B";
  return "g" + std::to_string(logging.group_size) + "-" + size + "-" + (tracking == TrackingMode::kRecordLevel ? "record" : "txn");
}

std::vector<std::string> BenchConfig::buckets(const std::string& base) const {
  if (replicas == 1) return {base};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < replicas; ++i) out.push_back(base + "-r" + std::to_string(i));
  return out;
}

namespace {

void fill_header(RunMetrics& m, const BenchConfig& c) {
  m.variant = c.variant_name();
  m.workload = to_string(c.workload.workload);
  m.dist = to_string(c.workload.distribution);
  m.threads = c.workload.worker_threads;
  m.group_size = c.logging.group_size;
  m.buffer_bytes = c.logging.buffer_bytes;
  m.tracking = to_string(c.tracking);
}

LatencyProfile profile_of(const std::string& name) {
  return name == "standard" ? LatencyProfile::standard() : LatencyProfile::express();
}

RunMetrics run_sim(const BenchConfig& c) {
  SimConfig s;
  s.workload = c.workload;
  s.logging = c.logging;
  s.logging.worker_count = c.workload.worker_threads;
  s.pipeline.mode = c.tracking;
  s.profile = profile_of(c.profile);
  s.latency_seed = c.seed;
  s.buckets = c.buckets();
  if (c.replicas > 1)
    for (std::size_t i = 0; i < c.replicas; ++i) s.bucket_seeds.push_back(c.seed * 1000 + i);
  s.ack = c.ack;
  s.variant = c.variant_name();
  RunMetrics m = run_simulation(s).metrics;
  fill_header(m, c);
  return m;
}

// Threaded run against a real backend.
RunMetrics run_live(const BenchConfig& c, ObjectStore& store, const std::vector<std::string>& buckets) {
  for (const auto& b : buckets)
    if (!store.list(b, "log-").empty() || !store.list(b, "ckpt-").empty())
      throw ConfigError("bucket '" + b + "' already holds a log; point the run at an empty location");

  DatabaseOptions o;
  o.logging = c.logging;
  o.logging.worker_count = c.workload.worker_threads;
  o.pipeline.mode = c.tracking;
  o.buckets = buckets;
  o.ack = c.ack;
  auto db = Database::create(store, o);

  RunMetrics m;
  fill_header(m, c);
  load_tables(db->engine(), c.workload);
  // The bulk load is not logged; the checkpoint makes it recoverable.
  db->checkpoint();
  const CostSnapshot before = snapshot(store.counters());
  const auto appends_before = store.counters().count(OpKind::kAppend) + store.counters().count(OpKind::kPut);

  LatencyRecorder latency;  // only touched by the releaser thread
  std::atomic<std::uint64_t> committed{0}, aborted{0};
  std::atomic<bool> stop{false};
  const auto start = std::chrono::steady_clock::now();
  const auto deadline = start + std::chrono::duration<double>(c.workload.duration_seconds);
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < c.workload.worker_threads; ++w) {
    workers.emplace_back([&, w] {
      TxnGenerator gen(c.workload, w, c.logging.group_size);
      try {
        while (!stop.load(std::memory_order_relaxed) && std::chrono::steady_clock::now() < deadline) {
          const std::vector<Op> ops = gen.next();
          for (;;) {
            auto txn = db->engine().begin();
            try {
              execute_ops(db->engine(), txn, ops);
            } catch (const WriteConflict&) {
              db->engine().abort(txn);
              aborted.fetch_add(1, std::memory_order_relaxed);
              continue;
            }
            db->commit(w, txn, [&latency](const ReleaseEvent& ev) { latency.add(ev.release_time - ev.enqueue_time); });
            committed.fetch_add(1, std::memory_order_relaxed);
            break;
          }
        }
      } catch (const BackendFailure&) {
        stop = true;
      }
    });
  }
  for (auto& t : workers) t.join();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    db->shutdown();
  } catch (const BackendFailure& e) {
    std::cerr << "backend failure: " << e.what() << "\n";
    m.valid = false;
  }
  m.committed = committed.load();
  m.aborted = aborted.load();
  m.duration_s = c.workload.duration_seconds > 0 ? elapsed : 0;
  m.throughput = m.duration_s > 0 ? static_cast<double>(m.committed) / m.duration_s : 0;
  m.fill_latency(latency);
  CostSnapshot usage = snapshot(store.counters());
  usage.requests -= before.requests;
  usage.appends -= before.appends;
  usage.bytes_uploaded -= before.bytes_uploaded;
  usage.bytes_downloaded -= before.bytes_downloaded;
  m.appends = store.counters().count(OpKind::kAppend) + store.counters().count(OpKind::kPut) - appends_before;
  m.bytes = usage.bytes_uploaded;
  m.cost_usd = estimate_cost(usage);
  return m;
}

}  // namespace

RunMetrics run_benchmark(const BenchConfig& config) {
  config.validate();
  if (config.backend == Backend::kSim) return run_sim(config);
  try {
    if (config.backend == Backend::kLocalDir) {
      LocalDirObjectStore store(config.data_dir, true);
      return run_live(config, store, config.buckets());
    }
    S3Config s3 = S3Config::from_env();
    s3.supports_append = config.profile == "express";
    const char* base = std::getenv("OBJWAL_S3_BUCKET");
    S3ObjectStore store(s3);
    return run_live(config, store, config.buckets(base && *base ? base : "objwal-wal"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    // The backend failed before the workers started (unreachable, no permission).
    std::cerr << "backend failure: " << e.what() << "\n";
    RunMetrics m;
    fill_header(m, config);
    m.valid = false;
    return m;
  }
}

}  // namespace objwal
