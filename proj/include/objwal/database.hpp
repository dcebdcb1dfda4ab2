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

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "objwal/commit_pipeline.hpp"
#include "objwal/group_logging.hpp"
#include "objwal/mvcc.hpp"
#include "objwal/object_store.hpp"
#include "objwal/recovery.hpp"

namespace objwal {

/// A log flush failed permanently; no further transaction can be released.
class BackendFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatabaseOptions {
  LoggingConfig logging;
  PipelineOptions pipeline;
  // Replica buckets for log segments and checkpoints.
  std::vector<std::string> buckets{"wal"};
  AckPolicy ack = AckPolicy::kAll;
  RetryPolicy retry;
  Clock* clock = nullptr;  // SteadyClock when null
  // Delete covered segments and older checkpoints after each checkpoint.
  bool truncate_after_checkpoint = true;
  const SchemaCatalog* catalog = nullptr;  // fixed_default when null
};

struct DatabaseStats {
  std::uint64_t flushes = 0;
  std::uint64_t flushed_bytes = 0;
  std::uint64_t seals_full = 0;
  std::uint64_t seals_timeout = 0;
  std::uint64_t seals_shutdown = 0;
  std::uint64_t committed = 0;
  std::uint64_t released = 0;
  std::uint64_t checkpoints = 0;
};

/// Threaded runtime: engine, one log group and flusher thread per group of
/// workers, and a releaser thread that acknowledges commits once the
/// pipeline's release rule allows it.
class Database {
 public:
  /// Starts empty. The store is expected to hold no log of a previous run.
  static std::unique_ptr<Database> create(ObjectStore& store, DatabaseOptions options);
  /// Restores the durable state found in the store; logs continue in fresh
  /// segments after the existing ones.
  static std::unique_ptr<Database> open(ObjectStore& store, DatabaseOptions options,
                                        RecoveryResult* recovery = nullptr);

  ~Database();
  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;

  MvccEngine& engine() { return *engine_; }
  CommitPipeline& pipeline() { return *pipeline_; }
  ObjectStore& store() { return store_; }
  const DatabaseOptions& options() const { return options_; }
  std::size_t worker_count() const { return worker_log_.size(); }
  LogId log_of(std::size_t worker) const { return worker_log_.at(worker); }

  /// Pre-commits `txn` for `worker` and appends its log entry. `on_release`
  /// runs on the releaser thread once the commit may be acknowledged.
  /// Throws BackendFailure after a failed flush.
  Csn commit(std::size_t worker, Transaction& txn, std::function<void(const ReleaseEvent&)> on_release = {});
  /// commit() and wait for the release.
  ReleaseEvent commit_and_wait(std::size_t worker, Transaction& txn);

  /// Writes a checkpoint at the current snapshot once every transaction it
  /// contains is durable, then truncates (if configured).
  CheckpointMeta checkpoint();

  /// Flushes what is buffered, releases what can be released and stops the
  /// threads. Call after workers stop committing. Throws BackendFailure if
  /// a flush failed. Idempotent.
  void shutdown();

  bool failed() const { return failed_.load(std::memory_order_acquire); }
  DatabaseStats stats() const;

 private:
  struct Flusher;

  Database(ObjectStore& store, DatabaseOptions options, std::unique_ptr<MvccEngine> engine,
           const std::map<LogId, LogRecoveryInfo>& logs);

  void flusher_loop(Flusher& f);
  void releaser_loop();
  void fail(const std::string& what);
  void wake_releaser();
  void throw_if_failed() const;

  ObjectStore& store_;
  DatabaseOptions options_;
  Clock& clock_;
  std::unique_ptr<MvccEngine> engine_;
  std::vector<LogId> worker_log_;
  std::unique_ptr<CommitPipeline> pipeline_;
  std::vector<std::unique_ptr<Flusher>> flushers_;

  std::mutex release_mu_;
  std::condition_variable release_cv_;
  bool release_dirty_ = false;
  bool release_stop_ = false;
  std::thread releaser_;

  std::mutex checkpoint_mu_;
  std::atomic<bool> failed_{false};
  std::atomic<bool> stopped_{false};
  mutable std::mutex error_mu_;
  std::string error_;

  std::atomic<std::uint64_t> committed_{0};
  std::atomic<std::uint64_t> released_{0};
  std::atomic<std::uint64_t> checkpoints_{0};
};

}  // namespace objwal
