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

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "objwal/clock.hpp"
#include "objwal/types.hpp"

namespace objwal {

enum class TrackingMode { kRecordLevel, kTxnLevel };

/// What the transaction-level baseline compares against gCSN.
enum class TxnLevelGate { kCsn, kBeginTs };

const char* to_string(TrackingMode m);

struct ReleaseEvent {
  Csn csn;
  Dsn dsn;
  std::optional<LogId> log_id;
  TimePoint enqueue_time{0};
  TimePoint release_time{0};
};

/// A pre-committed transaction waiting for its own bytes and its
/// predecessors to become durable.
struct PendingCommit {
  Csn csn;
  Dsn dsn;
  Csn begin_ts;
  std::optional<LogId> log_id;  // none for read-only transactions
  Lsn end_lsn;
  TimePoint enqueue_time{0};
  std::function<void(const ReleaseEvent&)> on_release;
};

/// Per-log durable frontier and the pre-committed CSNs it does not yet cover.
class LogDurabilityState {
 public:
  explicit LogDurabilityState(LogId id = 0) : id_(id), durable_{id, 0, 0} {}

  LogId id() const { return id_; }
  const Lsn& durable_lsn() const { return durable_; }

  /// A CSN drawn by a transaction that will write to this log; its end
  /// position is not known yet.
  void register_csn(Csn csn);
  /// Returns true if the entry is already durable.
  bool set_end_lsn(Csn csn, const Lsn& end);
  /// Advances the frontier; returns the CSNs that became durable. Throws
  /// std::invalid_argument on regression.
  std::vector<Csn> advance(const Lsn& durable);
  /// Drops a registered CSN that will never be logged.
  void forget(Csn csn);

  bool is_nondurable(Csn csn) const { return nondurable_.contains(csn); }
  std::optional<Csn> min_nondurable() const;
  const std::set<Csn>& nondurable() const { return nondurable_; }

 private:
  LogId id_;
  Lsn durable_;
  std::set<Csn> nondurable_;
  std::multimap<Lsn, Csn> by_end_;
};

/// gCSN: per log, the smallest non-durable CSN, or next_csn when the log has
/// none; the minimum over logs.
Csn compute_gcsn(std::span<const LogDurabilityState> states, Csn next_csn);
Csn compute_gcsn(std::span<const std::optional<Csn>> log_minimums, Csn next_csn);

/// Exact membership for released CSNs: everything below the watermark plus
/// a sparse set above it.
class ReleasedSet {
 public:
  bool contains(Csn csn) const { return csn < watermark_ || sparse_.contains(csn); }
  void insert(Csn csn);
  /// Every CSN below `w` has been released (or never existed).
  void compact(Csn w);
  Csn watermark() const { return watermark_; }
  std::size_t sparse_size() const { return sparse_.size(); }

 private:
  Csn watermark_{1};
  std::unordered_set<Csn> sparse_;
};

struct PipelineOptions {
  TrackingMode mode = TrackingMode::kRecordLevel;
  TxnLevelGate gate = TxnLevelGate::kCsn;
  // Record level: also release when the dsn's transaction was already
  // released, even if dsn >= gCSN. Off by default: it lets a transaction go
  // while an older predecessor (not its dsn) may still be non-durable.
  bool released_predecessor = false;
};

/// The release rule, assuming the transaction's own bytes are durable.
bool eligible(const PendingCommit& p, Csn gcsn, const ReleasedSet& released, const PipelineOptions& opts);
inline bool eligible(const PendingCommit& p, Csn gcsn, const ReleasedSet& released, TrackingMode mode) {
  return eligible(p, gcsn, released, PipelineOptions{mode});
}

struct PipelineStats {
  std::uint64_t enqueued = 0;
  std::uint64_t released = 0;
  std::size_t waiting_own = 0;
  std::size_t waiting_deps = 0;
  Csn last_gcsn;
};

/// Multi-producer commit queue with a single releaser.
class CommitPipeline {
 public:
  CommitPipeline(std::size_t log_count, PipelineOptions opts, std::function<Csn()> next_csn,
                 Clock& clock = SteadyClock::instance());

  TrackingMode mode() const { return opts_.mode; }
  const PipelineOptions& options() const { return opts_; }
  std::size_t log_count() const { return states_.size(); }

  /// Must run before the transaction's versions become visible to others.
  void register_csn(LogId log, Csn csn);
  void forget_csn(LogId log, Csn csn);
  void enqueue(PendingCommit p);
  /// Throws std::invalid_argument if the frontier would move backwards.
  void update_log_durability(LogId log, const Lsn& durable);

  Csn compute_gcsn();
  /// Releases every eligible pending transaction (to fixpoint) and invokes
  /// their completion handles.
  std::vector<ReleaseEvent> drain_releasable();

  void set_release_listener(std::function<void(const ReleaseEvent&)> listener);

  std::size_t pending_count() const;
  bool is_released(Csn csn) const;
  Csn last_gcsn() const;
  PipelineStats stats() const;
  /// Durability state of one log, copied.
  LogDurabilityState log_state(LogId log) const;

 private:
  struct Entry {
    PendingCommit p;
  };

  void make_ready_locked(Csn csn);
  void release_locked(Csn csn, TimePoint now, std::vector<ReleaseEvent>& out,
                      std::vector<std::function<void(const ReleaseEvent&)>>& handles);
  std::uint64_t ready_key(const PendingCommit& p) const;
  bool released_path() const { return opts_.mode == TrackingMode::kRecordLevel && opts_.released_predecessor; }

  const PipelineOptions opts_;
  std::function<Csn()> next_csn_;
  Clock& clock_;

  mutable std::mutex mu_;
  std::vector<LogDurabilityState> states_;
  std::unordered_map<Csn, Entry> pending_;
  // Own bytes durable; keyed by dsn (record level) or csn/begin_ts.
  std::multimap<std::uint64_t, Csn> ready_;
  // Released-predecessor rule: ready entries whose dsn was already released.
  std::vector<Csn> immediate_;
  std::size_t waiting_own_ = 0;
  ReleasedSet released_;
  Csn last_gcsn_{1};
  std::uint64_t enqueued_ = 0;
  std::uint64_t released_count_ = 0;
  std::function<void(const ReleaseEvent&)> listener_;
};

}  // namespace objwal
