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

#include "objwal/simulation.hpp"

#include <array>
#include <bit>
#include <deque>
#include <queue>

namespace objwal {

Duration CpuModel::cost(std::size_t reads, std::size_t updates, std::size_t log_bytes) const {
  return per_txn + per_read * static_cast<std::int64_t>(reads) + per_update * static_cast<std::int64_t>(updates) +
         Duration(static_cast<std::int64_t>(ns_per_log_byte * static_cast<double>(log_bytes)));
}

// --- LengthOnlyStore ---------------------------------------------------------

std::uint64_t LengthOnlyStore::append(const ObjectKey& key, std::uint64_t expected_offset, ByteView payload) {
  counters_.record(OpKind::kAppend, payload.size());
  if (payload.size() > limits_.max_part_bytes) throw StoreError(StoreErrc::kPartTooLarge, "part too large");
  const std::string name = key.bucket + "/" + key.key;
  auto it = objects_.find(name);
  if (it == objects_.end()) {
    if (expected_offset != 0) throw StoreError(StoreErrc::kOffsetMismatch, "append to absent object", 0);
    it = objects_.emplace(name, ObjectInfo{}).first;
  }
  ObjectInfo& obj = it->second;
  if (obj.length != expected_offset) throw StoreError(StoreErrc::kOffsetMismatch, "stale append offset", obj.length);
  if (obj.parts >= limits_.append_limit)
    throw StoreError(StoreErrc::kPartLimitExceeded, "object reached its append limit");
  obj.length += payload.size();
  ++obj.parts;
  return obj.length;
}

Bytes LengthOnlyStore::get(const ObjectKey& key, std::optional<ByteRange>) {
  counters_.record(OpKind::kGet);
  throw StoreError(StoreErrc::kNotFound, "length-only store keeps no data: " + key.key);
}

void LengthOnlyStore::put(const ObjectKey& key, ByteView data) {
  counters_.record(OpKind::kPut, data.size());
  objects_[key.bucket + "/" + key.key] = ObjectInfo{data.size(), 1};
}

void LengthOnlyStore::remove(const ObjectKey& key) {
  counters_.record(OpKind::kDelete);
  objects_.erase(key.bucket + "/" + key.key);
}

std::optional<ObjectInfo> LengthOnlyStore::head(const ObjectKey& key) {
  counters_.record(OpKind::kHead);
  auto it = objects_.find(key.bucket + "/" + key.key);
  if (it == objects_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> LengthOnlyStore::list(const std::string& bucket, const std::string& prefix) {
  counters_.record(OpKind::kList);
  std::vector<std::string> out;
  const std::string start = bucket + "/" + prefix;
  for (auto it = objects_.lower_bound(start); it != objects_.end() && it->first.starts_with(start); ++it)
    out.push_back(it->first.substr(bucket.size() + 1));
  return out;
}

// --- simulator ---------------------------------------------------------------

namespace {

enum class EventKind : std::uint8_t { kWorker, kFlushDone, kTimeout };

struct Event {
  TimePoint at;
  std::uint64_t seq;
  EventKind kind;
  std::uint32_t target;  // worker or log
  std::uint64_t generation;

  bool operator>(const Event& o) const { return at != o.at ? at > o.at : seq > o.seq; }
};

// Per-row CSN of the last writer, replaying what MvccEngine would compute for
// the same operations when transactions never overlap.
class LastWriterEngine {
 public:
  explicit LastWriterEngine(const WorkloadConfig& w) {
    constexpr std::uint64_t kBatch = 10'000;  // as in load_tables
    main_.resize(w.record_count);
    for (Rid r = 0; r < w.record_count; ++r) main_[r] = 1 + r / kBatch;
    next_ = 1 + (w.record_count + kBatch - 1) / kBatch;
    if (w.workload == WorkloadKind::kDepStress) handoff_.assign(w.worker_threads, next_++);
  }

  Csn next_csn() const { return Csn{next_}; }

  Precommitted run(const std::vector<Op>& ops) {
    writes_.clear();
    std::uint64_t dsn = 0;
    for (const Op& op : ops) {
      Write* w = find(op.table, op.rid);
      if (!w) dsn = std::max(dsn, row(op.table, op.rid));
      if (op.kind != Op::kUpdate) continue;
      if (!w) w = &writes_.emplace_back(Write{op.table, op.rid, 0, {}});
      w->mask |= std::uint64_t{1} << op.field;
      w->values[op.field] = op.value;
    }
    Precommitted out;
    out.begin_ts = Csn{next_ - 1};
    out.csn = Csn{next_++};
    out.dsn = Csn{dsn};
    out.records.reserve(writes_.size());
    for (const Write& w : writes_) {
      row(w.table, w.rid) = out.csn.value;
      DeltaRecord r;
      r.kind = RecordKind::kUpdate;
      r.table_id = w.table;
      r.rid = w.rid;
      r.field_mask = w.mask;
      r.payload.resize(8 * static_cast<std::size_t>(std::popcount(w.mask)));
      std::byte* p = r.payload.data();
      for (std::uint32_t f = 0; f < 10; ++f) {
        if (!(w.mask >> f & 1)) continue;
        le::put_u64(p, w.values[f]);
        p += 8;
      }
      out.records.push_back(std::move(r));
    }
    return out;
  }

 private:
  struct Write {
    TableId table;
    Rid rid;
    std::uint64_t mask;
    std::array<std::uint64_t, 10> values;
  };

  Write* find(TableId table, Rid rid) {
    for (auto& w : writes_)
      if (w.table == table && w.rid == rid) return &w;
    return nullptr;
  }
  std::uint64_t& row(TableId table, Rid rid) { return table == kMainTable ? main_[rid] : handoff_.at(rid); }

  std::vector<std::uint64_t> main_;
  std::vector<std::uint64_t> handoff_;
  std::uint64_t next_ = 1;
  std::vector<Write> writes_;
};

// A pre-committed transaction whose entry has not been placed in a buffer.
struct Parked {
  std::size_t worker;
  PendingCommit commit;
  std::vector<DeltaRecord> records;
  std::size_t entry_bytes;
  Duration cpu;
  std::size_t txn_index;  // into result.txns, or npos
};

class Simulator {
 public:
  explicit Simulator(const SimConfig& cfg) : cfg_(cfg) {
    cfg_.workload.validate();
    cfg_.logging.worker_count = cfg_.workload.worker_threads;
    if (!cfg_.profile.supports_append) cfg_.logging.segment_append_limit = 1;
    cfg_.logging.validate();
    policy_.buckets = cfg_.buckets;
    policy_.ack = cfg_.ack;
    policy_.validate();
    if (cfg_.after_load && !cfg_.full_engine) throw ConfigError("after_load needs full_engine");
    if (!cfg_.bucket_seeds.empty() && cfg_.bucket_seeds.size() != cfg_.buckets.size())
      throw ConfigError("bucket_seeds must match buckets");

    model_.emplace(cfg_.profile, cfg_.latency_seed);
    for (std::size_t i = 0; i < cfg_.bucket_seeds.size(); ++i) model_->seed_bucket(cfg_.buckets[i], cfg_.bucket_seeds[i]);
    store_.emplace(StoreLimits{cfg_.logging.segment_append_limit, cfg_.logging.max_part_bytes});
  }

  SimResult run() {
    if (cfg_.full_engine) {
      engine_.emplace();
      load_tables(*engine_, cfg_.workload);
      if (cfg_.after_load) cfg_.after_load(*engine_);
    } else {
      light_.emplace(cfg_.workload);
    }
    result_.load_ts = Csn{next_csn().value - 1};

    const auto assignment = assign_groups(cfg_.logging);
    worker_log_ = assignment;
    const std::size_t logs = cfg_.logging.log_count();
    for (std::size_t l = 0; l < logs; ++l)
      groups_.push_back(std::make_unique<LogGroup>(static_cast<LogId>(l), cfg_.logging, clock_));
    in_flight_.resize(logs);
    parked_.resize(logs);
    seal_when_free_.assign(logs, false);
    timeout_gen_.assign(logs, ~std::uint64_t{0});
    pipeline_ = std::make_unique<CommitPipeline>(logs, cfg_.pipeline, [this] { return next_csn(); }, clock_);
    pipeline_->set_release_listener([this](const ReleaseEvent& ev) {
      latency_.add(ev.release_time - ev.enqueue_time);
      if (cfg_.record_releases) result_.releases.push_back(ev);
    });

    for (std::size_t w = 0; w < cfg_.workload.worker_threads; ++w)
      generators_.emplace_back(cfg_.workload, w, cfg_.logging.group_size);
    for (std::size_t w = 0; w < cfg_.workload.worker_threads; ++w) push(TimePoint{0}, EventKind::kWorker, w, 0);

    end_ = std::chrono::duration_cast<Duration>(std::chrono::duration<double>(cfg_.workload.duration_seconds));
    if (cfg_.max_txns > 0 && cfg_.workload.duration_seconds == 0) end_ = TimePoint::max();

    while (!events_.empty()) {
      const Event ev = events_.top();
      events_.pop();
      clock_.set(ev.at);
      switch (ev.kind) {
        case EventKind::kWorker: on_worker(ev.target); break;
        case EventKind::kFlushDone: on_flush_done(ev.target); break;
        case EventKind::kTimeout: on_timeout(ev.target, ev.generation); break;
      }
      pipeline_->drain_releasable();
      if (events_.empty()) shutdown_logs();
    }
    if (pipeline_->pending_count() != 0) throw std::logic_error("simulation ended with unreleased transactions");
    return finish();
  }

 private:
  Csn next_csn() const { return engine_ ? engine_->next_csn() : light_->next_csn(); }

  void push(TimePoint at, EventKind kind, std::size_t target, std::uint64_t generation) {
    events_.push(Event{at, seq_++, kind, static_cast<std::uint32_t>(target), generation});
  }

  bool issuing() const {
    if (cfg_.max_txns > 0 && committed_ >= cfg_.max_txns) return false;
    return clock_.now() < end_;
  }

  void on_worker(std::size_t w) {
    if (!issuing()) return;
    const auto& ops = generators_[w].next();
    const LogId log = worker_log_[w];
    Precommitted pc;
    if (engine_) {
      auto txn = engine_->begin();
      execute_ops(*engine_, txn, ops);
      pc = engine_->precommit(txn, [&](Csn csn, bool read_only) {
        if (!read_only) pipeline_->register_csn(log, csn);
      });
    } else {
      pc = light_->run(ops);
      if (!pc.records.empty()) pipeline_->register_csn(log, pc.csn);
    }
    ++committed_;
    std::size_t updates = 0;
    for (const Op& op : ops) updates += op.kind == Op::kUpdate;

    PendingCommit p{pc.csn, pc.dsn, pc.begin_ts, std::nullopt, Lsn{}, clock_.now(), {}};
    std::size_t txn_index = std::string::npos;
    if (cfg_.record_txns) {
      txn_index = result_.txns.size();
      result_.txns.push_back(TxnRecord{pc.csn, pc.dsn, std::nullopt, Lsn{}, clock_.now(), pc.records});
    }
    if (pc.records.empty()) {
      pipeline_->enqueue(std::move(p));
      push(clock_.now() + cfg_.cpu.cost(ops.size() - updates, updates, 0), EventKind::kWorker, w, 0);
      return;
    }
    p.log_id = log;
    const std::size_t entry_bytes = encoded_entry_size(pc.records);
    const Duration cpu = cfg_.cpu.cost(ops.size() - updates, updates, entry_bytes);
    Parked job{w, std::move(p), std::move(pc.records), entry_bytes, cpu, txn_index};
    if (!parked_[log].empty() || !place(log, job)) {
      ++result_.worker_stalls;
      parked_[log].push_back(std::move(job));
    }
  }

  // Copies the entry into the active buffer, sealing a full buffer when the
  // shadow is free. False when the worker has to wait for a flush.
  bool place(LogId log, Parked& job) {
    LogGroup& g = *groups_[log];
    ReservedSlot slot;
    if (!g.try_claim(job.entry_bytes, slot)) {
      auto r = g.seal_and_swap(SealReason::kFull, false);
      if (r.status == SealStatus::kShadowBusy) return false;
      if (r.status == SealStatus::kSealed) start_flush(log, std::move(*r.sealed));
      if (!g.try_claim(job.entry_bytes, slot)) return false;
    }
    encode_txn_entry_into(job.commit.csn, job.commit.dsn, job.records, slot.dest);
    g.complete(slot, job.commit.csn);
    job.commit.end_lsn = slot.end_lsn;
    if (job.txn_index != std::string::npos) {
      result_.txns[job.txn_index].log_id = log;
      result_.txns[job.txn_index].end_lsn = slot.end_lsn;
    }
    pipeline_->enqueue(std::move(job.commit));
    push(clock_.now() + job.cpu, EventKind::kWorker, job.worker, 0);
    arm_timeout(log);
    return true;
  }

  void arm_timeout(LogId log) {
    LogGroup& g = *groups_[log];
    const auto gen = g.active_generation();
    if (timeout_gen_[log] == gen) return;
    if (auto first = g.first_unflushed_time()) {
      timeout_gen_[log] = gen;
      push(*first + cfg_.logging.flush_timeout, EventKind::kTimeout, log, gen);
    }
  }

  void start_flush(LogId log, SealedBuffer sealed) {
    const auto target = flush_target(sealed);
    const bool use_put = !store_->supports_append() || !cfg_.profile.supports_append;
    ReplicatedAck ack =
        simulate_replicated_append(*store_, *model_, policy_, cfg_.retry, target.key, target.expected_offset,
                                   target.payload, use_put);
    ++flushes_;
    bytes_ += target.payload.size();
    if (cfg_.record_flushes) {
      FlushRecord f;
      f.log_id = log;
      f.reason = sealed.reason;
      f.key = target.key;
      f.offset = target.expected_offset;
      f.bytes = target.payload.size();
      if (cfg_.record_payloads) f.payload = target.payload;
      f.segment_index = sealed.segment_index;
      f.seals_segment = sealed.seals_segment;
      f.end_lsn = sealed.end_lsn;
      f.issued = clock_.now();
      f.acked = clock_.now() + ack.ack_latency;
      for (const auto& r : ack.replicas) f.replica_latency.push_back(r.completion);
      result_.flushes.push_back(std::move(f));
    }
    in_flight_[log] = std::move(sealed);
    push(clock_.now() + ack.ack_latency, EventKind::kFlushDone, log, 0);
  }

  void on_flush_done(LogId log) {
    LogGroup& g = *groups_[log];
    g.mark_durable(*in_flight_[log]);
    in_flight_[log].reset();
    pipeline_->update_log_durability(log, g.durable_lsn());

    const auto first = g.first_unflushed_time();
    const bool timed_out = first && clock_.now() - *first >= cfg_.logging.flush_timeout;
    if (!parked_[log].empty() || seal_when_free_[log] || timed_out || shutting_down_) {
      seal_when_free_[log] = false;
      const SealReason reason = !parked_[log].empty() ? SealReason::kFull
                                : shutting_down_      ? SealReason::kShutdown
                                                      : SealReason::kTimeout;
      auto r = g.seal_and_swap(reason, false);
      if (r.status == SealStatus::kSealed) start_flush(log, std::move(*r.sealed));
    }
    while (!parked_[log].empty()) {
      if (!place(log, parked_[log].front())) break;
      parked_[log].pop_front();
    }
  }

  void on_timeout(LogId log, std::uint64_t generation) {
    LogGroup& g = *groups_[log];
    if (g.active_generation() != generation) return;
    auto r = g.seal_and_swap(SealReason::kTimeout, false, generation);
    if (r.status == SealStatus::kSealed)
      start_flush(log, std::move(*r.sealed));
    else if (r.status == SealStatus::kShadowBusy)
      seal_when_free_[log] = true;
  }

  // Once no more work is scheduled, flush what is left in every buffer.
  void shutdown_logs() {
    shutting_down_ = true;
    for (std::size_t l = 0; l < groups_.size(); ++l) {
      if (in_flight_[l]) continue;
      auto r = groups_[l]->seal_and_swap(SealReason::kShutdown, false);
      if (r.status == SealStatus::kSealed) start_flush(static_cast<LogId>(l), std::move(*r.sealed));
    }
  }

  SimResult finish() {
    for (const auto& g : groups_) {
      const auto s = g->stats();
      result_.seals_full += s.seals_full;
      result_.seals_timeout += s.seals_timeout;
      result_.seals_shutdown += s.seals_shutdown;
    }
    result_.end_time = clock_.now();
    RunMetrics& m = result_.metrics;
    m.variant = cfg_.variant;
    m.workload = to_string(cfg_.workload.workload);
    m.dist = to_string(cfg_.workload.distribution);
    m.threads = cfg_.workload.worker_threads;
    m.group_size = cfg_.logging.group_size;
    m.buffer_bytes = cfg_.logging.buffer_bytes;
    m.tracking = to_string(cfg_.pipeline.mode);
    m.committed = committed_;
    m.aborted = 0;
    m.duration_s = cfg_.workload.duration_seconds > 0 ? cfg_.workload.duration_seconds : to_ms(result_.end_time) / 1e3;
    m.throughput = m.duration_s > 0 ? static_cast<double>(committed_) / m.duration_s : 0;
    m.fill_latency(latency_);
    const auto usage = snapshot(store_->counters());
    result_.requests = usage.requests;
    m.appends = store_->counters().count(OpKind::kAppend) + store_->counters().count(OpKind::kPut);
    m.bytes = usage.bytes_uploaded;
    m.cost_usd = estimate_cost(usage, cfg_.pricing);
    return std::move(result_);
  }

  SimConfig cfg_;
  ReplicationPolicy policy_;
  ManualClock clock_;
  std::optional<MvccEngine> engine_;
  std::optional<LastWriterEngine> light_;
  std::optional<LatencyModel> model_;
  std::optional<LengthOnlyStore> store_;
  std::vector<LogId> worker_log_;
  std::vector<std::unique_ptr<LogGroup>> groups_;
  std::vector<std::optional<SealedBuffer>> in_flight_;
  std::vector<std::deque<Parked>> parked_;
  std::vector<bool> seal_when_free_;
  std::vector<std::uint64_t> timeout_gen_;
  std::unique_ptr<CommitPipeline> pipeline_;
  std::vector<TxnGenerator> generators_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
  TimePoint end_{0};
  bool shutting_down_ = false;
  std::uint64_t committed_ = 0;
  std::uint64_t flushes_ = 0;
  std::uint64_t bytes_ = 0;
  LatencyRecorder latency_;
  SimResult result_;
};

}  // namespace

SimResult run_simulation(const SimConfig& config) { return Simulator(config).run(); }

}  // namespace objwal
