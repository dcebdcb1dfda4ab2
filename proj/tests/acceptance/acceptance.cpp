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

// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance            run all criteria
//   acceptance 1 8 12     run a subset
//
// Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../trace_oracle.hpp"
#include "objwal/bench.hpp"
#include "objwal/group_logging.hpp"
#include "objwal/recovery.hpp"
#include "objwal/simulation.hpp"

namespace fs = std::filesystem;
using namespace objwal;
using namespace objwal::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- 1: gCSN against a recomputation from the pending list -----------------

// Writers whose bytes are not yet known durable. Rebuilt into a minimum at
// every step; entries are dropped once durable since frontiers only advance.
class PendingListOracle {
 public:
  explicit PendingListOracle(std::size_t logs) : frontier_(logs) {}

  void apply(const TraceEvent& e) {
    switch (e.kind) {
      case TraceEvent::kDraw:
        next_ = e.csn.value + 1;
        if (e.log) pending_.push_back({e.csn.value, *e.log, std::nullopt});
        break;
      case TraceEvent::kEnqueue:
        for (auto& p : pending_)
          if (p.csn == e.csn.value) p.end = e.lsn;
        break;
      case TraceEvent::kFlush:
        frontier_[*e.log] = e.lsn;
        break;
      case TraceEvent::kDrain:
        break;
    }
  }

  std::uint64_t gcsn() {
    std::erase_if(pending_, [&](const Pending& p) { return p.end && !(frontier_[p.log] < *p.end); });
    std::uint64_t g = next_;
    for (const auto& p : pending_) g = std::min(g, p.csn);
    return g;
  }

 private:
  struct Pending {
    std::uint64_t csn;
    LogId log;
    std::optional<Lsn> end;
  };
  std::vector<Pending> pending_;
  std::vector<Lsn> frontier_;
  std::uint64_t next_ = 1;
};

TraceParams trace_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 7919);
  TraceParams tp;
  tp.logs = 4;
  tp.txns = seed % 4 == 0 ? 2000 : 1 + rng() % 2000;
  tp.read_only = 0.05 + 0.2 * static_cast<double>(rng() % 100) / 100.0;
  tp.dependency = 0.3 + 0.7 * static_cast<double>(rng() % 100) / 100.0;
  tp.seed = seed;
  return tp;
}

Outcome c1_gcsn_oracle() {
  const auto t0 = Clock::now();
  std::uint64_t steps = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const auto trace = make_trace(trace_params(seed));
    ManualClock clock;
    PipelineDriver driver(4, {}, clock);
    PendingListOracle oracle(4);
    // The full-map oracle cross-checks the pending-list one on early traces.
    std::optional<BruteForce> full;
    if (seed <= 20) full.emplace(4);
    for (const auto& e : trace) {
      driver.apply(e);
      oracle.apply(e);
      const std::uint64_t want = oracle.gcsn();
      const std::uint64_t got = driver.pipeline().compute_gcsn().value;
      if (got != want) return {false, fmt("trace %llu step %llu: gcsn %llu, oracle %llu", (unsigned long long)seed,
                                          (unsigned long long)steps, (unsigned long long)got, (unsigned long long)want)};
      if (full) {
        full->apply(e);
        if (full->gcsn().value != want) return {false, fmt("oracles disagree on trace %llu", (unsigned long long)seed)};
      }
      ++steps;
    }
  }
  const double s = seconds_since(t0);
  return {s < 60, fmt("1000 traces, %llu steps, exact match, %.1f s (limit 60 s)", (unsigned long long)steps, s)};
}

// --- 2: worked examples ---------------------------------------------------

Outcome c2_worked_examples() {
  const auto t0 = Clock::now();
  std::vector<std::string> bad;

  const std::vector<std::optional<Csn>> mins{std::nullopt, Csn{102}, Csn{104}, std::nullopt};
  if (compute_gcsn(mins, Csn{106}) != Csn{102}) bad.push_back("gcsn of log minimums");
  std::vector<LogDurabilityState> logs;
  for (LogId i = 0; i < 4; ++i) logs.emplace_back(i);
  logs[1].register_csn(Csn{102});
  logs[1].register_csn(Csn{103});
  logs[2].register_csn(Csn{104});
  logs[2].register_csn(Csn{105});
  if (compute_gcsn(logs, Csn{106}) != Csn{102}) bad.push_back("gcsn of log states");

  ManualClock clock;
  std::uint64_t next = 106;
  CommitPipeline p(4, {}, [&] { return Csn{next}; }, clock);
  auto writer = [&](std::uint64_t csn, std::uint64_t dsn, LogId log, std::uint64_t end) {
    p.register_csn(log, Csn{csn});
    p.enqueue({Csn{csn}, Csn{dsn}, Csn{0}, log, Lsn{log, 0, end}, TimePoint{0}, {}});
  };
  auto released = [&] {
    std::set<std::uint64_t> out;
    for (const auto& e : p.drain_releasable()) out.insert(e.csn.value);
    return out;
  };
  writer(98, 0, 3, 50);
  writer(99, 0, 3, 100);
  p.register_csn(0, Csn{100});
  p.register_csn(0, Csn{101});
  p.update_log_durability(3, Lsn{3, 0, 100});
  if (released() != std::set<std::uint64_t>{98, 99}) bad.push_back("T98/T99");
  writer(102, 98, 1, 70);
  writer(104, 102, 2, 70);
  writer(105, 99, 3, 170);
  for (LogId l : {1u, 2u}) p.update_log_durability(l, Lsn{l, 0, 70});
  p.update_log_durability(3, Lsn{3, 0, 170});
  if (p.compute_gcsn() != Csn{100}) bad.push_back("gcsn 100 while T100 is undurable");
  if (released() != std::set<std::uint64_t>{102, 105}) bad.push_back("releases {T102, T105}");
  if (p.is_released(Csn{104}) || p.pending_count() != 1) bad.push_back("T104 retained");

  const double s = seconds_since(t0);
  std::string detail = "gCSN = 102; releases {T102, T105}; T104 retained";
  for (const auto& b : bad) detail += "; mismatch: " + b;
  return {bad.empty() && s < 1, detail + fmt("; %.3f s", s)};
}

// --- 3: release-policy containment ----------------------------------------

// Exact dependency-graph rule with memoized closures.
class ExactOracle {
 public:
  explicit ExactOracle(std::size_t logs) : frontier_(logs) {}

  void apply(const TraceEvent& e) {
    switch (e.kind) {
      case TraceEvent::kDraw:
        txns_.push_back({e.csn.value, e.log, e.dsn.value, std::nullopt});
        break;
      case TraceEvent::kEnqueue:
        txns_[e.csn.value - 1].end = e.lsn;
        enqueued_.push_back(e.csn.value);
        break;
      case TraceEvent::kFlush:
        frontier_[*e.log] = e.lsn;
        break;
      case TraceEvent::kDrain:
        break;
    }
  }

  // Transactions that are enqueued and whose dsn chain is durable end to end.
  std::set<std::uint64_t> releasable() const {
    std::vector<char> closed(txns_.size() + 1, 0);
    for (const auto& t : txns_) {
      const bool own = !t.log || (t.end && !(frontier_[*t.log] < *t.end));
      closed[t.csn] = own && (t.dsn == 0 || closed[t.dsn]);
    }
    std::set<std::uint64_t> out;
    for (std::uint64_t c : enqueued_)
      if (closed[c]) out.insert(c);
    return out;
  }

 private:
  struct Txn {
    std::uint64_t csn;
    std::optional<LogId> log;
    std::uint64_t dsn;
    std::optional<Lsn> end;
  };
  std::vector<Txn> txns_;  // csn - 1
  std::vector<std::uint64_t> enqueued_;
  std::vector<Lsn> frontier_;
};

Outcome c3_release_ordering() {
  const auto t0 = Clock::now();
  std::uint64_t drains = 0, released = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const auto trace = make_trace(trace_params(seed));
    ManualClock clock;
    PipelineDriver txn(4, {TrackingMode::kTxnLevel}, clock), rec(4, {TrackingMode::kRecordLevel}, clock);
    ExactOracle exact(4);
    std::size_t total = 0;
    for (const auto& e : trace) {
      txn.apply(e);
      rec.apply(e);
      exact.apply(e);
      if (e.kind == TraceEvent::kDraw) ++total;
      if (e.kind != TraceEvent::kDrain) continue;
      ++drains;
      // The exact set is the durable-closure safety property itself.
      const auto ex = exact.releasable();
      const auto& r = rec.released();
      const auto& t = txn.released();
      if (!std::includes(r.begin(), r.end(), t.begin(), t.end()))
        return {false, fmt("trace %llu: txn-level released outside record-level", (unsigned long long)seed)};
      if (!std::includes(ex.begin(), ex.end(), r.begin(), r.end()))
        return {false, fmt("trace %llu: record-level released a non-closed txn", (unsigned long long)seed)};
    }
    if (txn.saw_duplicate() || rec.saw_duplicate())
      return {false, fmt("trace %llu: duplicate release", (unsigned long long)seed)};
    if (rec.released().size() != total || txn.released().size() != total)
      return {false, fmt("trace %llu: not everything released after final flush", (unsigned long long)seed)};
    released += total;
  }
  const double s = seconds_since(t0);
  return {s < 120, fmt("1000 traces, %llu drains, %llu txns: txn <= record <= exact, %.1f s (limit 120 s)",
                       (unsigned long long)drains, (unsigned long long)released, s)};
}

// --- 4: append requests under a replayed trace ----------------------------

struct ReplayCount {
  std::uint64_t appends = 0;
  std::uint64_t full = 0;
  std::uint64_t other = 0;
};

// Feeds the recorded entries, in csn order, through log groups; each sealed
// buffer is appended to a length-only store before the next seal.
ReplayCount replay(const std::vector<TxnRecord>& txns, std::size_t workers, std::size_t group, std::size_t buffer) {
  LoggingConfig cfg;
  cfg.worker_count = workers;
  cfg.group_size = group;
  cfg.buffer_bytes = buffer;
  cfg.per_thread_base_bytes = buffer / group;
  cfg.flush_timeout = from_ms(1e9);
  cfg.validate();
  LengthOnlyStore store;
  std::vector<std::unique_ptr<LogGroup>> logs;
  for (std::size_t l = 0; l < cfg.log_count(); ++l) logs.push_back(std::make_unique<LogGroup>(LogId(l), cfg));
  ReplayCount out;
  auto flush = [&](LogGroup& g, SealReason reason) {
    auto r = g.seal_and_swap(reason);
    if (r.status != SealStatus::kSealed) return;
    const auto t = flush_target(*r.sealed);
    store.append({"wal", t.key}, t.expected_offset, t.payload);
    g.mark_durable(*r.sealed);
    (reason == SealReason::kFull ? out.full : out.other)++;
  };
  for (const auto& t : txns) {
    if (!t.log_id) continue;
    LogGroup& g = *logs[*t.log_id / group];  // recorded with one log per worker
    const std::size_t n = encoded_entry_size(t.records);
    ReservedSlot slot;
    while (!g.try_claim(n, slot)) flush(g, SealReason::kFull);
    encode_txn_entry_into(t.csn, t.dsn, t.records, slot.dest);
    g.complete(slot, t.csn);
  }
  for (auto& g : logs) flush(*g, SealReason::kShutdown);
  out.appends = store.counters().count(OpKind::kAppend);
  return out;
}

Outcome c4_request_reduction() {
  const auto t0 = Clock::now();
  SimConfig c;
  c.workload.workload = WorkloadKind::kYcsbA;
  c.workload.record_count = 100'000;
  c.workload.worker_threads = 8;
  c.workload.duration_seconds = 60;
  c.max_txns = 400'000;
  c.logging.group_size = 1;
  c.logging.buffer_bytes = 512 * kKiB;
  c.logging.per_thread_base_bytes = 512 * kKiB;
  c.record_txns = true;
  const SimResult recorded = run_simulation(c);

  constexpr std::size_t B = 512 * kKiB;
  const ReplayCount g1 = replay(recorded.txns, 8, 1, B);
  const ReplayCount g2 = replay(recorded.txns, 8, 2, 2 * B);
  const double ratio = static_cast<double>(g2.appends) / static_cast<double>(g1.appends);
  const double full_share = static_cast<double>(g1.full + g2.full) / static_cast<double>(g1.appends + g2.appends);
  const double s = seconds_since(t0);
  const bool pass = std::abs(ratio - 0.5) <= 0.05 && full_share > 0.5 && s < 60;
  return {pass, fmt("%zu txns replayed; g1/512KiB %llu appends, g2/1MiB %llu appends, ratio %.3f (0.5 +- 0.05); "
                    "%.0f%% of seals full, no timeouts; %.1f s",
                    recorded.txns.size(), (unsigned long long)g1.appends, (unsigned long long)g2.appends, ratio,
                    100 * full_share, s)};
}

// --- 5-7: simulated throughput and latency --------------------------------

BenchConfig sim_run(WorkloadKind w, std::size_t group, std::size_t buffer, TrackingMode tracking, double seconds) {
  BenchConfig c;
  c.workload.workload = w;
  c.workload.distribution = Distribution::kUniform;
  c.workload.worker_threads = 8;
  c.workload.duration_seconds = seconds;
  c.logging.group_size = group;
  c.logging.buffer_bytes = buffer;
  c.logging.per_thread_base_bytes = std::min<std::size_t>(512 * kKiB, buffer / group);
  c.tracking = tracking;
  return c;
}

Outcome c5_throughput_parity() {
  const auto t0 = Clock::now();
  const auto g1 = run_benchmark(sim_run(WorkloadKind::kYcsbA, 1, 512 * kKiB, TrackingMode::kRecordLevel, 10));
  const auto g2 = run_benchmark(sim_run(WorkloadKind::kYcsbA, 2, kMiB, TrackingMode::kRecordLevel, 10));
  BenchConfig c4 = sim_run(WorkloadKind::kYcsbA, 4, kMiB, TrackingMode::kRecordLevel, 10);
  c4.logging.proportional = false;
  c4.logging.per_thread_base_bytes = 512 * kKiB;
  const auto g4 = run_benchmark(c4);
  const double diff = std::abs(g2.throughput - g1.throughput) / g1.throughput;
  const bool pass = diff <= 0.10 && g4.throughput < g2.throughput;
  return {pass, fmt("ycsb_a uniform: g1/512KiB %.0f txn/s, g2/1MiB %.0f txn/s (diff %.1f%%, limit 10%%), "
                    "g4/1MiB %.0f txn/s (must be below g2); %.0f s",
                    g1.throughput, g2.throughput, 100 * diff, g4.throughput, seconds_since(t0))};
}

Outcome c6_record_level_latency() {
  const auto t0 = Clock::now();
  const auto rec = run_benchmark(sim_run(WorkloadKind::kYcsbB, 2, kMiB, TrackingMode::kRecordLevel, 10));
  const auto txn = run_benchmark(sim_run(WorkloadKind::kYcsbB, 2, kMiB, TrackingMode::kTxnLevel, 10));
  const double drop = 1 - rec.avg_ms / txn.avg_ms;
  return {drop >= 0.15, fmt("ycsb_b uniform, 8 workers: record avg %.2f ms, txn avg %.2f ms, drop %.1f%% "
                            "(need >= 15%%); %.0f s",
                            rec.avg_ms, txn.avg_ms, 100 * drop, seconds_since(t0))};
}

Outcome c7_tail_latency() {
  const auto t0 = Clock::now();
  const auto naive = run_benchmark(sim_run(WorkloadKind::kYcsbA, 1, 512 * kKiB, TrackingMode::kTxnLevel, 30));
  const auto combined = run_benchmark(sim_run(WorkloadKind::kYcsbA, 2, kMiB, TrackingMode::kRecordLevel, 30));
  const double drop = 1 - combined.p999 / naive.p999;
  return {drop >= 0.30, fmt("ycsb_a uniform, jitter+spikes: naive g1/512KiB/txn p99.9 %.2f ms, combined "
                            "g2/1MiB/record p99.9 %.2f ms, drop %.1f%% (need >= 30%%); %.0f s",
                            naive.p999, combined.p999, 100 * drop, seconds_since(t0))};
}

// --- 8, 9: calibration and cost -------------------------------------------

Outcome c8_calibration() {
  const auto t0 = Clock::now();
  const auto ex = LatencyProfile::express().without_jitter();
  const auto st = LatencyProfile::standard().without_jitter();
  std::mt19937_64 rng(1);
  const Duration a512 = sample_latency(ex, OpKind::kAppend, 512 * kKiB, rng);
  const Duration a2m = sample_latency(ex, OpKind::kAppend, 2 * kMiB, rng);
  const Duration g256 = sample_latency(ex, OpKind::kGet, 256 * kKiB, rng);
  const Duration p2m = sample_latency(st, OpKind::kPut, 2 * kMiB, rng);
  const bool pass = a512 == from_ms(8) && a2m == from_ms(22) && g256 == from_ms(5) && p2m == from_ms(77);
  const double s = seconds_since(t0);
  return {pass && s < 1, fmt("express append 512KiB %.3f ms, append 2MiB %.3f ms, get 256KiB %.3f ms; "
                             "standard put 2MiB %.3f ms; %.3f s",
                             to_ms(a512), to_ms(a2m), to_ms(g256), to_ms(p2m), s)};
}

Outcome c9_cost() {
  CostSnapshot u;
  u.requests = 1'000'000;
  u.appends = 1'000'000;
  u.bytes_uploaded = 1'000'000ull * 2'000'000ull;
  const double cost = estimate_cost(u);
  return {std::abs(cost - 7.53) <= 0.01, fmt("1,000,000 x 2 MB appends: $%.4f (7.53 +- 0.01)", cost)};
}

// --- 10: crash at every flush boundary ------------------------------------

using RowMap = std::map<std::pair<TableId, Rid>, Bytes>;

void apply_record(RowMap& rows, const DeltaRecord& r) {
  const auto key = std::make_pair(r.table_id, r.rid);
  switch (r.kind) {
    case RecordKind::kInsert:
      rows[key] = r.payload;
      break;
    case RecordKind::kDelete:
      rows.erase(key);
      break;
    case RecordKind::kUpdate: {
      Bytes& img = rows.at(key);
      const std::size_t width = SchemaCatalog::fixed_default().layout(r.table_id).field_width;
      std::size_t src = 0;
      for (std::uint32_t f = 0; f < 64; ++f) {
        if (!(r.field_mask >> f & 1)) continue;
        std::copy_n(r.payload.begin() + static_cast<std::ptrdiff_t>(src), width,
                    img.begin() + static_cast<std::ptrdiff_t>(f * width));
        src += width;
      }
      break;
    }
  }
}

RowMap visible(MvccEngine& e, Csn ts) {
  RowMap out;
  for (TableId t : e.table_ids())
    e.scan(t, ts, [&](Rid rid, Csn, ByteView img) { out[{t, rid}] = Bytes(img.begin(), img.end()); });
  return out;
}

struct CrashStats {
  std::size_t states = 0;
  std::size_t txns = 0;
  std::size_t released_checked = 0;
  std::size_t partial_states = 0;  // states where some logged txn was excluded
  std::size_t ancestor_cuts = 0;   // durable txns excluded for a non-durable ancestor
};

// Empty string on success.
std::string crash_trace(std::uint64_t seed, const fs::path& dir, CrashStats& stats) {
  SimConfig c;
  static constexpr WorkloadKind kinds[] = {WorkloadKind::kYcsbA, WorkloadKind::kDepStress, WorkloadKind::kYcsbB};
  c.workload.workload = kinds[seed % 3];
  c.workload.distribution = Distribution::kZipfian;
  c.workload.record_count = 1000;
  c.workload.worker_threads = 4;
  c.workload.duration_seconds = 60;
  c.workload.seed = seed;
  c.workload.handoff_fraction = 0.4;
  c.max_txns = 500 + seed % 200;
  c.latency_seed = seed;
  c.logging.group_size = 2;
  c.logging.buffer_bytes = 4 * kKiB;
  c.logging.per_thread_base_bytes = 2 * kKiB;
  c.logging.segment_append_limit = 4;
  c.full_engine = true;
  c.record_flushes = c.record_payloads = c.record_txns = c.record_releases = true;

  MemoryObjectStore ckpt_store;
  Csn ckpt_ts;
  RowMap base;
  c.after_load = [&](MvccEngine& e) {
    ckpt_ts = e.pin_snapshot();
    write_checkpoint(e, ckpt_ts, ckpt_store, "wal");
    e.unpin_snapshot(ckpt_ts);
    base = visible(e, ckpt_ts);
  };
  const SimResult run = run_simulation(c);
  if (run.txns.size() < 500) return "fewer than 500 transactions";
  stats.txns += run.txns.size();

  fs::remove_all(dir);
  LocalDirObjectStore store(dir, false, StoreLimits{c.logging.segment_append_limit, c.logging.max_part_bytes});
  for (const auto& key : ckpt_store.list("wal", "ckpt-")) store.put({"wal", key}, ckpt_store.get({"wal", key}));

  std::vector<const FlushRecord*> order;
  for (const auto& f : run.flushes) order.push_back(&f);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->acked < b->acked; });

  std::map<LogId, Lsn> frontier;
  std::set<std::uint64_t> prev_expected;
  for (std::size_t k = 0; k <= order.size(); ++k) {
    // State k: the first k acknowledged flushes reached storage.
    if (k > 0) {
      const FlushRecord& f = *order[k - 1];
      store.append({"wal", f.key}, f.offset, f.payload);
      auto [it, fresh] = frontier.emplace(f.log_id, f.end_lsn);
      if (!fresh) it->second = std::max(it->second, f.end_lsn);
    }
    const TimePoint next_ack = k < order.size() ? order[k]->acked : TimePoint::max();

    std::set<std::uint64_t> expected;
    std::size_t logged = 0;
    RowMap rows = base;
    for (const auto& t : run.txns) {
      if (!t.log_id) continue;
      ++logged;
      auto it = frontier.find(*t.log_id);
      const bool own = it != frontier.end() && t.end_lsn <= it->second;
      const bool pred = t.dsn.value == 0 || t.dsn <= ckpt_ts || expected.contains(t.dsn.value);
      if (own && pred) {
        expected.insert(t.csn.value);
        for (const auto& r : t.records) apply_record(rows, r);
      } else if (own) {
        ++stats.ancestor_cuts;
      }
    }
    if (!std::includes(expected.begin(), expected.end(), prev_expected.begin(), prev_expected.end()))
      return fmt("state %zu: durable closure shrank", k);
    if (expected.size() < logged) ++stats.partial_states;

    RecoverOptions ro;
    ro.parallel = false;
    const RecoveryResult r = recover(store, "wal", SchemaCatalog::fixed_default(), ro);
    std::set<std::uint64_t> got;
    for (Csn x : r.replayed_csns) got.insert(x.value);
    if (r.checkpoint_ts != ckpt_ts) return fmt("state %zu: wrong checkpoint", k);
    if (got != expected) {
      std::vector<std::uint64_t> extra, missing;
      std::set_difference(got.begin(), got.end(), expected.begin(), expected.end(), std::back_inserter(extra));
      std::set_difference(expected.begin(), expected.end(), got.begin(), got.end(), std::back_inserter(missing));
      return fmt("state %zu/%zu: %zu unexpected, %zu missing (first %llu)", k, order.size(), extra.size(),
                 missing.size(),
                 (unsigned long long)(extra.empty() ? missing.front() : extra.front()));
    }
    if (visible(*r.engine, r.next_csn) != rows) return fmt("state %zu: recovered rows differ", k);
    for (const auto& ev : run.releases) {
      if (!ev.log_id || ev.release_time >= next_ack) continue;
      ++stats.released_checked;
      if (!got.contains(ev.csn.value))
        return fmt("state %zu: released csn %llu lost", k, (unsigned long long)ev.csn.value);
    }
    prev_expected = std::move(expected);
    ++stats.states;
  }
  return {};
}

Outcome c10_crash_recovery() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / "objwal_acceptance_crash";
  CrashStats stats;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const std::string err = crash_trace(seed, root / std::to_string(seed % 4), stats);
    if (!err.empty()) return {false, fmt("trace %llu: %s", (unsigned long long)seed, err.c_str())};
  }
  fs::remove_all(root);
  const double s = seconds_since(t0);
  return {s < 600, fmt("200 traces, %zu txns, %zu crash states (%zu with excluded txns, %zu durable entries cut "
                       "for a non-durable ancestor), %zu released checks; exact durable-closure state every time; "
                       "%.0f s (limit 600 s)",
                       stats.txns, stats.states, stats.partial_states, stats.ancestor_cuts, stats.released_checked, s)};
}

// --- 11: segment mechanics ------------------------------------------------

DeltaRecord row_insert(Rid rid) {
  DeltaRecord r;
  r.kind = RecordKind::kInsert;
  r.table_id = kMainTable;
  r.rid = rid;
  r.field_mask = TableLayout{}.full_mask();
  r.payload.resize(80);
  for (int f = 0; f < 10; ++f) le::put_u64(r.payload.data() + 8 * f, rid * 10 + f);
  return r;
}

std::string segment_run(ObjectStore& store, std::uint32_t limit) {
  LoggingConfig cfg;
  cfg.worker_count = 1;
  cfg.group_size = 1;
  cfg.buffer_bytes = 4 * kKiB;
  cfg.per_thread_base_bytes = 4 * kKiB;
  cfg.segment_append_limit = limit;
  LogGroup g(0, cfg);
  const std::uint64_t flushes = 2 * std::uint64_t{limit} + limit / 2 + 1;
  for (std::uint64_t i = 0; i < flushes; ++i) {
    const std::vector<DeltaRecord> recs{row_insert(i)};
    ReservedSlot slot;
    if (!g.try_claim(encoded_entry_size(recs), slot)) return "claim failed";
    encode_txn_entry_into(Csn{i + 1}, kNoCsn, recs, slot.dest);
    g.complete(slot, Csn{i + 1});
    auto r = g.seal_and_swap(SealReason::kTimeout);
    const auto t = flush_target(*r.sealed);
    store.append({"wal", t.key}, t.expected_offset, t.payload);
    g.mark_durable(*r.sealed);
  }

  const auto segs = list_segments(store, "wal");
  const std::size_t want_segs = (flushes + limit - 1) / limit;
  if (segs.size() != want_segs) return fmt("%zu segments, want %zu", segs.size(), want_segs);
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const bool full = (s + 1) * limit <= flushes;
    const std::string want_key = "log-0-seg-" + std::to_string(s + 1);
    if (segs[s].key != want_key) return "unexpected key " + segs[s].key;
    const auto info = store.head({"wal", want_key});
    const std::uint64_t parts = full ? limit : flushes - s * limit;
    if (!info || info->parts != parts) return fmt("%s has %u parts", want_key.c_str(), info ? info->parts : 0);
    const SegmentFooter want{Csn{s * limit + 1}, Csn{s * limit + limit}, limit};
    if (full && segs[s].footer != want) return want_key + " footer wrong";
    if (!full && segs[s].footer) return want_key + " sealed early";
  }

  RecoverOptions ro;
  ro.parallel = false;
  auto r = recover(store, "wal", SchemaCatalog::fixed_default(), ro);
  if (r.replayed != flushes || r.next_csn != Csn{flushes + 1}) return fmt("replayed %zu of all", r.replayed);
  if (r.engine->count_visible(kMainTable, r.next_csn) != flushes) return "row count after recovery";
  if (r.logs[0].next_segment != want_segs) return "next segment";
  // Without the unsealed tail segment, replay ends exactly at the boundary.
  store.remove({"wal", segs.back().key});
  r = recover(store, "wal", SchemaCatalog::fixed_default(), ro);
  if (r.replayed != 2 * std::uint64_t{limit}) return fmt("replayed %zu across the boundary", r.replayed);
  return {};
}

Outcome c11_segments() {
  const auto t0 = Clock::now();
  const fs::path dir = fs::temp_directory_path() / "objwal_acceptance_segments";
  fs::remove_all(dir);
  std::string err;
  {
    LocalDirObjectStore local(dir, false, StoreLimits{100, kDefaultMaxPartBytes});
    err = segment_run(local, 100);
  }
  fs::remove_all(dir);
  if (!err.empty()) return {false, "limit 100: " + err};
  MemoryObjectStore mem(StoreLimits{10'000, kDefaultMaxPartBytes});
  err = segment_run(mem, 10'000);
  if (!err.empty()) return {false, "limit 10000: " + err};
  const double s = seconds_since(t0);
  return {s < 60, fmt("limit 100 (251 flushes, localdir) and 10000 (25001 flushes): sealed segments of exactly "
                      "limit parts, recovery across boundaries; %.1f s",
                      s)};
}

// --- 12: corruption sweep -------------------------------------------------

Outcome c12_corruption() {
  const auto t0 = Clock::now();
  std::vector<TxnEntry> entries;
  std::vector<std::size_t> starts;
  Bytes log;
  for (std::uint64_t i = 0; i < 3; ++i) {
    TxnEntry e;
    e.csn = Csn{100 + i};
    e.dsn = Csn{i == 0 ? 0 : 99 + i};
    DeltaRecord upd{RecordKind::kUpdate, kMainTable, 7 + i, 0b1010, Bytes(16, std::byte(i))};
    e.records = {row_insert(40 + i), upd};
    if (i == 2) e.records.push_back({RecordKind::kDelete, kHandoffTable, 3, 0, {}});
    starts.push_back(log.size());
    const Bytes b = encode_txn_entry(e.csn, e.dsn, e.records);
    log.insert(log.end(), b.begin(), b.end());
    entries.push_back(std::move(e));
  }
  std::uint64_t cases = 0;
  for (std::size_t pos = 0; pos < log.size(); ++pos) {
    const std::size_t hit = static_cast<std::size_t>(std::upper_bound(starts.begin(), starts.end(), pos) - starts.begin()) - 1;
    for (int delta = 1; delta < 256; ++delta) {
      Bytes bad = log;
      bad[pos] ^= std::byte(delta);
      std::size_t end = 0;
      std::vector<TxnEntry> got;
      try {
        got = decode_all(bad, 0, SchemaCatalog::fixed_default(), &end);
      } catch (const std::exception& ex) {
        return {false, fmt("byte %zu ^ %d threw: %s", pos, delta, ex.what())};
      }
      // The damaged entry and everything after it must be cut.
      if (got.size() != hit || end != starts[hit]) return {false, fmt("byte %zu ^ %d decoded %zu entries", pos, delta, got.size())};
      for (std::size_t i = 0; i < got.size(); ++i)
        if (got[i] != entries[i]) return {false, fmt("byte %zu ^ %d mis-decoded entry %zu", pos, delta, i)};
      ++cases;
    }
  }
  const double s = seconds_since(t0);
  return {s < 60, fmt("%zu-byte log, %llu corruptions (every position x every xor): clean prefix each time; %.2f s",
                      log.size(), (unsigned long long)cases, s)};
}

// --- 13: replication ack ---------------------------------------------------

Outcome c13_replication() {
  const auto t0 = Clock::now();
  const std::vector<std::string> buckets{"wal-r0", "wal-r1", "wal-r2"};
  const std::vector<std::uint64_t> seeds{1001, 2002, 3003};
  std::string detail;
  for (AckPolicy ack : {AckPolicy::kMajority, AckPolicy::kAll}) {
    SimConfig c;
    c.workload.record_count = 10'000;
    c.workload.worker_threads = 8;
    c.workload.duration_seconds = 4;
    c.logging.group_size = 2;
    c.logging.buffer_bytes = 32 * kKiB;
    c.logging.per_thread_base_bytes = 16 * kKiB;
    c.buckets = buckets;
    c.bucket_seeds = seeds;
    c.ack = ack;
    c.record_flushes = true;
    const SimResult r = run_simulation(c);
    if (r.flushes.size() < 1000) return {false, fmt("only %zu flushes", r.flushes.size())};

    // Independent draw of the same per-replica streams.
    LatencyModel oracle(c.profile, c.latency_seed);
    for (std::size_t i = 0; i < buckets.size(); ++i) oracle.seed_bucket(buckets[i], seeds[i]);
    double worst = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
      const FlushRecord& f = r.flushes[i];
      std::vector<Duration> lat;
      for (const auto& b : buckets) lat.push_back(oracle.sample(b, OpKind::kAppend, f.bytes));
      if (lat != f.replica_latency) return {false, fmt("flush %zu: replica latencies differ from the model", i)};
      std::sort(lat.begin(), lat.end());
      const Duration want = ack == AckPolicy::kMajority ? lat[1] : lat[2];
      const double err = std::abs(to_ms(f.acked - f.issued) - to_ms(want));
      worst = std::max(worst, err);
      if (err > 1.0)
        return {false, fmt("flush %zu: ack after %.3f ms, want %.3f ms", i, to_ms(f.acked - f.issued), to_ms(want))};
    }
    detail += fmt("%s: 1000 flushes, max error %.6f ms; ", ack == AckPolicy::kMajority ? "majority = 2nd smallest"
                                                                                        : "all = maximum",
                  worst);
  }
  const double s = seconds_since(t0);
  return {s < 30, detail + fmt("%.1f s", s)};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "gCSN oracle equivalence", c1_gcsn_oracle},
    {2, "worked examples", c2_worked_examples},
    {3, "release-policy ordering", c3_release_ordering},
    {4, "request-count reduction", c4_request_reduction},
    {5, "throughput parity", c5_throughput_parity},
    {6, "record-level latency benefit", c6_record_level_latency},
    {7, "tail-latency benefit", c7_tail_latency},
    {8, "latency-model calibration", c8_calibration},
    {9, "cost arithmetic", c9_cost},
    {10, "crash-recovery soundness", c10_crash_recovery},
    {11, "segment mechanics", c11_segments},
    {12, "format robustness", c12_corruption},
    {13, "replication policy", c13_replication},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!wanted.empty() && !wanted.contains(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << std::endl;
  }
  return failed;
}
