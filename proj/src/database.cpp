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

#include "objwal/database.hpp"

#include <future>

namespace objwal {

struct Database::Flusher {
  Flusher(LogId id, const LoggingConfig& cfg, Clock& clock, std::uint32_t first_segment, ObjectStore& store,
          ReplicationPolicy policy, RetryPolicy retry)
      : group(id, cfg, clock, first_segment), appender(store, std::move(policy), retry, clock) {}

  void submit(SealedBuffer s) {
    {
      std::lock_guard lock(mu);
      queue.push_back(std::move(s));
    }
    cv.notify_one();
  }

  void poke() {
    { std::lock_guard lock(mu); }
    cv.notify_one();
  }

  LogGroup group;
  ReplicatedAppender appender;
  std::mutex mu;
  std::condition_variable cv;
  std::deque<SealedBuffer> queue;
  bool stopping = false;
  std::thread thread;

  std::atomic<std::uint64_t> flushes{0};
  std::atomic<std::uint64_t> bytes{0};
};

std::unique_ptr<Database> Database::create(ObjectStore& store, DatabaseOptions options) {
  const SchemaCatalog& catalog = options.catalog ? *options.catalog : SchemaCatalog::fixed_default();
  return std::unique_ptr<Database>(
      new Database(store, std::move(options), std::make_unique<MvccEngine>(catalog), {}));
}

std::unique_ptr<Database> Database::open(ObjectStore& store, DatabaseOptions options, RecoveryResult* recovery) {
  if (options.buckets.empty()) throw ConfigError("at least one bucket is required");
  const SchemaCatalog& catalog = options.catalog ? *options.catalog : SchemaCatalog::fixed_default();
  RecoverOptions ro;
  ro.replicas = options.buckets;
  RecoveryResult r = recover(store, options.buckets.front(), catalog, ro);
  auto engine = std::move(r.engine);
  auto logs = r.logs;
  if (recovery) *recovery = std::move(r);
  return std::unique_ptr<Database>(new Database(store, std::move(options), std::move(engine), logs));
}

Database::Database(ObjectStore& store, DatabaseOptions options, std::unique_ptr<MvccEngine> engine,
                   const std::map<LogId, LogRecoveryInfo>& logs)
    : store_(store),
      options_(std::move(options)),
      clock_(options_.clock ? *options_.clock : SteadyClock::instance()),
      engine_(std::move(engine)) {
  // Without append every flush is a fresh object.
  if (!store_.supports_append()) options_.logging.segment_append_limit = 1;
  options_.logging.validate();
  ReplicationPolicy policy{options_.buckets, options_.ack};
  policy.validate();

  worker_log_ = assign_groups(options_.logging);
  const std::size_t n = options_.logging.log_count();
  pipeline_ = std::make_unique<CommitPipeline>(n, options_.pipeline, [this] { return engine_->next_csn(); }, clock_);
  pipeline_->set_release_listener([this](const ReleaseEvent&) { released_.fetch_add(1, std::memory_order_relaxed); });
  for (std::size_t l = 0; l < n; ++l) {
    const auto id = static_cast<LogId>(l);
    auto it = logs.find(id);
    const std::uint32_t first = it == logs.end() ? 0 : it->second.next_segment;
    flushers_.push_back(
        std::make_unique<Flusher>(id, options_.logging, clock_, first, store_, policy, options_.retry));
    // The pipeline's frontier starts where the log does.
    if (first > 0) pipeline_->update_log_durability(id, Lsn{id, first, 0});
  }
  for (auto& f : flushers_) f->thread = std::thread([this, p = f.get()] { flusher_loop(*p); });
  releaser_ = std::thread([this] { releaser_loop(); });
}

Database::~Database() {
  try {
    shutdown();
  } catch (const BackendFailure&) {
  }
}

void Database::throw_if_failed() const {
  if (!failed()) return;
  std::lock_guard lock(error_mu_);
  throw BackendFailure(error_);
}

void Database::fail(const std::string& what) {
  {
    std::lock_guard lock(error_mu_);
    if (error_.empty()) error_ = what;
  }
  failed_.store(true, std::memory_order_release);
  wake_releaser();
}

void Database::wake_releaser() {
  {
    std::lock_guard lock(release_mu_);
    release_dirty_ = true;
  }
  release_cv_.notify_one();
}

Csn Database::commit(std::size_t worker, Transaction& txn, std::function<void(const ReleaseEvent&)> on_release) {
  throw_if_failed();
  if (stopped_.load(std::memory_order_acquire)) throw std::logic_error("commit after shutdown");
  const LogId log = worker_log_.at(worker);
  auto pc = engine_->precommit(txn, [&](Csn csn, bool read_only) {
    if (!read_only) pipeline_->register_csn(log, csn);
  });
  committed_.fetch_add(1, std::memory_order_relaxed);
  PendingCommit p{pc.csn, pc.dsn, pc.begin_ts, std::nullopt, Lsn{}, clock_.now(), std::move(on_release)};
  if (!pc.records.empty()) {
    Flusher& f = *flushers_[log];
    const std::size_t nbytes = encoded_entry_size(pc.records);
    ReservedSlot slot;
    try {
      slot = f.group.reserve(nbytes, [&f](SealedBuffer s) { f.submit(std::move(s)); });
    } catch (const EntryTooLarge&) {
      // The versions are already visible but will never be logged.
      pipeline_->forget_csn(log, pc.csn);
      throw;
    }
    encode_txn_entry_into(pc.csn, pc.dsn, pc.records, slot.dest);
    f.group.complete(slot, pc.csn);
    if (slot.offset == 0) f.poke();  // starts this buffer's timeout
    p.log_id = log;
    p.end_lsn = slot.end_lsn;
  }
  pipeline_->enqueue(std::move(p));
  wake_releaser();
  return pc.csn;
}

ReleaseEvent Database::commit_and_wait(std::size_t worker, Transaction& txn) {
  auto promise = std::make_shared<std::promise<ReleaseEvent>>();
  auto fut = promise->get_future();
  commit(worker, txn, [promise](const ReleaseEvent& ev) { promise->set_value(ev); });
  while (fut.wait_for(std::chrono::milliseconds(10)) != std::future_status::ready) throw_if_failed();
  return fut.get();
}

void Database::flusher_loop(Flusher& f) {
  const Duration timeout = options_.logging.flush_timeout;
  const auto key_of = [](const SealedBuffer& s) { return flush_target(s); };
  for (;;) {
    std::optional<SealedBuffer> job;
    bool stopping = false;
    {
      std::unique_lock lock(f.mu);
      if (!f.queue.empty()) {
        job = std::move(f.queue.front());
        f.queue.pop_front();
      }
      stopping = f.stopping;
    }
    if (!job) {
      const auto gen = f.group.active_generation();
      const auto first = f.group.first_unflushed_time();
      const TimePoint now = clock_.now();
      const bool due = first && (stopping || now >= *first + timeout);
      if (due) {
        auto r = f.group.seal_and_swap(stopping ? SealReason::kShutdown : SealReason::kTimeout, false, gen);
        if (r.status == SealStatus::kSealed) job = std::move(r.sealed);
      } else if (stopping && !f.group.shadow_in_flight()) {
        return;
      }
      if (!job) {
        std::unique_lock lock(f.mu);
        if (!f.queue.empty() || f.stopping != stopping) continue;
        Duration wait = first ? *first + timeout - now : timeout;
        if (due || wait < Duration(100'000)) wait = Duration(100'000);
        f.cv.wait_for(lock, wait);
        continue;
      }
    }

    if (failed()) {
      // Frees the shadow buffer so blocked workers see the failure.
      f.group.mark_durable(*job);
      continue;
    }
    const FlushTarget target = key_of(*job);
    try {
      f.appender.append(target.key, target.expected_offset, target.payload);
    } catch (const std::exception& e) {
      fail("flush of " + target.key + " failed: " + e.what());
      f.group.mark_durable(*job);
      continue;
    }
    f.flushes.fetch_add(1, std::memory_order_relaxed);
    f.bytes.fetch_add(target.payload.size(), std::memory_order_relaxed);
    f.group.mark_durable(*job);
    pipeline_->update_log_durability(f.group.id(), job->end_lsn);
    wake_releaser();
  }
}

void Database::releaser_loop() {
  for (;;) {
    bool stop = false;
    {
      std::unique_lock lock(release_mu_);
      release_cv_.wait_for(lock, std::chrono::milliseconds(1), [&] { return release_dirty_ || release_stop_; });
      release_dirty_ = false;
      stop = release_stop_;
    }
    pipeline_->drain_releasable();
    if (stop) return;
  }
}

CheckpointMeta Database::checkpoint() {
  std::lock_guard ck(checkpoint_mu_);
  throw_if_failed();
  const Csn ts = engine_->pin_snapshot();
  struct Unpin {
    MvccEngine& e;
    Csn ts;
    ~Unpin() { e.unpin_snapshot(ts); }
  } unpin{*engine_, ts};
  // Everything in the image must be durable first.
  while (pipeline_->compute_gcsn() <= ts) {
    throw_if_failed();
    for (auto& f : flushers_) f->poke();
    clock_.sleep_for(from_ms(0.2));
  }
  CheckpointMeta meta;
  for (const auto& b : options_.buckets) meta = write_checkpoint(*engine_, ts, store_, b, clock_);
  if (options_.truncate_after_checkpoint)
    for (const auto& b : options_.buckets) truncate(meta, store_, b);
  checkpoints_.fetch_add(1, std::memory_order_relaxed);
  return meta;
}

void Database::shutdown() {
  if (stopped_.exchange(true)) {
    throw_if_failed();
    return;
  }
  for (auto& f : flushers_) {
    {
      std::lock_guard lock(f->mu);
      f->stopping = true;
    }
    f->cv.notify_one();
  }
  for (auto& f : flushers_) f->thread.join();
  for (auto& f : flushers_) f->appender.wait_idle();
  {
    std::lock_guard lock(release_mu_);
    release_stop_ = true;
  }
  release_cv_.notify_one();
  releaser_.join();
  throw_if_failed();
  if (pipeline_->pending_count() != 0) throw std::logic_error("shutdown left unreleased transactions");
}

DatabaseStats Database::stats() const {
  DatabaseStats s;
  for (const auto& f : flushers_) {
    s.flushes += f->flushes.load();
    s.flushed_bytes += f->bytes.load();
    const auto g = f->group.stats();
    s.seals_full += g.seals_full;
    s.seals_timeout += g.seals_timeout;
    s.seals_shutdown += g.seals_shutdown;
  }
  s.committed = committed_.load();
  s.released = released_.load();
  s.checkpoints = checkpoints_.load();
  return s;
}

}  // namespace objwal
