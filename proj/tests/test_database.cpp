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

#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <random>
#include <thread>

#include "objwal/database.hpp"
#include "objwal/workload.hpp"

namespace objwal {
namespace {

namespace fs = std::filesystem;

DatabaseOptions small_options(std::size_t workers = 4) {
  DatabaseOptions o;
  o.logging.worker_count = workers;
  o.logging.group_size = 2;
  o.logging.per_thread_base_bytes = 2 * kKiB;
  o.logging.buffer_bytes = 4 * kKiB;
  o.logging.flush_timeout = from_ms(1);
  o.logging.segment_append_limit = 4;
  return o;
}

std::map<Rid, Bytes> rows(MvccEngine& e, TableId t = kMainTable) {
  std::map<Rid, Bytes> out;
  e.scan(t, Csn{e.next_csn().value - 1}, [&](Rid rid, Csn, ByteView img) { out[rid] = Bytes(img.begin(), img.end()); });
  return out;
}

void load(Database& db, Rid count) {
  db.engine().create_table(kMainTable);
  for (Rid start = 0; start < count; start += 20) {
    auto txn = db.engine().begin();
    for (Rid r = start; r < std::min<Rid>(count, start + 20); ++r)
      db.engine().insert(txn, kMainTable, r, initial_image(kMainTable, r));
    db.commit(0, txn);
  }
}

void update_rows(Database& db, std::size_t worker, int n, std::uint64_t seed, Rid count) {
  std::mt19937_64 rng(seed);
  std::byte v[8];
  for (int i = 0; i < n; ++i) {
    auto txn = db.engine().begin();
    try {
      for (int k = 0; k < 3; ++k) {
        le::put_u64(v, rng());
        db.engine().update(txn, kMainTable, rng() % count, std::uint64_t{1} << (rng() % 10), ByteView(v, 8));
      }
    } catch (const WriteConflict&) {
      db.engine().abort(txn);
      continue;
    }
    db.commit(worker, txn);
  }
}

TEST(Database, CommitAndWaitReleasesDurableTransaction) {
  MemoryObjectStore store;
  auto db = Database::create(store, small_options());
  load(*db, 10);
  auto txn = db->engine().begin();
  std::byte v[8]{};
  db->engine().update(txn, kMainTable, 3, 1, ByteView(v, 8));
  const auto ev = db->commit_and_wait(1, txn);
  EXPECT_EQ(ev.log_id, LogId{0});
  EXPECT_GE(ev.release_time, ev.enqueue_time);
  EXPECT_LE(db->pipeline().log_state(0).nondurable().size(), 0u);
  // A read-only transaction releases too.
  auto ro = db->engine().begin();
  db->engine().read(ro, kMainTable, 3);
  EXPECT_FALSE(db->commit_and_wait(3, ro).log_id.has_value());
  db->shutdown();
  EXPECT_FALSE(store.list("wal", "log-0-seg-").empty());
  EXPECT_EQ(db->stats().released, db->stats().committed);
}

TEST(Database, ConcurrentWorkersSurviveRestarts) {
  const fs::path dir = fs::temp_directory_path() / "objwal_db_restart";
  fs::remove_all(dir);
  LocalDirObjectStore store(dir, false);
  std::map<Rid, Bytes> expected;
  {
    auto db = Database::create(store, small_options());
    load(*db, 200);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < 4; ++w) workers.emplace_back([&, w] { update_rows(*db, w, 300, w + 1, 200); });
    for (auto& t : workers) t.join();
    db->shutdown();
    EXPECT_GT(db->stats().flushes, 8u);
    expected = rows(db->engine());
  }
  RecoveryResult info;
  auto db = Database::open(store, small_options(), &info);
  EXPECT_EQ(rows(db->engine()), expected);
  EXPECT_EQ(info.excluded, 0u);
  const auto before = store.list("wal", "log-");
  update_rows(*db, 2, 100, 77, 200);
  db->shutdown();
  expected = rows(db->engine());
  // The restarted log wrote new segments instead of touching old ones.
  for (const auto& key : store.list("wal", "log-"))
    if (std::find(before.begin(), before.end(), key) == before.end()) EXPECT_TRUE(key.starts_with("log-1-seg-"));

  auto again = Database::open(store, small_options());
  EXPECT_EQ(rows(again->engine()), expected);
  again->shutdown();
  fs::remove_all(dir);
}

TEST(Database, CheckpointTruncatesAndRecovers) {
  MemoryObjectStore store;
  std::map<Rid, Bytes> expected;
  {
    auto db = Database::create(store, small_options());
    load(*db, 100);
    update_rows(*db, 0, 200, 5, 100);
    const auto segments_before = store.list("wal", "log-").size();
    const auto meta = db->checkpoint();
    EXPECT_GT(meta.checkpoint_ts, Csn{200});
    EXPECT_LT(store.list("wal", "log-").size(), segments_before);
    update_rows(*db, 3, 50, 6, 100);
    db->shutdown();
    expected = rows(db->engine());
  }
  RecoveryResult info;
  auto db = Database::open(store, small_options(), &info);
  ASSERT_TRUE(info.checkpoint.has_value());
  EXPECT_EQ(rows(db->engine()), expected);
  db->shutdown();
}

TEST(Database, FailedFlushSurfacesAsBackendFailure) {
  MemoryObjectStore store;
  auto opts = small_options();
  opts.retry.max_retries = 1;
  opts.retry.initial_backoff = from_ms(1);
  auto db = Database::create(store, opts);
  db->engine().create_table(kMainTable);
  store.inject_append_failures("wal", 100);
  auto txn = db->engine().begin();
  db->engine().insert(txn, kMainTable, 1, initial_image(kMainTable, 1));
  EXPECT_THROW(db->commit_and_wait(0, txn), BackendFailure);
  EXPECT_TRUE(db->failed());
  auto next = db->engine().begin();
  EXPECT_THROW(db->commit(0, next), BackendFailure);
  EXPECT_THROW(db->shutdown(), BackendFailure);
}

TEST(Database, ReplicasReceiveIdenticalLogs) {
  MemoryObjectStore mem;
  auto model = std::make_unique<LatencyModel>(LatencyProfile::express(), 3);
  model->set_bucket_profile("r2", [] {
    auto p = LatencyProfile::express();
    p.append.flat = from_ms(20);
    return p;
  }());
  LatencyInjectingStore store(mem, *model, SteadyClock::instance());
  auto opts = small_options(2);
  opts.buckets = {"r0", "r1", "r2"};
  opts.ack = AckPolicy::kMajority;
  auto db = Database::create(store, opts);
  load(*db, 50);
  update_rows(*db, 0, 100, 9, 50);
  db->shutdown();
  const auto keys = mem.list("r0", "log-");
  ASSERT_FALSE(keys.empty());
  EXPECT_EQ(mem.list("r2", "log-"), keys);
  for (const auto& k : keys) EXPECT_EQ(mem.get({"r2", k}), mem.get({"r0", k}));
}

TEST(Database, StoreWithoutAppendWritesObjectPerFlush) {
  MemoryObjectStore mem;
  LatencyModel model(LatencyProfile::standard().without_jitter(), 1);
  auto fast = LatencyProfile::standard().without_jitter();
  fast.put.flat = from_ms(1);
  fast.put.slope_ns_per_byte = 0;
  model.set_bucket_profile("wal", fast);
  LatencyInjectingStore store(mem, model, SteadyClock::instance());
  ASSERT_FALSE(store.supports_append());
  auto db = Database::create(store, small_options(2));
  load(*db, 50);
  update_rows(*db, 1, 40, 2, 50);
  db->shutdown();
  EXPECT_EQ(db->options().logging.segment_append_limit, 1u);
  const auto stats = db->stats();
  EXPECT_EQ(mem.list("wal", "log-").size(), stats.flushes);
  for (const auto& k : mem.list("wal", "log-")) EXPECT_EQ(mem.head({"wal", k})->parts, 1u);
  EXPECT_EQ(mem.counters().count(OpKind::kAppend), 0u);

  auto reopened = Database::open(mem, small_options(2));
  EXPECT_EQ(rows(reopened->engine()), rows(db->engine()));
}

}  // namespace
}  // namespace objwal
