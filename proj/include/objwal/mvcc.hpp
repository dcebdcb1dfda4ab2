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
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "objwal/types.hpp"
#include "objwal/wal_format.hpp"

namespace objwal {

class WriteConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DuplicateRid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Creator CSN of a version that is not yet published.
inline constexpr std::uint64_t kPendingCsn = ~std::uint64_t{0};

struct Version {
  std::uint64_t csn = kPendingCsn;
  std::uint64_t owner = 0;  // txn id while pending
  bool tombstone = false;
  Bytes image;
  std::unique_ptr<Version> older;
};

class Table;

enum class TxnState { kActive, kPreCommitted, kAborted };

class Transaction {
 public:
  std::uint64_t id() const { return id_; }
  Csn begin_ts() const { return begin_ts_; }
  Dsn dsn() const { return dsn_; }
  Csn csn() const { return csn_; }
  TxnState state() const { return state_; }
  bool read_only() const { return writes_.empty(); }
  std::size_t write_count() const { return writes_.size(); }

 private:
  friend class MvccEngine;

  struct Write {
    Table* table;
    Rid rid;
    RecordKind kind;
    std::uint64_t mask;
    Version* version;
  };

  void fold(std::uint64_t creator) {
    if (creator != kPendingCsn && creator > dsn_.value) dsn_ = Csn{creator};
  }

  std::uint64_t id_ = 0;
  Csn begin_ts_;
  Dsn dsn_;
  Csn csn_;
  TxnState state_ = TxnState::kActive;
  std::vector<Write> writes_;
  std::unordered_map<std::uint64_t, std::size_t> write_index_;  // (table, rid) -> writes_
};

/// What precommit hands to the logging layer.
struct Precommitted {
  Csn csn;
  Dsn dsn;
  Csn begin_ts;
  std::vector<DeltaRecord> records;  // empty for read-only transactions
};

/// Fixed-width table: per-rid head slots in chunked indirection arrays and
/// new-to-old version chains.
class Table {
 public:
  static constexpr std::size_t kChunkBits = 12;
  static constexpr std::size_t kChunkSize = std::size_t{1} << kChunkBits;
  static constexpr std::size_t kMaxChunks = std::size_t{1} << 16;
  static constexpr std::size_t kStripes = 1024;

  Table(TableId id, TableLayout layout);
  ~Table();

  TableId id() const { return id_; }
  const TableLayout& layout() const { return layout_; }
  std::size_t record_bytes() const { return std::size_t{layout_.field_count} * layout_.field_width; }
  Rid rid_capacity() const { return Rid{kChunkSize} * kMaxChunks; }
  /// One past the largest rid ever touched.
  Rid rid_bound() const { return rid_bound_.load(std::memory_order_acquire); }

 private:
  friend class MvccEngine;

  struct Chunk {
    std::array<std::unique_ptr<Version>, kChunkSize> heads;
  };

  std::unique_ptr<Version>* slot(Rid rid, bool create);
  std::mutex& stripe(Rid rid) { return stripes_[rid % kStripes]; }

  TableId id_;
  TableLayout layout_;
  std::unique_ptr<std::atomic<Chunk*>[]> dir_;
  std::mutex grow_mu_;
  std::atomic<Rid> rid_bound_{0};
  std::unique_ptr<std::mutex[]> stripes_;
};

struct MvccStats {
  std::uint64_t committed = 0;
  std::uint64_t aborted = 0;
  std::uint64_t conflicts = 0;
  std::uint64_t pruned_versions = 0;
};

/// Snapshot-isolation engine over fixed-width tables.
class MvccEngine {
 public:
  explicit MvccEngine(const SchemaCatalog& catalog = SchemaCatalog::fixed_default());
  ~MvccEngine();

  /// Throws ConfigError for variable-width layouts or a duplicate id.
  Table& create_table(TableId id);
  Table& table(TableId id);
  std::vector<TableId> table_ids() const;
  const SchemaCatalog& catalog() const { return catalog_; }

  Transaction begin();
  /// Full image of the newest version visible to txn.
  Bytes read(Transaction& txn, TableId table, Rid rid);
  /// Same, copied into `out` (record_bytes long).
  void read_into(Transaction& txn, TableId table, Rid rid, std::span<std::byte> out);
  /// `values` holds the masked fields in ascending order.
  void update(Transaction& txn, TableId table, Rid rid, std::uint64_t field_mask, ByteView values);
  void insert(Transaction& txn, TableId table, Rid rid, ByteView image);
  void remove(Transaction& txn, TableId table, Rid rid);

  /// Draws the CSN and publishes the write set. `on_csn` runs while the CSN
  /// is drawn but before any version becomes visible.
  Precommitted precommit(Transaction& txn, const std::function<void(Csn, bool read_only)>& on_csn = {});
  void abort(Transaction& txn);

  /// The value the counter hands out next.
  Csn next_csn() const;
  /// Restores the counter after recovery; must not move it backwards.
  void set_next_csn(Csn next);

  /// Pins the current snapshot (counter - 1) against version pruning.
  Csn pin_snapshot();
  void unpin_snapshot(Csn ts);

  /// Visits the newest non-tombstone version with csn <= ts for each rid,
  /// ascending. Only published versions are considered.
  void scan(TableId table, Csn ts, const std::function<void(Rid, Csn, ByteView)>& fn);
  std::size_t count_visible(TableId table, Csn ts);

  /// Installs a published version directly (recovery and loading).
  void install(TableId table, Rid rid, Csn csn, std::optional<ByteView> image);
  /// Applies a logged record on top of the current head (recovery replay).
  void apply(const DeltaRecord& rec, Csn csn);

  /// Newest-first creator CSNs of a chain, for tests.
  std::vector<std::uint64_t> chain(TableId table, Rid rid);
  MvccStats stats() const;

 private:
  Version* visible(Version* head, const Transaction& txn) const;
  void prune(Version* head, std::uint64_t horizon);
  Transaction::Write& write_for(Transaction& txn, Table& t, Rid rid, RecordKind kind);
  void end_txn_locked(const Transaction& txn);
  std::uint64_t horizon() const;

  SchemaCatalog catalog_;
  std::map<TableId, std::unique_ptr<Table>> tables_;

  // Guards the counter, publication and the active-snapshot set.
  mutable std::mutex publish_mu_;
  std::uint64_t next_csn_ = 1;
  std::multiset<std::uint64_t> active_;
  std::atomic<std::uint64_t> horizon_{0};
  std::atomic<std::uint64_t> next_txn_id_{1};

  std::atomic<std::uint64_t> committed_{0};
  std::atomic<std::uint64_t> aborted_{0};
  std::atomic<std::uint64_t> conflicts_{0};
  std::atomic<std::uint64_t> pruned_{0};
};

/// Masked fields of a full image, ascending.
Bytes extract_fields(const TableLayout& layout, ByteView image, std::uint64_t mask);
/// Writes masked field values into a full image.
void merge_fields(const TableLayout& layout, std::span<std::byte> image, std::uint64_t mask, ByteView values);

}  // namespace objwal
