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

#include "objwal/mvcc.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

namespace objwal {

namespace {

std::uint64_t write_key(TableId table, Rid rid) { return (std::uint64_t{table} << 32) ^ rid; }

// Unlinks a chain iteratively so long chains do not recurse in destructors.
std::uint64_t drop_chain(std::unique_ptr<Version> v) {
  std::uint64_t n = 0;
  while (v) {
    v = std::move(v->older);
    ++n;
  }
  return n;
}

}  // namespace

Bytes extract_fields(const TableLayout& layout, ByteView image, std::uint64_t mask) {
  Bytes out;
  out.reserve(std::popcount(mask) * layout.field_width);
  for (std::uint32_t f = 0; f < layout.field_count; ++f) {
    if (!(mask >> f & 1)) continue;
    auto src = image.subspan(std::size_t{f} * layout.field_width, layout.field_width);
    out.insert(out.end(), src.begin(), src.end());
  }
  return out;
}

void merge_fields(const TableLayout& layout, std::span<std::byte> image, std::uint64_t mask, ByteView values) {
  std::size_t pos = 0;
  for (std::uint32_t f = 0; f < layout.field_count; ++f) {
    if (!(mask >> f & 1)) continue;
    std::memcpy(image.data() + std::size_t{f} * layout.field_width, values.data() + pos, layout.field_width);
    pos += layout.field_width;
  }
}

// --- Table ------------------------------------------------------------------

Table::Table(TableId id, TableLayout layout)
    : id_(id), layout_(layout), dir_(new std::atomic<Chunk*>[kMaxChunks]), stripes_(new std::mutex[kStripes]) {
  for (std::size_t i = 0; i < kMaxChunks; ++i) dir_[i].store(nullptr, std::memory_order_relaxed);
}

Table::~Table() {
  for (std::size_t i = 0; i < kMaxChunks; ++i) {
    Chunk* c = dir_[i].load(std::memory_order_relaxed);
    if (!c) continue;
    for (auto& h : c->heads) drop_chain(std::move(h));
    delete c;
  }
}

std::unique_ptr<Version>* Table::slot(Rid rid, bool create) {
  const std::size_t c = rid >> kChunkBits;
  if (c >= kMaxChunks) throw std::out_of_range("rid " + std::to_string(rid) + " beyond table capacity");
  Chunk* chunk = dir_[c].load(std::memory_order_acquire);
  if (!chunk) {
    if (!create) return nullptr;
    std::lock_guard lock(grow_mu_);
    chunk = dir_[c].load(std::memory_order_acquire);
    if (!chunk) {
      chunk = new Chunk();
      dir_[c].store(chunk, std::memory_order_release);
    }
  }
  if (create) {
    Rid cur = rid_bound_.load(std::memory_order_relaxed);
    while (cur <= rid && !rid_bound_.compare_exchange_weak(cur, rid + 1, std::memory_order_acq_rel)) {
    }
  }
  return &chunk->heads[rid & (kChunkSize - 1)];
}

// --- MvccEngine -------------------------------------------------------------

MvccEngine::MvccEngine(const SchemaCatalog& catalog) : catalog_(catalog) {}

MvccEngine::~MvccEngine() = default;

Table& MvccEngine::create_table(TableId id) {
  const TableLayout& layout = catalog_.layout(id);
  if (layout.variable) throw ConfigError("variable-width tables are not supported by the in-memory engine");
  if (layout.field_count == 0 || layout.field_count > 64) throw ConfigError("field_count must be in [1, 64]");
  auto [it, inserted] = tables_.emplace(id, nullptr);
  if (!inserted) throw ConfigError("table " + std::to_string(id) + " already exists");
  it->second = std::make_unique<Table>(id, layout);
  return *it->second;
}

Table& MvccEngine::table(TableId id) {
  auto it = tables_.find(id);
  if (it == tables_.end()) throw NotFound("no table " + std::to_string(id));
  return *it->second;
}

std::vector<TableId> MvccEngine::table_ids() const {
  std::vector<TableId> out;
  for (const auto& [id, _] : tables_) out.push_back(id);
  return out;
}

std::uint64_t MvccEngine::horizon() const {
  return active_.empty() ? next_csn_ - 1 : *active_.begin();
}

Transaction MvccEngine::begin() {
  Transaction txn;
  txn.id_ = next_txn_id_.fetch_add(1, std::memory_order_relaxed);
  std::lock_guard lock(publish_mu_);
  txn.begin_ts_ = Csn{next_csn_ - 1};
  active_.insert(txn.begin_ts_.value);
  horizon_.store(horizon(), std::memory_order_release);
  return txn;
}

void MvccEngine::end_txn_locked(const Transaction& txn) {
  active_.erase(active_.find(txn.begin_ts_.value));
  horizon_.store(horizon(), std::memory_order_release);
}

Csn MvccEngine::pin_snapshot() {
  std::lock_guard lock(publish_mu_);
  const std::uint64_t ts = next_csn_ - 1;
  active_.insert(ts);
  horizon_.store(horizon(), std::memory_order_release);
  return Csn{ts};
}

void MvccEngine::unpin_snapshot(Csn ts) {
  std::lock_guard lock(publish_mu_);
  auto it = active_.find(ts.value);
  if (it == active_.end()) throw std::invalid_argument("snapshot not pinned");
  active_.erase(it);
  horizon_.store(horizon(), std::memory_order_release);
}

Version* MvccEngine::visible(Version* v, const Transaction& txn) const {
  for (; v; v = v->older.get()) {
    if (v->csn == kPendingCsn) {
      if (v->owner == txn.id_) return v;
      continue;
    }
    if (v->csn <= txn.begin_ts_.value) return v;
  }
  return nullptr;
}

void MvccEngine::prune(Version* head, std::uint64_t horizon) {
  for (Version* v = head; v; v = v->older.get()) {
    if (v->csn != kPendingCsn && v->csn <= horizon) {
      if (v->older) pruned_.fetch_add(drop_chain(std::move(v->older)), std::memory_order_relaxed);
      return;
    }
  }
}

Transaction::Write& MvccEngine::write_for(Transaction& txn, Table& t, Rid rid, RecordKind kind) {
  // Small write sets are searched linearly; the index is built past that.
  constexpr std::size_t kLinearWrites = 16;
  if (txn.write_index_.empty()) {
    if (txn.writes_.size() < kLinearWrites) {
      for (auto& w : txn.writes_)
        if (w.table == &t && w.rid == rid) return w;
      txn.writes_.push_back({&t, rid, kind, 0, nullptr});
      return txn.writes_.back();
    }
    for (std::size_t i = 0; i < txn.writes_.size(); ++i)
      txn.write_index_.emplace(write_key(txn.writes_[i].table->id(), txn.writes_[i].rid), i);
  }
  auto [it, inserted] = txn.write_index_.emplace(write_key(t.id(), rid), txn.writes_.size());
  if (inserted) txn.writes_.push_back({&t, rid, kind, 0, nullptr});
  return txn.writes_[it->second];
}

static void require_active(const Transaction& txn) {
  if (txn.state() != TxnState::kActive) throw std::logic_error("transaction is not active");
}

Bytes MvccEngine::read(Transaction& txn, TableId table_id, Rid rid) {
  require_active(txn);
  Table& t = table(table_id);
  std::lock_guard lock(t.stripe(rid));
  auto* s = t.slot(rid, false);
  Version* v = s ? visible(s->get(), txn) : nullptr;
  if (!v || v->tombstone) throw NotFound("rid " + std::to_string(rid) + " not visible");
  txn.fold(v->csn);
  return v->image;
}

void MvccEngine::read_into(Transaction& txn, TableId table_id, Rid rid, std::span<std::byte> out) {
  require_active(txn);
  Table& t = table(table_id);
  if (out.size() != t.record_bytes()) throw std::invalid_argument("output size does not match the record size");
  std::lock_guard lock(t.stripe(rid));
  auto* s = t.slot(rid, false);
  Version* v = s ? visible(s->get(), txn) : nullptr;
  if (!v || v->tombstone) throw NotFound("rid " + std::to_string(rid) + " not visible");
  txn.fold(v->csn);
  std::copy(v->image.begin(), v->image.end(), out.begin());
}

void MvccEngine::update(Transaction& txn, TableId table_id, Rid rid, std::uint64_t mask, ByteView values) {
  require_active(txn);
  Table& t = table(table_id);
  const TableLayout& layout = t.layout();
  if (mask == 0 || (mask & ~layout.full_mask())) throw std::invalid_argument("field mask outside the schema");
  if (values.size() != std::size_t(std::popcount(mask)) * layout.field_width)
    throw std::invalid_argument("value length does not match the field mask");

  std::lock_guard lock(t.stripe(rid));
  auto* s = t.slot(rid, false);
  Version* head = s ? s->get() : nullptr;
  if (!head) throw NotFound("rid " + std::to_string(rid) + " absent");
  if (head->csn == kPendingCsn && head->owner == txn.id_) {
    if (head->tombstone) throw NotFound("rid " + std::to_string(rid) + " deleted by this transaction");
    merge_fields(layout, head->image, mask, values);
    auto& w = write_for(txn, t, rid, RecordKind::kUpdate);
    w.mask |= mask;
    return;
  }
  if (head->csn == kPendingCsn || head->csn > txn.begin_ts_.value) {
    conflicts_.fetch_add(1, std::memory_order_relaxed);
    throw WriteConflict("rid " + std::to_string(rid) + " has a newer writer");
  }
  if (head->tombstone) throw NotFound("rid " + std::to_string(rid) + " deleted");
  txn.fold(head->csn);

  auto v = std::make_unique<Version>();
  v->owner = txn.id_;
  v->image = head->image;
  merge_fields(layout, v->image, mask, values);
  v->older = std::move(*s);
  Version* raw = v.get();
  *s = std::move(v);
  prune(raw->older.get(), horizon_.load(std::memory_order_acquire));

  auto& w = write_for(txn, t, rid, RecordKind::kUpdate);
  w.mask = mask;
  w.version = raw;
}

void MvccEngine::insert(Transaction& txn, TableId table_id, Rid rid, ByteView image) {
  require_active(txn);
  Table& t = table(table_id);
  if (image.size() != t.record_bytes()) throw std::invalid_argument("image length does not match the schema");

  std::lock_guard lock(t.stripe(rid));
  auto* s = t.slot(rid, true);
  Version* head = s->get();
  if (head && head->csn == kPendingCsn && head->owner == txn.id_) {
    if (!head->tombstone) throw DuplicateRid("rid " + std::to_string(rid) + " exists");
    head->tombstone = false;
    head->image.assign(image.begin(), image.end());
    auto& w = write_for(txn, t, rid, RecordKind::kInsert);
    w.kind = RecordKind::kInsert;
    w.mask = t.layout().full_mask();
    return;
  }
  if (head && (head->csn == kPendingCsn || head->csn > txn.begin_ts_.value)) {
    conflicts_.fetch_add(1, std::memory_order_relaxed);
    throw WriteConflict("rid " + std::to_string(rid) + " has a newer writer");
  }
  if (head && !head->tombstone) throw DuplicateRid("rid " + std::to_string(rid) + " exists");
  if (head) txn.fold(head->csn);

  auto v = std::make_unique<Version>();
  v->owner = txn.id_;
  v->image.assign(image.begin(), image.end());
  v->older = std::move(*s);
  Version* raw = v.get();
  *s = std::move(v);
  prune(raw->older.get(), horizon_.load(std::memory_order_acquire));

  auto& w = write_for(txn, t, rid, RecordKind::kInsert);
  w.mask = t.layout().full_mask();
  w.version = raw;
}

void MvccEngine::remove(Transaction& txn, TableId table_id, Rid rid) {
  require_active(txn);
  Table& t = table(table_id);
  std::lock_guard lock(t.stripe(rid));
  auto* s = t.slot(rid, false);
  Version* head = s ? s->get() : nullptr;
  if (!head) throw NotFound("rid " + std::to_string(rid) + " absent");
  if (head->csn == kPendingCsn && head->owner == txn.id_) {
    if (head->tombstone) throw NotFound("rid " + std::to_string(rid) + " deleted by this transaction");
    head->tombstone = true;
    head->image.clear();
    auto& w = write_for(txn, t, rid, RecordKind::kDelete);
    w.kind = RecordKind::kDelete;
    w.mask = 0;
    return;
  }
  if (head->csn == kPendingCsn || head->csn > txn.begin_ts_.value) {
    conflicts_.fetch_add(1, std::memory_order_relaxed);
    throw WriteConflict("rid " + std::to_string(rid) + " has a newer writer");
  }
  if (head->tombstone) throw NotFound("rid " + std::to_string(rid) + " deleted");
  txn.fold(head->csn);

  auto v = std::make_unique<Version>();
  v->owner = txn.id_;
  v->tombstone = true;
  v->older = std::move(*s);
  Version* raw = v.get();
  *s = std::move(v);
  prune(raw->older.get(), horizon_.load(std::memory_order_acquire));

  auto& w = write_for(txn, t, rid, RecordKind::kDelete);
  w.mask = 0;
  w.version = raw;
}

Precommitted MvccEngine::precommit(Transaction& txn, const std::function<void(Csn, bool)>& on_csn) {
  require_active(txn);
  Precommitted out;
  out.begin_ts = txn.begin_ts_;
  out.records.reserve(txn.writes_.size());
  // Pending versions only change under their owner, so no locks are needed.
  for (const auto& w : txn.writes_) {
    DeltaRecord r;
    r.kind = w.kind;
    r.table_id = w.table->id();
    r.rid = w.rid;
    if (w.kind == RecordKind::kInsert) {
      r.field_mask = w.table->layout().full_mask();
      r.payload = w.version->image;
    } else if (w.kind == RecordKind::kUpdate) {
      r.field_mask = w.mask;
      r.payload = extract_fields(w.table->layout(), w.version->image, w.mask);
    }
    out.records.push_back(std::move(r));
  }

  std::lock_guard lock(publish_mu_);
  txn.csn_ = Csn{next_csn_++};
  if (on_csn) on_csn(txn.csn_, txn.writes_.empty());
  for (const auto& w : txn.writes_) {
    std::lock_guard slot_lock(w.table->stripe(w.rid));
    w.version->csn = txn.csn_.value;
    w.version->owner = 0;
  }
  txn.state_ = TxnState::kPreCommitted;
  end_txn_locked(txn);
  committed_.fetch_add(1, std::memory_order_relaxed);
  out.csn = txn.csn_;
  out.dsn = txn.dsn_;
  return out;
}

void MvccEngine::abort(Transaction& txn) {
  require_active(txn);
  for (auto it = txn.writes_.rbegin(); it != txn.writes_.rend(); ++it) {
    std::lock_guard lock(it->table->stripe(it->rid));
    auto* s = it->table->slot(it->rid, false);
    auto old = std::move(*s);
    *s = std::move(old->older);
  }
  txn.writes_.clear();
  txn.write_index_.clear();
  txn.state_ = TxnState::kAborted;
  std::lock_guard lock(publish_mu_);
  end_txn_locked(txn);
  aborted_.fetch_add(1, std::memory_order_relaxed);
}

Csn MvccEngine::next_csn() const {
  std::lock_guard lock(publish_mu_);
  return Csn{next_csn_};
}

void MvccEngine::set_next_csn(Csn next) {
  std::lock_guard lock(publish_mu_);
  if (next.value < next_csn_) throw std::invalid_argument("csn counter cannot move backwards");
  next_csn_ = next.value;
  horizon_.store(horizon(), std::memory_order_release);
}

void MvccEngine::scan(TableId table_id, Csn ts, const std::function<void(Rid, Csn, ByteView)>& fn) {
  Table& t = table(table_id);
  const Rid bound = t.rid_bound();
  for (Rid rid = 0; rid < bound; ++rid) {
    std::lock_guard lock(t.stripe(rid));
    auto* s = t.slot(rid, false);
    if (!s) {
      rid |= Table::kChunkSize - 1;  // skip the absent chunk
      continue;
    }
    for (Version* v = s->get(); v; v = v->older.get()) {
      if (v->csn == kPendingCsn || v->csn > ts.value) continue;
      if (!v->tombstone) fn(rid, Csn{v->csn}, v->image);
      break;
    }
  }
}

std::size_t MvccEngine::count_visible(TableId table_id, Csn ts) {
  std::size_t n = 0;
  scan(table_id, ts, [&](Rid, Csn, ByteView) { ++n; });
  return n;
}

void MvccEngine::install(TableId table_id, Rid rid, Csn csn, std::optional<ByteView> image) {
  Table& t = table(table_id);
  if (image && image->size() != t.record_bytes()) throw std::invalid_argument("image length does not match the schema");
  std::lock_guard lock(t.stripe(rid));
  auto* s = t.slot(rid, true);
  auto v = std::make_unique<Version>();
  v->csn = csn.value;
  v->tombstone = !image;
  if (image) v->image.assign(image->begin(), image->end());
  drop_chain(std::move(*s));
  *s = std::move(v);
}

void MvccEngine::apply(const DeltaRecord& rec, Csn csn) {
  Table& t = table(rec.table_id);
  switch (rec.kind) {
    case RecordKind::kInsert:
      install(rec.table_id, rec.rid, csn, ByteView(rec.payload));
      return;
    case RecordKind::kDelete:
      install(rec.table_id, rec.rid, csn, std::nullopt);
      return;
    case RecordKind::kUpdate: {
      Bytes image;
      {
        std::lock_guard lock(t.stripe(rec.rid));
        auto* s = t.slot(rec.rid, false);
        if (!s || !*s || (*s)->tombstone)
          throw std::runtime_error("replayed update of absent rid " + std::to_string(rec.rid));
        image = (*s)->image;
      }
      merge_fields(t.layout(), image, rec.field_mask, rec.payload);
      install(rec.table_id, rec.rid, csn, ByteView(image));
      return;
    }
  }
}

std::vector<std::uint64_t> MvccEngine::chain(TableId table_id, Rid rid) {
  Table& t = table(table_id);
  std::lock_guard lock(t.stripe(rid));
  std::vector<std::uint64_t> out;
  auto* s = t.slot(rid, false);
  for (Version* v = s ? s->get() : nullptr; v; v = v->older.get()) out.push_back(v->csn);
  return out;
}

MvccStats MvccEngine::stats() const {
  return {committed_.load(), aborted_.load(), conflicts_.load(), pruned_.load()};
}

}  // namespace objwal
