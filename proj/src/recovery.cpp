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

#include "objwal/recovery.hpp"

#include <algorithm>
#include <charconv>
#include <future>
#include <set>

#include "objwal/group_logging.hpp"

namespace objwal {

namespace {

constexpr std::size_t kRowsPerFrame = 4096;

std::optional<Csn> parse_meta_key(const std::string& key) {
  constexpr std::string_view kPrefix = "ckpt-";
  constexpr std::string_view kSuffix = "-meta";
  if (!key.starts_with(kPrefix) || !key.ends_with(kSuffix)) return std::nullopt;
  std::uint64_t ts = 0;
  const char* b = key.data() + kPrefix.size();
  const char* e = key.data() + key.size() - kSuffix.size();
  auto r = std::from_chars(b, e, ts);
  if (r.ec != std::errc{} || r.ptr != e) return std::nullopt;
  return Csn{ts};
}

std::optional<Csn> parse_checkpoint_ts(const std::string& key) {
  constexpr std::string_view kPrefix = "ckpt-";
  if (!key.starts_with(kPrefix)) return std::nullopt;
  std::uint64_t ts = 0;
  auto r = std::from_chars(key.data() + kPrefix.size(), key.data() + key.size(), ts);
  if (r.ec != std::errc{} || r.ptr == key.data() + kPrefix.size() || *r.ptr != '-') return std::nullopt;
  return Csn{ts};
}

struct Cursor {
  ByteView b;
  std::size_t pos = 0;

  bool has(std::size_t n) const { return b.size() - pos >= n; }
  std::uint16_t u16() {
    auto v = le::get_u16(b.data() + pos);
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    auto v = le::get_u32(b.data() + pos);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    auto v = le::get_u64(b.data() + pos);
    pos += 8;
    return v;
  }
};

struct Row {
  Rid rid;
  Csn csn;
  Bytes image;
};

struct TableSnapshot {
  TableId table = 0;
  TableLayout layout;
  std::vector<Row> rows;
};

// Frame body: table u32 | field_count u32 | field_width u32 | rows u32 |
// rows x (rid u64 | csn u64 | image)
std::optional<TableSnapshot> decode_table_snapshot(ByteView bytes) {
  TableSnapshot snap;
  std::size_t off = 0;
  bool first = true;
  while (off < bytes.size()) {
    auto frame = decode_frame(kCheckpointRowsMagic, bytes, off);
    if (!frame) return std::nullopt;
    Cursor c{frame->body};
    if (!c.has(16)) return std::nullopt;
    const TableId table = c.u32();
    TableLayout layout{c.u32(), c.u32(), false};
    const std::uint32_t n = c.u32();
    if (first) {
      snap.table = table;
      snap.layout = layout;
      first = false;
    } else if (table != snap.table || layout.field_count != snap.layout.field_count ||
               layout.field_width != snap.layout.field_width) {
      return std::nullopt;
    }
    const std::size_t width = std::size_t{layout.field_count} * layout.field_width;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (!c.has(16 + width)) return std::nullopt;
      Row r;
      r.rid = c.u64();
      r.csn = Csn{c.u64()};
      r.image.assign(c.b.begin() + static_cast<std::ptrdiff_t>(c.pos),
                     c.b.begin() + static_cast<std::ptrdiff_t>(c.pos + width));
      c.pos += width;
      snap.rows.push_back(std::move(r));
    }
    if (c.pos != frame->body.size()) return std::nullopt;
    off = frame->next_offset;
  }
  if (first) return std::nullopt;
  return snap;
}

}  // namespace

std::string checkpoint_meta_key(Csn ts) { return "ckpt-" + std::to_string(ts.value) + "-meta"; }

std::string checkpoint_table_key(Csn ts, TableId table) {
  return "ckpt-" + std::to_string(ts.value) + "-table-" + std::to_string(table);
}

// Body: ts u64 | created i64 | tables u32 | (len u16 | key)* | logs u32 |
// (log u32 | segment u32)*
Bytes encode_checkpoint_meta(const CheckpointMeta& meta) {
  Bytes body;
  le::append_u64(body, meta.checkpoint_ts.value);
  le::append_u64(body, static_cast<std::uint64_t>(meta.created_ns));
  le::append_u32(body, static_cast<std::uint32_t>(meta.table_keys.size()));
  for (const auto& k : meta.table_keys) {
    const auto n = body.size();
    body.resize(n + 2);
    le::put_u16(body.data() + n, static_cast<std::uint16_t>(k.size()));
    for (char ch : k) body.push_back(std::byte(ch));
  }
  le::append_u32(body, static_cast<std::uint32_t>(meta.resume.size()));
  for (const auto& r : meta.resume) {
    le::append_u32(body, r.log_id);
    le::append_u32(body, r.segment_index);
  }
  return encode_frame(kCheckpointMetaMagic, body);
}

std::optional<CheckpointMeta> decode_checkpoint_meta(ByteView bytes) {
  auto frame = decode_frame(kCheckpointMetaMagic, bytes, 0);
  if (!frame || frame->next_offset != bytes.size()) return std::nullopt;
  Cursor c{frame->body};
  CheckpointMeta m;
  if (!c.has(20)) return std::nullopt;
  m.checkpoint_ts = Csn{c.u64()};
  m.created_ns = static_cast<std::int64_t>(c.u64());
  const std::uint32_t tables = c.u32();
  for (std::uint32_t i = 0; i < tables; ++i) {
    if (!c.has(2)) return std::nullopt;
    const std::uint16_t n = c.u16();
    if (!c.has(n)) return std::nullopt;
    std::string k;
    for (std::uint16_t j = 0; j < n; ++j) k += static_cast<char>(c.b[c.pos + j]);
    c.pos += n;
    m.table_keys.push_back(std::move(k));
  }
  if (!c.has(4)) return std::nullopt;
  const std::uint32_t logs = c.u32();
  for (std::uint32_t i = 0; i < logs; ++i) {
    if (!c.has(8)) return std::nullopt;
    LogResume r;
    r.log_id = c.u32();
    r.segment_index = c.u32();
    m.resume.push_back(r);
  }
  if (c.pos != frame->body.size()) return std::nullopt;
  return m;
}

Bytes encode_table_snapshot(MvccEngine& engine, TableId table, Csn ts) {
  const TableLayout layout = engine.table(table).layout();
  Bytes out;
  Bytes body;
  std::uint32_t n = 0;
  auto start = [&] {
    body.clear();
    le::append_u32(body, table);
    le::append_u32(body, layout.field_count);
    le::append_u32(body, layout.field_width);
    le::append_u32(body, 0);
    n = 0;
  };
  auto finish = [&] {
    le::put_u32(body.data() + 12, n);
    Bytes f = encode_frame(kCheckpointRowsMagic, body);
    out.insert(out.end(), f.begin(), f.end());
  };
  start();
  engine.scan(table, ts, [&](Rid rid, Csn csn, ByteView image) {
    le::append_u64(body, rid);
    le::append_u64(body, csn.value);
    body.insert(body.end(), image.begin(), image.end());
    if (++n == kRowsPerFrame) {
      finish();
      start();
    }
  });
  // Always at least one frame, so an empty table still has a valid object.
  if (n > 0 || out.empty()) finish();
  return out;
}

std::vector<SegmentInfo> list_segments(ObjectStore& store, const std::string& bucket) {
  std::vector<SegmentInfo> out;
  for (const auto& key : store.list(bucket, "log-")) {
    auto parsed = parse_segment_key(key);
    if (!parsed) continue;
    auto info = store.head({bucket, key});
    if (!info) continue;
    SegmentInfo s{parsed->first, parsed->second, key, info->length, std::nullopt};
    if (info->length >= kFooterSize) {
      Bytes tail = store.get({bucket, key}, ByteRange{info->length - kFooterSize, info->length});
      s.footer = decode_footer(tail, 0);
    }
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const SegmentInfo& a, const SegmentInfo& b) {
    return std::pair(a.log_id, a.segment_index) < std::pair(b.log_id, b.segment_index);
  });
  return out;
}

namespace {

bool covered(const SegmentInfo& s, Csn ts) { return s.footer && s.footer->max_csn <= ts; }

std::vector<LogResume> resume_positions(const std::vector<SegmentInfo>& segments, Csn ts) {
  // Segments arrive ordered by (log, segment); resume at the first one per
  // log that is not covered, or past the last when all are.
  std::map<LogId, LogResume> by_log;
  std::set<LogId> stopped;
  for (const auto& s : segments) {
    auto it = by_log.try_emplace(s.log_id, LogResume{s.log_id, s.segment_index}).first;
    if (stopped.contains(s.log_id)) continue;
    if (covered(s, ts)) {
      it->second.segment_index = s.segment_index + 1;
    } else {
      it->second.segment_index = s.segment_index;
      stopped.insert(s.log_id);
    }
  }
  std::vector<LogResume> out;
  for (auto& [_, r] : by_log) out.push_back(r);
  return out;
}

}  // namespace

CheckpointMeta write_checkpoint(MvccEngine& engine, Csn ts, ObjectStore& store, const std::string& bucket,
                                Clock& clock) {
  CheckpointMeta meta;
  meta.checkpoint_ts = ts;
  meta.created_ns = clock.now().count();
  for (TableId t : engine.table_ids()) {
    const std::string key = checkpoint_table_key(ts, t);
    store.put({bucket, key}, encode_table_snapshot(engine, t, ts));
    meta.table_keys.push_back(key);
  }
  meta.resume = resume_positions(list_segments(store, bucket), ts);
  store.put({bucket, checkpoint_meta_key(ts)}, encode_checkpoint_meta(meta));
  return meta;
}

std::vector<std::string> truncate(const CheckpointMeta& meta, ObjectStore& store, const std::string& bucket) {
  std::vector<std::string> deleted;
  for (const auto& s : list_segments(store, bucket)) {
    if (!covered(s, meta.checkpoint_ts)) continue;
    store.remove({bucket, s.key});
    deleted.push_back(s.key);
  }
  for (const auto& key : store.list(bucket, "ckpt-")) {
    auto ts = parse_checkpoint_ts(key);
    if (ts && *ts < meta.checkpoint_ts) {
      store.remove({bucket, key});
      deleted.push_back(key);
    }
  }
  return deleted;
}

namespace {

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::vector<TableSnapshot> tables;
};

std::optional<LoadedCheckpoint> load_checkpoint(ObjectStore& store, const std::string& bucket) {
  std::vector<Csn> candidates;
  for (const auto& key : store.list(bucket, "ckpt-"))
    if (auto ts = parse_meta_key(key)) candidates.push_back(*ts);
  std::sort(candidates.rbegin(), candidates.rend());
  for (Csn ts : candidates) {
    try {
      auto meta = decode_checkpoint_meta(store.get({bucket, checkpoint_meta_key(ts)}));
      if (!meta || meta->checkpoint_ts != ts) continue;
      LoadedCheckpoint lc{*meta, {}};
      bool ok = true;
      for (const auto& key : meta->table_keys) {
        auto snap = decode_table_snapshot(store.get({bucket, key}));
        if (!snap) {
          ok = false;
          break;
        }
        lc.tables.push_back(std::move(*snap));
      }
      if (ok) return lc;
    } catch (const StoreError& e) {
      if (e.code() != StoreErrc::kNotFound) throw;
    }
  }
  return std::nullopt;
}

struct LogScan {
  std::vector<TxnEntry> entries;
  LogRecoveryInfo info;
};

// Longest copy of a segment among the replicas.
Bytes read_longest(ObjectStore& store, const std::vector<std::string>& replicas, const std::string& key) {
  Bytes best;
  bool found = false;
  for (const auto& b : replicas) {
    try {
      Bytes data = store.get({b, key});
      if (!found || data.size() > best.size()) best = std::move(data);
      found = true;
    } catch (const StoreError& e) {
      if (e.code() != StoreErrc::kNotFound) throw;
    }
  }
  if (!found) throw StoreError(StoreErrc::kNotFound, "segment " + key + " vanished during recovery");
  return best;
}

LogScan scan_log(ObjectStore& store, const std::vector<std::string>& replicas, const SchemaCatalog& catalog,
                 const std::vector<SegmentInfo>& segments) {
  LogScan out;
  for (const auto& s : segments) {
    const Bytes data = read_longest(store, replicas, s.key);
    std::size_t end = 0;
    auto entries = decode_all(data, 0, catalog, &end);
    const bool sealed = data.size() >= kFooterSize && decode_footer(data, data.size() - kFooterSize).has_value();
    if (sealed) {
      if (end != data.size() - kFooterSize)
        throw CorruptLog("sealed segment " + s.key + " is damaged at byte " + std::to_string(end));
    } else if (end != data.size()) {
      out.info.torn_tail = true;
    }
    out.info.entries += entries.size();
    for (auto& e : entries) out.entries.push_back(std::move(e));
    out.info.next_segment = s.segment_index + 1;
  }
  return out;
}

}  // namespace

RecoveryResult recover(ObjectStore& store, const std::string& bucket, const SchemaCatalog& catalog,
                       RecoverOptions options) {
  if (options.replicas.empty()) options.replicas = {bucket};
  RecoveryResult result;
  result.engine = std::make_unique<MvccEngine>(catalog);
  MvccEngine& engine = *result.engine;
  std::set<TableId> created;
  auto ensure_table = [&](TableId t) {
    if (created.insert(t).second) engine.create_table(t);
  };
  for (TableId t : options.tables) ensure_table(t);

  auto ckpt = load_checkpoint(store, options.replicas.front());
  Csn ts{0};
  std::map<LogId, std::uint32_t> resume;
  if (ckpt) {
    ts = ckpt->meta.checkpoint_ts;
    for (const auto& r : ckpt->meta.resume) resume[r.log_id] = r.segment_index;
    for (const auto& snap : ckpt->tables) {
      ensure_table(snap.table);
      for (const auto& row : snap.rows) engine.install(snap.table, row.rid, row.csn, ByteView(row.image));
    }
    result.checkpoint = ckpt->meta;
  }
  result.checkpoint_ts = ts;

  // Union of segments across replicas.
  std::map<LogId, std::map<std::uint32_t, SegmentInfo>> by_log;
  for (const auto& b : options.replicas)
    for (auto& s : list_segments(store, b)) by_log[s.log_id].try_emplace(s.segment_index, s);
  for (const auto& [log, r] : resume) {
    auto& info = result.logs[log];
    info.next_segment = std::max(info.next_segment, r);
  }

  std::vector<std::pair<LogId, std::vector<SegmentInfo>>> work;
  for (auto& [log, segs] : by_log) {
    std::vector<SegmentInfo> list;
    const auto from = resume.contains(log) ? resume[log] : 0u;
    for (auto& [idx, s] : segs)
      if (idx >= from) list.push_back(s);
    auto& info = result.logs[log];
    if (!segs.empty()) info.next_segment = std::max(info.next_segment, segs.rbegin()->first + 1);
    work.emplace_back(log, std::move(list));
  }

  std::vector<LogScan> scans(work.size());
  if (options.parallel && work.size() > 1) {
    std::vector<std::future<LogScan>> futures;
    for (auto& w : work)
      futures.push_back(std::async(std::launch::async, [&, segs = &w.second] {
        return scan_log(store, options.replicas, catalog, *segs);
      }));
    for (std::size_t i = 0; i < futures.size(); ++i) scans[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < work.size(); ++i) scans[i] = scan_log(store, options.replicas, catalog, work[i].second);
  }

  std::vector<TxnEntry> all;
  std::uint64_t max_seen = ts.value;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    auto& info = result.logs[work[i].first];
    info.entries = scans[i].info.entries;
    info.torn_tail = scans[i].info.torn_tail;
    info.next_segment = std::max(info.next_segment, scans[i].info.next_segment);
    for (auto& e : scans[i].entries) {
      max_seen = std::max(max_seen, e.csn.value);
      all.push_back(std::move(e));
    }
  }
  result.decoded = all.size();
  std::sort(all.begin(), all.end(), [](const TxnEntry& a, const TxnEntry& b) { return a.csn < b.csn; });

  // One ascending pass reaches the fixpoint because dsn < csn.
  std::set<std::uint64_t> replayed;
  for (const auto& e : all) {
    if (e.csn <= ts) {
      ++result.skipped_checkpointed;
      continue;
    }
    const bool ok = e.dsn.is_none() || e.dsn <= ts || replayed.contains(e.dsn.value);
    if (!ok) {
      ++result.excluded;
      continue;
    }
    for (const auto& rec : e.records) {
      ensure_table(rec.table_id);
      engine.apply(rec, e.csn);
    }
    replayed.insert(e.csn.value);
    result.replayed_csns.push_back(e.csn);
  }
  result.replayed = replayed.size();
  result.next_csn = Csn{max_seen + 1};
  engine.set_next_csn(result.next_csn);
  return result;
}

}  // namespace objwal
