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

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "objwal/clock.hpp"
#include "objwal/mvcc.hpp"
#include "objwal/object_store.hpp"

namespace objwal {

/// Where replay of one log starts: segments below segment_index are covered
/// by the checkpoint.
struct LogResume {
  LogId log_id = 0;
  std::uint32_t segment_index = 0;
  bool operator==(const LogResume&) const = default;
};

struct CheckpointMeta {
  Csn checkpoint_ts;
  std::vector<std::string> table_keys;
  std::vector<LogResume> resume;
  std::int64_t created_ns = 0;

  bool operator==(const CheckpointMeta&) const = default;
};

std::string checkpoint_meta_key(Csn ts);
std::string checkpoint_table_key(Csn ts, TableId table);

Bytes encode_checkpoint_meta(const CheckpointMeta& meta);
/// nullopt when the object is corrupt.
std::optional<CheckpointMeta> decode_checkpoint_meta(ByteView bytes);

/// Serializes the newest version with csn <= ts of every row as framed
/// (rid, csn, image) rows, one frame per up to 4096 rows.
Bytes encode_table_snapshot(MvccEngine& engine, TableId table, Csn ts);

/// Per-segment summary read from storage.
struct SegmentInfo {
  LogId log_id = 0;
  std::uint32_t segment_index = 0;
  std::string key;
  std::uint64_t length = 0;
  std::optional<SegmentFooter> footer;  // present once sealed
};

/// Every log segment in the bucket, ordered by (log, segment).
std::vector<SegmentInfo> list_segments(ObjectStore& store, const std::string& bucket);

/// Writes the checkpoint objects for snapshot `ts` and publishes the
/// metadata object last. The caller guarantees that every transaction with
/// csn <= ts has been released and that `ts` stays pinned meanwhile.
CheckpointMeta write_checkpoint(MvccEngine& engine, Csn ts, ObjectStore& store, const std::string& bucket,
                                Clock& clock = SteadyClock::instance());

/// Deletes sealed segments whose footer max csn <= checkpoint_ts, and
/// checkpoint objects older than `meta`. Idempotent. Returns deleted keys.
std::vector<std::string> truncate(const CheckpointMeta& meta, ObjectStore& store, const std::string& bucket);

class CorruptLog : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RecoverOptions {
  /// Replicas of the same log; each object is read from the replica that
  /// holds the longest copy. Defaults to {bucket}.
  std::vector<std::string> replicas;
  bool parallel = true;
  /// Tables created even if neither checkpoint nor log mention them.
  std::vector<TableId> tables;
};

struct LogRecoveryInfo {
  std::size_t entries = 0;
  // Segment index a restarted log should write to next.
  std::uint32_t next_segment = 0;
  bool torn_tail = false;
};

struct RecoveryResult {
  std::unique_ptr<MvccEngine> engine;
  std::optional<CheckpointMeta> checkpoint;
  Csn checkpoint_ts;
  Csn next_csn{1};
  std::size_t decoded = 0;
  std::size_t skipped_checkpointed = 0;
  std::size_t replayed = 0;
  std::size_t excluded = 0;
  std::vector<Csn> replayed_csns;  // ascending
  std::map<LogId, LogRecoveryInfo> logs;
};

/// Loads the newest intact checkpoint, decodes every log from its resume
/// position until the torn tail, and replays entries whose DSN chain is
/// satisfied (dsn == 0, dsn <= checkpoint_ts, or dsn itself replayed), in
/// ascending csn order. Throws CorruptLog when a sealed segment is damaged.
RecoveryResult recover(ObjectStore& store, const std::string& bucket,
                       const SchemaCatalog& catalog = SchemaCatalog::fixed_default(), RecoverOptions options = {});

}  // namespace objwal
