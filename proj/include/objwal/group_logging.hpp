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
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "objwal/clock.hpp"
#include "objwal/object_store.hpp"
#include "objwal/types.hpp"
#include "objwal/wal_format.hpp"

namespace objwal {

inline constexpr std::size_t kKiB = 1024;
inline constexpr std::size_t kMiB = 1024 * kKiB;

struct LoggingConfig {
  std::size_t worker_count = 8;
  // Threads sharing one log ("sharing ratio"). 1 is per-thread logging.
  std::size_t group_size = 2;
  std::size_t buffer_bytes = 1 * kMiB;
  Duration flush_timeout = from_ms(3);
  std::size_t per_thread_base_bytes = 512 * kKiB;
  // Require buffer_bytes >= group_size * per_thread_base_bytes.
  bool proportional = true;
  std::uint32_t segment_append_limit = kDefaultAppendLimit;
  std::uint64_t max_part_bytes = kDefaultMaxPartBytes;

  /// Throws ConfigError.
  void validate() const;
  std::size_t log_count() const { return (worker_count + group_size - 1) / group_size; }

  /// One log per worker with 512 KiB buffers.
  static LoggingConfig per_thread(std::size_t workers);
};

/// Worker index -> log id, contiguous blocks of group_size workers.
std::vector<LogId> assign_groups(const LoggingConfig& config);

/// "log-{log_id}-seg-{segment_index + 1}".
std::string segment_key(LogId log_id, std::uint32_t segment_index);

/// Parses a key produced by segment_key.
std::optional<std::pair<LogId, std::uint32_t>> parse_segment_key(const std::string& key);

class EntryTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

enum class SealReason { kFull, kTimeout, kShutdown };

struct LogBuffer;

/// A claimed byte range in the active buffer. The owner copies its entry into
/// `dest` and then calls LogGroup::complete.
struct ReservedSlot {
  LogBuffer* buffer = nullptr;
  std::uint64_t generation = 0;
  std::uint64_t offset = 0;
  std::span<std::byte> dest;
  Lsn end_lsn;
};

/// A sealed buffer with its destination in the segment sequence.
struct SealedBuffer {
  LogId log_id = 0;
  std::uint64_t generation = 0;
  SealReason reason = SealReason::kFull;
  ByteView data;
  std::uint32_t segment_index = 0;
  std::uint64_t segment_offset = 0;
  // This part is the segment's last; a footer follows the data.
  bool seals_segment = false;
  SegmentFooter footer;  // valid when seals_segment
  std::uint32_t entries = 0;
  Csn max_csn;
  Lsn end_lsn;

  std::uint64_t part_bytes() const { return data.size() + (seals_segment ? kFooterSize : 0); }
  Bytes payload() const;
};

enum class SealStatus { kSealed, kNothingToFlush, kShadowBusy, kStale };

struct SealResult {
  SealStatus status = SealStatus::kNothingToFlush;
  std::optional<SealedBuffer> sealed;
};

struct LogGroupStats {
  std::uint64_t reserved_bytes = 0;
  std::uint64_t sealed_bytes = 0;
  std::uint64_t seals_full = 0;
  std::uint64_t seals_timeout = 0;
  std::uint64_t seals_shutdown = 0;
  std::uint64_t flushes = 0;
};

/// Double-buffered log shared by one group of workers. Claims are lock-free
/// (CAS on the active buffer's offset); sealing is serialized per group and
/// at most one buffer is in flight at a time.
class LogGroup {
 public:
  /// `first_segment` lets a restarted log continue past existing segments.
  LogGroup(LogId id, const LoggingConfig& config, Clock& clock = SteadyClock::instance(),
           std::uint32_t first_segment = 0);
  ~LogGroup();
  LogGroup(const LogGroup&) = delete;
  LogGroup& operator=(const LogGroup&) = delete;

  LogId id() const { return id_; }
  const LoggingConfig& config() const { return config_; }

  /// Non-blocking claim in the active buffer; false when it does not fit.
  /// Throws EntryTooLarge if nbytes exceeds a whole buffer.
  bool try_claim(std::size_t nbytes, ReservedSlot& out);
  /// Blocking claim: seals the full buffer (waiting for the shadow buffer if
  /// it is still in flight) and retries on the fresh one. Sealed buffers
  /// produced on the way go to `on_sealed`.
  ReservedSlot reserve(std::size_t nbytes, const std::function<void(SealedBuffer)>& on_sealed);
  /// Marks a slot's bytes as copied.
  void complete(const ReservedSlot& slot, Csn csn);

  /// Seals the active buffer if it is still generation `expected_generation`
  /// (any generation when nullopt). With wait=false returns kShadowBusy
  /// instead of blocking on the in-flight buffer.
  SealResult seal_and_swap(SealReason reason, bool wait = true,
                           std::optional<std::uint64_t> expected_generation = std::nullopt);

  /// Called by the flusher once `sealed` is durable: advances the durable
  /// frontier and frees the shadow buffer.
  void mark_durable(const SealedBuffer& sealed);

  Lsn durable_lsn() const;
  std::uint64_t active_generation() const { return active_generation_.load(std::memory_order_acquire); }
  /// Time of the first claim into the active buffer, if it is non-empty.
  std::optional<TimePoint> first_unflushed_time() const;
  std::uint64_t active_claimed() const;
  bool shadow_in_flight() const;
  LogGroupStats stats() const;

 private:
  void install_active(LogBuffer* buf);

  const LogId id_;
  const LoggingConfig config_;
  Clock& clock_;
  std::unique_ptr<LogBuffer> buffers_[2];
  std::atomic<LogBuffer*> active_{nullptr};
  std::atomic<std::uint64_t> active_generation_{0};

  mutable std::mutex seal_mu_;
  std::condition_variable shadow_cv_;
  bool shadow_busy_ = false;

  // Segment placement of the next buffer to be sealed (guarded by seal_mu_).
  std::uint32_t segment_index_ = 0;
  std::uint64_t segment_length_ = 0;
  std::uint32_t segment_parts_ = 0;
  SegmentFooter segment_footer_;

  mutable std::mutex durable_mu_;
  Lsn durable_;

  std::atomic<std::uint64_t> reserved_bytes_{0};
  std::uint64_t sealed_bytes_ = 0;
  std::uint64_t seals_[3] = {0, 0, 0};
  std::atomic<std::uint64_t> flushes_{0};
};

/// Writes a sealed buffer to storage: one append (put for backends without
/// append support) with bounded retries at the planned offset.
struct FlushTarget {
  std::string key;
  std::uint64_t expected_offset = 0;
  Bytes payload;
};
FlushTarget flush_target(const SealedBuffer& sealed);

}  // namespace objwal
