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

#include "objwal/group_logging.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <thread>

namespace objwal {

namespace {

constexpr std::uint64_t kSealedBit = std::uint64_t{1} << 63;
constexpr std::int64_t kNoTime = -1;

void atomic_max(std::atomic<std::uint64_t>& a, std::uint64_t v) {
  auto cur = a.load(std::memory_order_relaxed);
  while (cur < v && !a.compare_exchange_weak(cur, v, std::memory_order_relaxed)) {
  }
}

void atomic_min(std::atomic<std::uint64_t>& a, std::uint64_t v) {
  auto cur = a.load(std::memory_order_relaxed);
  while (cur > v && !a.compare_exchange_weak(cur, v, std::memory_order_relaxed)) {
  }
}

}  // namespace

struct LogBuffer {
  explicit LogBuffer(std::size_t capacity) : data(new std::byte[capacity]), capacity(capacity) {}

  void reset(std::uint64_t gen, std::uint32_t segment, std::uint64_t offset) {
    generation = gen;
    base_segment = segment;
    base_offset = offset;
    completed.store(0, std::memory_order_relaxed);
    entries.store(0, std::memory_order_relaxed);
    min_csn.store(UINT64_MAX, std::memory_order_relaxed);
    max_csn.store(0, std::memory_order_relaxed);
    first_claim_ns.store(kNoTime, std::memory_order_relaxed);
    claimed.store(0, std::memory_order_release);
  }

  std::unique_ptr<std::byte[]> data;
  const std::size_t capacity;

  std::uint64_t generation = 0;
  std::uint32_t base_segment = 0;
  std::uint64_t base_offset = 0;

  // Bytes claimed so far; kSealedBit once sealed.
  std::atomic<std::uint64_t> claimed{kSealedBit};
  std::atomic<std::uint64_t> completed{0};
  std::atomic<std::uint32_t> entries{0};
  std::atomic<std::uint64_t> min_csn{UINT64_MAX};
  std::atomic<std::uint64_t> max_csn{0};
  std::atomic<std::int64_t> first_claim_ns{kNoTime};
};

void LoggingConfig::validate() const {
  if (group_size == 0) throw ConfigError("group_size must be at least 1");
  if (worker_count == 0) throw ConfigError("worker_count must be at least 1");
  if (buffer_bytes == 0) throw ConfigError("buffer_bytes must be positive");
  if (buffer_bytes > max_part_bytes) throw ConfigError("buffer_bytes exceeds the maximum part size");
  if (segment_append_limit == 0) throw ConfigError("segment_append_limit must be at least 1");
  if (proportional && buffer_bytes < group_size * per_thread_base_bytes)
    throw ConfigError("proportional logging requires buffer_bytes >= group_size * per_thread_base_bytes");
}

LoggingConfig LoggingConfig::per_thread(std::size_t workers) {
  LoggingConfig c;
  c.worker_count = workers;
  c.group_size = 1;
  c.buffer_bytes = 512 * kKiB;
  return c;
}

std::vector<LogId> assign_groups(const LoggingConfig& config) {
  if (config.group_size == 0) throw ConfigError("group_size must be at least 1");
  std::vector<LogId> out(config.worker_count);
  for (std::size_t w = 0; w < config.worker_count; ++w) out[w] = static_cast<LogId>(w / config.group_size);
  return out;
}

std::string segment_key(LogId log_id, std::uint32_t segment_index) {
  return "log-" + std::to_string(log_id) + "-seg-" + std::to_string(std::uint64_t{segment_index} + 1);
}

std::optional<std::pair<LogId, std::uint32_t>> parse_segment_key(const std::string& key) {
  constexpr std::string_view kPrefix = "log-";
  constexpr std::string_view kMid = "-seg-";
  if (!key.starts_with(kPrefix)) return std::nullopt;
  const auto mid = key.find(kMid, kPrefix.size());
  if (mid == std::string::npos) return std::nullopt;
  LogId log = 0;
  std::uint64_t seg = 0;
  const char* b = key.data();
  auto r1 = std::from_chars(b + kPrefix.size(), b + mid, log);
  auto r2 = std::from_chars(b + mid + kMid.size(), b + key.size(), seg);
  if (r1.ec != std::errc{} || r1.ptr != b + mid || r2.ec != std::errc{} || r2.ptr != b + key.size() || seg == 0)
    return std::nullopt;
  return std::pair{log, static_cast<std::uint32_t>(seg - 1)};
}

Bytes SealedBuffer::payload() const {
  Bytes out;
  out.reserve(part_bytes());
  out.assign(data.begin(), data.end());
  if (seals_segment) {
    Bytes f = encode_footer(footer);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

FlushTarget flush_target(const SealedBuffer& sealed) {
  return {segment_key(sealed.log_id, sealed.segment_index), sealed.segment_offset, sealed.payload()};
}

LogGroup::LogGroup(LogId id, const LoggingConfig& config, Clock& clock, std::uint32_t first_segment)
    : id_(id), config_(config), clock_(clock), segment_index_(first_segment) {
  if (config_.buffer_bytes == 0) throw ConfigError("buffer_bytes must be positive");
  buffers_[0] = std::make_unique<LogBuffer>(config_.buffer_bytes);
  buffers_[1] = std::make_unique<LogBuffer>(config_.buffer_bytes);
  durable_ = Lsn{id_, first_segment, 0};
  buffers_[0]->reset(0, first_segment, 0);
  install_active(buffers_[0].get());
}

LogGroup::~LogGroup() = default;

void LogGroup::install_active(LogBuffer* buf) {
  active_generation_.store(buf->generation, std::memory_order_release);
  active_.store(buf, std::memory_order_release);
}

bool LogGroup::try_claim(std::size_t nbytes, ReservedSlot& out) {
  if (nbytes > config_.buffer_bytes)
    throw EntryTooLarge("entry of " + std::to_string(nbytes) + " bytes exceeds log buffer of " +
                        std::to_string(config_.buffer_bytes));
  LogBuffer* b = active_.load(std::memory_order_acquire);
  std::uint64_t cur = b->claimed.load(std::memory_order_acquire);
  while (true) {
    if (cur & kSealedBit) {
      LogBuffer* now = active_.load(std::memory_order_acquire);
      if (now == b) return false;
      b = now;
      cur = b->claimed.load(std::memory_order_acquire);
      continue;
    }
    if (cur + nbytes > b->capacity) return false;
    if (b->claimed.compare_exchange_weak(cur, cur + nbytes, std::memory_order_acq_rel)) break;
  }
  if (cur == 0) b->first_claim_ns.store(clock_.now().count(), std::memory_order_release);
  reserved_bytes_.fetch_add(nbytes, std::memory_order_relaxed);
  out.buffer = b;
  out.generation = b->generation;
  out.offset = cur;
  out.dest = std::span<std::byte>(b->data.get() + cur, nbytes);
  out.end_lsn = Lsn{id_, b->base_segment, b->base_offset + cur + nbytes};
  return true;
}

ReservedSlot LogGroup::reserve(std::size_t nbytes, const std::function<void(SealedBuffer)>& on_sealed) {
  ReservedSlot slot;
  while (!try_claim(nbytes, slot)) {
    auto res = seal_and_swap(SealReason::kFull, /*wait=*/true, active_generation());
    if (res.status == SealStatus::kSealed && on_sealed) on_sealed(std::move(*res.sealed));
  }
  return slot;
}

void LogGroup::complete(const ReservedSlot& slot, Csn csn) {
  LogBuffer* b = slot.buffer;
  atomic_min(b->min_csn, csn.value);
  atomic_max(b->max_csn, csn.value);
  b->entries.fetch_add(1, std::memory_order_relaxed);
  b->completed.fetch_add(slot.dest.size(), std::memory_order_release);
}

SealResult LogGroup::seal_and_swap(SealReason reason, bool wait, std::optional<std::uint64_t> expected_generation) {
  std::unique_lock lock(seal_mu_);
  LogBuffer* b = nullptr;
  while (true) {
    b = active_.load(std::memory_order_acquire);
    if (expected_generation && b->generation != *expected_generation) return {SealStatus::kStale, std::nullopt};
    if ((b->claimed.load(std::memory_order_acquire) & ~kSealedBit) == 0) return {SealStatus::kNothingToFlush, {}};
    if (!shadow_busy_) break;
    if (!wait) return {SealStatus::kShadowBusy, std::nullopt};
    shadow_cv_.wait(lock, [&] { return !shadow_busy_; });
  }

  const std::uint64_t length = b->claimed.fetch_or(kSealedBit, std::memory_order_acq_rel) & ~kSealedBit;
  // Claimants copy after claiming; wait for the in-flight copies.
  while (b->completed.load(std::memory_order_acquire) != length) std::this_thread::yield();

  SealedBuffer s;
  s.log_id = id_;
  s.generation = b->generation;
  s.reason = reason;
  s.data = ByteView(b->data.get(), length);
  s.segment_index = b->base_segment;
  s.segment_offset = b->base_offset;
  s.entries = b->entries.load(std::memory_order_relaxed);
  s.max_csn = Csn{b->max_csn.load(std::memory_order_relaxed)};

  if (s.entries > 0) {
    const Csn lo{b->min_csn.load(std::memory_order_relaxed)};
    if (segment_footer_.entry_count == 0 || lo < segment_footer_.min_csn) segment_footer_.min_csn = lo;
    segment_footer_.max_csn = std::max(segment_footer_.max_csn, s.max_csn);
    segment_footer_.entry_count += s.entries;
  }
  ++segment_parts_;
  s.seals_segment = segment_parts_ >= config_.segment_append_limit;
  if (s.seals_segment) s.footer = segment_footer_;
  s.end_lsn = Lsn{id_, s.segment_index, s.segment_offset + s.part_bytes()};

  if (s.seals_segment) {
    ++segment_index_;
    segment_length_ = 0;
    segment_parts_ = 0;
    segment_footer_ = {};
  } else {
    segment_length_ += length;
  }

  sealed_bytes_ += length;
  ++seals_[static_cast<int>(reason)];
  shadow_busy_ = true;

  LogBuffer* next = (b == buffers_[0].get()) ? buffers_[1].get() : buffers_[0].get();
  next->reset(b->generation + 1, segment_index_, segment_length_);
  install_active(next);
  return {SealStatus::kSealed, std::move(s)};
}

void LogGroup::mark_durable(const SealedBuffer& sealed) {
  {
    std::lock_guard lock(durable_mu_);
    if (sealed.end_lsn > durable_) durable_ = sealed.end_lsn;
  }
  flushes_.fetch_add(1, std::memory_order_relaxed);
  {
    std::lock_guard lock(seal_mu_);
    shadow_busy_ = false;
  }
  shadow_cv_.notify_all();
}

Lsn LogGroup::durable_lsn() const {
  std::lock_guard lock(durable_mu_);
  return durable_;
}

std::optional<TimePoint> LogGroup::first_unflushed_time() const {
  LogBuffer* b = active_.load(std::memory_order_acquire);
  if ((b->claimed.load(std::memory_order_acquire) & ~kSealedBit) == 0) return std::nullopt;
  const auto t = b->first_claim_ns.load(std::memory_order_acquire);
  // The first claimant may not have published its timestamp yet.
  return t == kNoTime ? clock_.now() : TimePoint(t);
}

std::uint64_t LogGroup::active_claimed() const {
  return active_.load(std::memory_order_acquire)->claimed.load(std::memory_order_acquire) & ~kSealedBit;
}

bool LogGroup::shadow_in_flight() const {
  std::lock_guard lock(seal_mu_);
  return shadow_busy_;
}

LogGroupStats LogGroup::stats() const {
  std::lock_guard lock(seal_mu_);
  LogGroupStats s;
  s.reserved_bytes = reserved_bytes_.load();
  s.sealed_bytes = sealed_bytes_;
  s.seals_full = seals_[0];
  s.seals_timeout = seals_[1];
  s.seals_shutdown = seals_[2];
  s.flushes = flushes_.load();
  return s;
}

}  // namespace objwal
