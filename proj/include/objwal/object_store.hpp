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

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "objwal/clock.hpp"
#include "objwal/wal_format.hpp"

namespace objwal {

inline constexpr std::uint32_t kDefaultAppendLimit = 10'000;
inline constexpr std::uint64_t kDefaultMaxPartBytes = 5ull << 30;

struct ObjectKey {
  std::string bucket;
  std::string key;

  bool operator==(const ObjectKey&) const = default;
};

enum class StoreErrc {
  kOffsetMismatch,
  kPartLimitExceeded,
  kPartTooLarge,
  kUnavailable,
  kNotFound,
  kRangeInvalid,
  kDiverged,
};

const char* to_string(StoreErrc e);

class StoreError : public std::runtime_error {
 public:
  StoreError(StoreErrc code, const std::string& what, std::uint64_t actual_length = 0)
      : std::runtime_error(what), code_(code), actual_length_(actual_length) {}

  StoreErrc code() const { return code_; }
  // Current object length, set for kOffsetMismatch.
  std::uint64_t actual_length() const { return actual_length_; }

 private:
  StoreErrc code_;
  std::uint64_t actual_length_;
};

/// Half-open byte range [begin, end).
struct ByteRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

struct ObjectInfo {
  std::uint64_t length = 0;
  std::uint32_t parts = 0;
};

enum class OpKind { kGet, kAppend, kPut, kDelete, kHead, kList };
inline constexpr std::size_t kOpKindCount = 6;

/// Request and byte counters. Monotone over a run.
struct CostCounters {
  std::array<std::atomic<std::uint64_t>, kOpKindCount> requests{};
  std::atomic<std::uint64_t> bytes_uploaded{0};
  std::atomic<std::uint64_t> bytes_downloaded{0};
  std::atomic<double> storage_byte_seconds{0.0};

  void record(OpKind op, std::uint64_t up = 0, std::uint64_t down = 0) {
    requests[static_cast<std::size_t>(op)].fetch_add(1, std::memory_order_relaxed);
    if (up) bytes_uploaded.fetch_add(up, std::memory_order_relaxed);
    if (down) bytes_downloaded.fetch_add(down, std::memory_order_relaxed);
  }
  std::uint64_t count(OpKind op) const { return requests[static_cast<std::size_t>(op)].load(); }
  std::uint64_t total_requests() const;
};

struct CostSnapshot {
  std::uint64_t requests = 0;
  std::uint64_t appends = 0;
  std::uint64_t bytes_uploaded = 0;
  std::uint64_t bytes_downloaded = 0;
  double storage_byte_seconds = 0;
};

CostSnapshot snapshot(const CostCounters& c);

struct Pricing {
  double per_million_requests = 1.13;
  double per_gb_upload = 0.0032;
  // Storage term, off unless include_storage is set.
  double per_gb_month = 0.11;
  bool include_storage = false;
};

/// Dollars for the given usage; GB is 10^9 bytes.
double estimate_cost(const CostSnapshot& usage, const Pricing& pricing = {});

/// Object storage with offset-checked appends. Implementations are safe for
/// concurrent use.
class ObjectStore {
 public:
  virtual ~ObjectStore() = default;

  /// Appends iff the object's length equals expected_offset; creates the
  /// object when expected_offset is 0 and it is absent. Returns the new length.
  virtual std::uint64_t append(const ObjectKey& key, std::uint64_t expected_offset, ByteView payload) = 0;
  virtual Bytes get(const ObjectKey& key, std::optional<ByteRange> range = std::nullopt) = 0;
  virtual void put(const ObjectKey& key, ByteView data) = 0;
  /// Idempotent: removing an absent key succeeds.
  virtual void remove(const ObjectKey& key) = 0;
  virtual std::optional<ObjectInfo> head(const ObjectKey& key) = 0;
  /// Keys in `bucket` starting with `prefix`, sorted.
  virtual std::vector<std::string> list(const std::string& bucket, const std::string& prefix) = 0;

  virtual bool supports_append() const { return true; }

  CostCounters& counters() { return counters_; }
  const CostCounters& counters() const { return counters_; }

 protected:
  CostCounters counters_;
};

struct StoreLimits {
  std::uint32_t append_limit = kDefaultAppendLimit;
  std::uint64_t max_part_bytes = kDefaultMaxPartBytes;
};

/// In-memory backend. State only; latency is layered on separately.
class MemoryObjectStore final : public ObjectStore {
 public:
  explicit MemoryObjectStore(StoreLimits limits = {}) : limits_(limits) {}

  std::uint64_t append(const ObjectKey& key, std::uint64_t expected_offset, ByteView payload) override;
  Bytes get(const ObjectKey& key, std::optional<ByteRange> range = std::nullopt) override;
  void put(const ObjectKey& key, ByteView data) override;
  void remove(const ObjectKey& key) override;
  std::optional<ObjectInfo> head(const ObjectKey& key) override;
  std::vector<std::string> list(const std::string& bucket, const std::string& prefix) override;

  /// The next `n` appends to `bucket` fail with kUnavailable.
  void inject_append_failures(const std::string& bucket, int n);

 private:
  struct Object {
    Bytes data;
    std::uint32_t parts = 0;
  };

  bool take_failure(const std::string& bucket);

  StoreLimits limits_;
  std::mutex mu_;
  std::map<std::string, std::map<std::string, Object>> buckets_;
  std::unordered_map<std::string, int> pending_failures_;
};

/// One file per object under {root}/{bucket}/{key}. Appends are positional
/// writes after a length check, fsync'd before returning when `sync` is set.
class LocalDirObjectStore final : public ObjectStore {
 public:
  explicit LocalDirObjectStore(std::filesystem::path root, bool sync = true, StoreLimits limits = {});

  std::uint64_t append(const ObjectKey& key, std::uint64_t expected_offset, ByteView payload) override;
  Bytes get(const ObjectKey& key, std::optional<ByteRange> range = std::nullopt) override;
  void put(const ObjectKey& key, ByteView data) override;
  void remove(const ObjectKey& key) override;
  std::optional<ObjectInfo> head(const ObjectKey& key) override;
  std::vector<std::string> list(const std::string& bucket, const std::string& prefix) override;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path object_path(const ObjectKey& key) const;
  std::filesystem::path parts_path(const ObjectKey& key) const;
  std::uint32_t read_parts(const ObjectKey& key) const;
  void write_parts(const ObjectKey& key, std::uint32_t parts) const;
  std::mutex& object_mutex(const ObjectKey& key);

  std::filesystem::path root_;
  bool sync_;
  StoreLimits limits_;
  std::mutex map_mu_;
  std::unordered_map<std::string, std::unique_ptr<std::mutex>> object_mu_;
};

// ---------------------------------------------------------------------------
// Latency model

/// Piecewise request-size -> latency curve for one operation kind.
struct LatencyCurve {
  Duration flat{0};
  std::uint64_t flat_threshold = 0;
  double slope_ns_per_byte = 0.0;

  Duration at(std::uint64_t size) const;
};

struct LatencyProfile {
  LatencyCurve get;
  LatencyCurve append;
  LatencyCurve put;
  LatencyCurve meta;  // delete/head/list
  double jitter_sigma = 0.0;
  double spike_probability = 0.0;
  double spike_multiplier = 1.0;
  bool supports_append = true;

  /// Low-latency single-zone profile: append 8 ms flat to 512 KiB, then
  /// 14 ms per 1.5 MiB; get 5 ms flat to 2 MiB.
  static LatencyProfile express();
  /// Regional profile without append support: put of 2 MiB takes 77 ms.
  static LatencyProfile standard();

  LatencyProfile without_jitter() const;
  const LatencyCurve& curve(OpKind op) const;
};

/// Seeded sampler with one independent stream per bucket.
class LatencyModel {
 public:
  explicit LatencyModel(LatencyProfile profile, std::uint64_t seed = 1);

  const LatencyProfile& profile() const { return profile_; }
  Duration deterministic(OpKind op, std::uint64_t size) const { return profile_.curve(op).at(size); }
  Duration sample(const std::string& bucket, OpKind op, std::uint64_t size);
  /// Overrides the seed of one bucket's stream.
  void seed_bucket(const std::string& bucket, std::uint64_t seed);
  /// Gives one bucket its own profile (e.g. a slower replica).
  void set_bucket_profile(const std::string& bucket, LatencyProfile profile);

 private:
  std::mt19937_64& stream(const std::string& bucket);

  LatencyProfile profile_;
  std::unordered_map<std::string, LatencyProfile> bucket_profiles_;
  std::uint64_t seed_;
  std::mutex mu_;
  std::unordered_map<std::string, std::mt19937_64> streams_;
};

/// sample(model, op, size) with jitter and tail spikes drawn from `rng`.
Duration sample_latency(const LatencyProfile& profile, OpKind op, std::uint64_t size, std::mt19937_64& rng);

/// Decorator that delays every request by a sampled latency on `clock`,
/// with at most `max_in_flight` concurrent requests.
class LatencyInjectingStore final : public ObjectStore {
 public:
  LatencyInjectingStore(ObjectStore& inner, LatencyModel& model, Clock& clock, std::size_t max_in_flight = 64);

  std::uint64_t append(const ObjectKey& key, std::uint64_t expected_offset, ByteView payload) override;
  Bytes get(const ObjectKey& key, std::optional<ByteRange> range = std::nullopt) override;
  void put(const ObjectKey& key, ByteView data) override;
  void remove(const ObjectKey& key) override;
  std::optional<ObjectInfo> head(const ObjectKey& key) override;
  std::vector<std::string> list(const std::string& bucket, const std::string& prefix) override;
  bool supports_append() const override { return model_.profile().supports_append; }

 private:
  class Slot;
  void delay(const std::string& bucket, OpKind op, std::uint64_t size);

  ObjectStore& inner_;
  LatencyModel& model_;
  Clock& clock_;
  std::size_t max_in_flight_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
};

// ---------------------------------------------------------------------------
// Replication

enum class AckPolicy { kAll, kMajority };

struct ReplicationPolicy {
  std::vector<std::string> buckets;
  AckPolicy ack = AckPolicy::kAll;

  std::size_t required_acks() const { return ack == AckPolicy::kAll ? buckets.size() : buckets.size() / 2 + 1; }
  void validate() const;
};

struct RetryPolicy {
  int max_retries = 3;
  Duration initial_backoff = from_ms(8);
  double multiplier = 2.0;
};

struct ReplicaOutcome {
  std::string bucket;
  bool ok = false;
  int attempts = 0;
  Duration completion{0};  // from issue to final response
};

struct ReplicatedAck {
  std::uint64_t new_length = 0;
  Duration ack_latency{0};
  std::vector<ReplicaOutcome> replicas;
};

/// One offset-checked append with retries. An OffsetMismatch whose actual
/// length equals expected_offset + payload size counts as already applied.
/// `on_attempt` returns the latency of each attempt (may sleep).
std::uint64_t append_with_retry(ObjectStore& store, const ObjectKey& key, std::uint64_t expected_offset,
                                ByteView payload, const RetryPolicy& retry,
                                const std::function<void(Duration)>& wait, int* attempts = nullptr);

/// Issues the append to every bucket concurrently and returns once the ack
/// policy is met. Each bucket has its own worker thread, so appends to one
/// replica are applied in issue order and stragglers finish in the
/// background. Backends without append get a put of the payload.
class ReplicatedAppender {
 public:
  ReplicatedAppender(ObjectStore& store, ReplicationPolicy policy, RetryPolicy retry, Clock& clock);
  ~ReplicatedAppender();
  ReplicatedAppender(const ReplicatedAppender&) = delete;
  ReplicatedAppender& operator=(const ReplicatedAppender&) = delete;

  ReplicatedAck append(const std::string& key, std::uint64_t expected_offset, ByteView payload);
  const ReplicationPolicy& policy() const { return policy_; }
  void wait_idle();

 private:
  struct Replica;

  ObjectStore& store_;
  ReplicationPolicy policy_;
  RetryPolicy retry_;
  Clock& clock_;
  std::vector<std::unique_ptr<Replica>> replicas_;
};

/// Same contract evaluated in simulated time: each replica's attempts are
/// applied to `store` immediately and timed with `model`; the ack latency is
/// the required_acks-th smallest replica completion.
ReplicatedAck simulate_replicated_append(ObjectStore& store, LatencyModel& model, const ReplicationPolicy& policy,
                                         const RetryPolicy& retry, const std::string& key,
                                         std::uint64_t expected_offset, ByteView payload, bool use_put = false);

}  // namespace objwal
