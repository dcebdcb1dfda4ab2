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

#include "objwal/object_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <thread>

namespace objwal {

namespace fs = std::filesystem;

const char* to_string(StoreErrc e) {
  switch (e) {
    case StoreErrc::kOffsetMismatch: return "OffsetMismatch";
    case StoreErrc::kPartLimitExceeded: return "PartLimitExceeded";
    case StoreErrc::kPartTooLarge: return "PartTooLarge";
    case StoreErrc::kUnavailable: return "Unavailable";
    case StoreErrc::kNotFound: return "NotFound";
    case StoreErrc::kRangeInvalid: return "RangeInvalid";
    case StoreErrc::kDiverged: return "Diverged";
  }
  return "Unknown";
}

std::uint64_t CostCounters::total_requests() const {
  std::uint64_t n = 0;
  for (const auto& r : requests) n += r.load(std::memory_order_relaxed);
  return n;
}

CostSnapshot snapshot(const CostCounters& c) {
  CostSnapshot s;
  s.requests = c.total_requests();
  s.appends = c.count(OpKind::kAppend);
  s.bytes_uploaded = c.bytes_uploaded.load();
  s.bytes_downloaded = c.bytes_downloaded.load();
  s.storage_byte_seconds = c.storage_byte_seconds.load();
  return s;
}

double estimate_cost(const CostSnapshot& usage, const Pricing& pricing) {
  double cost = static_cast<double>(usage.requests) / 1e6 * pricing.per_million_requests +
                static_cast<double>(usage.bytes_uploaded) / 1e9 * pricing.per_gb_upload;
  if (pricing.include_storage) {
    constexpr double kSecondsPerMonth = 30.0 * 24 * 3600;
    cost += usage.storage_byte_seconds / 1e9 / kSecondsPerMonth * pricing.per_gb_month;
  }
  return cost;
}

namespace {

Bytes slice(const Bytes& data, std::optional<ByteRange> range, const ObjectKey& key) {
  if (!range) return data;
  if (range->begin > range->end || range->end > data.size())
    throw StoreError(StoreErrc::kRangeInvalid, "invalid range for " + key.bucket + "/" + key.key);
  return Bytes(data.begin() + static_cast<std::ptrdiff_t>(range->begin),
               data.begin() + static_cast<std::ptrdiff_t>(range->end));
}

void check_part_size(const StoreLimits& limits, ByteView payload) {
  if (payload.size() > limits.max_part_bytes)
    throw StoreError(StoreErrc::kPartTooLarge, "append part exceeds maximum part size");
}

}  // namespace

// --- MemoryObjectStore ------------------------------------------------------

bool MemoryObjectStore::take_failure(const std::string& bucket) {
  auto it = pending_failures_.find(bucket);
  if (it == pending_failures_.end() || it->second == 0) return false;
  --it->second;
  return true;
}

void MemoryObjectStore::inject_append_failures(const std::string& bucket, int n) {
  std::lock_guard lock(mu_);
  pending_failures_[bucket] += n;
}

std::uint64_t MemoryObjectStore::append(const ObjectKey& key, std::uint64_t expected_offset, ByteView payload) {
  counters_.record(OpKind::kAppend, payload.size());
  check_part_size(limits_, payload);
  std::lock_guard lock(mu_);
  if (take_failure(key.bucket)) throw StoreError(StoreErrc::kUnavailable, "injected failure on " + key.bucket);
  auto& bucket = buckets_[key.bucket];
  auto it = bucket.find(key.key);
  if (it == bucket.end()) {
    if (expected_offset != 0) throw StoreError(StoreErrc::kOffsetMismatch, "append to absent object", 0);
    it = bucket.emplace(key.key, Object{}).first;
  }
  Object& obj = it->second;
  if (obj.data.size() != expected_offset)
    throw StoreError(StoreErrc::kOffsetMismatch, "stale append offset", obj.data.size());
  if (obj.parts >= limits_.append_limit)
    throw StoreError(StoreErrc::kPartLimitExceeded, "object reached its append limit");
  obj.data.insert(obj.data.end(), payload.begin(), payload.end());
  ++obj.parts;
  return obj.data.size();
}

Bytes MemoryObjectStore::get(const ObjectKey& key, std::optional<ByteRange> range) {
  std::lock_guard lock(mu_);
  auto b = buckets_.find(key.bucket);
  if (b == buckets_.end() || !b->second.contains(key.key)) {
    counters_.record(OpKind::kGet);
    throw StoreError(StoreErrc::kNotFound, "no such object " + key.bucket + "/" + key.key);
  }
  try {
    Bytes out = slice(b->second.at(key.key).data, range, key);
    counters_.record(OpKind::kGet, 0, out.size());
    return out;
  } catch (...) {
    counters_.record(OpKind::kGet);
    throw;
  }
}

void MemoryObjectStore::put(const ObjectKey& key, ByteView data) {
  counters_.record(OpKind::kPut, data.size());
  check_part_size(limits_, data);
  std::lock_guard lock(mu_);
  auto& obj = buckets_[key.bucket][key.key];
  obj.data.assign(data.begin(), data.end());
  obj.parts = 1;
}

void MemoryObjectStore::remove(const ObjectKey& key) {
  counters_.record(OpKind::kDelete);
  std::lock_guard lock(mu_);
  auto b = buckets_.find(key.bucket);
  if (b != buckets_.end()) b->second.erase(key.key);
}

std::optional<ObjectInfo> MemoryObjectStore::head(const ObjectKey& key) {
  counters_.record(OpKind::kHead);
  std::lock_guard lock(mu_);
  auto b = buckets_.find(key.bucket);
  if (b == buckets_.end()) return std::nullopt;
  auto it = b->second.find(key.key);
  if (it == b->second.end()) return std::nullopt;
  return ObjectInfo{it->second.data.size(), it->second.parts};
}

std::vector<std::string> MemoryObjectStore::list(const std::string& bucket, const std::string& prefix) {
  counters_.record(OpKind::kList);
  std::lock_guard lock(mu_);
  std::vector<std::string> keys;
  auto b = buckets_.find(bucket);
  if (b == buckets_.end()) return keys;
  for (auto it = b->second.lower_bound(prefix); it != b->second.end() && it->first.starts_with(prefix); ++it)
    keys.push_back(it->first);
  return keys;
}

// --- LocalDirObjectStore ----------------------------------------------------

LocalDirObjectStore::LocalDirObjectStore(fs::path root, bool sync, StoreLimits limits)
    : root_(std::move(root)), sync_(sync), limits_(limits) {
  fs::create_directories(root_);
}

fs::path LocalDirObjectStore::object_path(const ObjectKey& key) const { return root_ / key.bucket / key.key; }

// Part counts live outside the bucket directories so listings see only objects.
fs::path LocalDirObjectStore::parts_path(const ObjectKey& key) const {
  return root_ / ".parts" / key.bucket / key.key;
}

std::uint32_t LocalDirObjectStore::read_parts(const ObjectKey& key) const {
  std::ifstream in(parts_path(key));
  std::uint32_t parts = 0;
  if (in) in >> parts;
  return parts;
}

void LocalDirObjectStore::write_parts(const ObjectKey& key, std::uint32_t parts) const {
  auto p = parts_path(key);
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::trunc) << parts;
}

std::mutex& LocalDirObjectStore::object_mutex(const ObjectKey& key) {
  std::lock_guard lock(map_mu_);
  auto& m = object_mu_[key.bucket + '\0' + key.key];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

namespace {

void write_all(int fd, ByteView data, std::uint64_t offset) {
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::pwrite(fd, data.data() + done, data.size() - done, static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StoreError(StoreErrc::kUnavailable, "pwrite failed");
    }
    done += static_cast<std::size_t>(n);
  }
}

}  // namespace

std::uint64_t LocalDirObjectStore::append(const ObjectKey& key, std::uint64_t expected_offset, ByteView payload) {
  counters_.record(OpKind::kAppend, payload.size());
  check_part_size(limits_, payload);
  std::lock_guard lock(object_mutex(key));
  const auto path = object_path(key);
  std::error_code ec;
  const bool exists = fs::exists(path, ec);
  const std::uint64_t length = exists ? fs::file_size(path) : 0;
  if (!exists && expected_offset != 0) throw StoreError(StoreErrc::kOffsetMismatch, "append to absent object", 0);
  if (length != expected_offset) throw StoreError(StoreErrc::kOffsetMismatch, "stale append offset", length);
  const std::uint32_t parts = exists ? read_parts(key) : 0;
  if (parts >= limits_.append_limit)
    throw StoreError(StoreErrc::kPartLimitExceeded, "object reached its append limit");

  fs::create_directories(path.parent_path());
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT, 0644);
  if (fd < 0) throw StoreError(StoreErrc::kUnavailable, "cannot open " + path.string());
  try {
    write_all(fd, payload, expected_offset);
    if (sync_ && ::fsync(fd) != 0) throw StoreError(StoreErrc::kUnavailable, "fsync failed");
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  write_parts(key, parts + 1);
  return expected_offset + payload.size();
}

Bytes LocalDirObjectStore::get(const ObjectKey& key, std::optional<ByteRange> range) {
  std::lock_guard lock(object_mutex(key));
  std::ifstream in(object_path(key), std::ios::binary);
  if (!in) {
    counters_.record(OpKind::kGet);
    throw StoreError(StoreErrc::kNotFound, "no such object " + key.bucket + "/" + key.key);
  }
  in.seekg(0, std::ios::end);
  Bytes data(static_cast<std::size_t>(in.tellg()));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  try {
    Bytes out = slice(data, range, key);
    counters_.record(OpKind::kGet, 0, out.size());
    return out;
  } catch (...) {
    counters_.record(OpKind::kGet);
    throw;
  }
}

void LocalDirObjectStore::put(const ObjectKey& key, ByteView data) {
  counters_.record(OpKind::kPut, data.size());
  check_part_size(limits_, data);
  std::lock_guard lock(object_mutex(key));
  const auto path = object_path(key);
  fs::create_directories(path.parent_path());
  // Write-then-rename so a crash never leaves a half-written object.
  const auto tmp = fs::path(path.string() + ".tmp");
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw StoreError(StoreErrc::kUnavailable, "cannot open " + tmp.string());
  try {
    write_all(fd, data, 0);
    if (sync_ && ::fsync(fd) != 0) throw StoreError(StoreErrc::kUnavailable, "fsync failed");
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  fs::rename(tmp, path);
  write_parts(key, 1);
}

void LocalDirObjectStore::remove(const ObjectKey& key) {
  counters_.record(OpKind::kDelete);
  std::lock_guard lock(object_mutex(key));
  std::error_code ec;
  fs::remove(object_path(key), ec);
  fs::remove(parts_path(key), ec);
}

std::optional<ObjectInfo> LocalDirObjectStore::head(const ObjectKey& key) {
  counters_.record(OpKind::kHead);
  std::lock_guard lock(object_mutex(key));
  std::error_code ec;
  const auto path = object_path(key);
  if (!fs::exists(path, ec)) return std::nullopt;
  return ObjectInfo{fs::file_size(path), read_parts(key)};
}

std::vector<std::string> LocalDirObjectStore::list(const std::string& bucket, const std::string& prefix) {
  counters_.record(OpKind::kList);
  std::vector<std::string> keys;
  const auto dir = root_ / bucket;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return keys;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto rel = fs::relative(e.path(), dir).generic_string();
    if (rel.ends_with(".tmp")) continue;
    if (rel.starts_with(prefix)) keys.push_back(std::move(rel));
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

// --- Latency model ----------------------------------------------------------

Duration LatencyCurve::at(std::uint64_t size) const {
  if (size <= flat_threshold) return flat;
  const double extra = slope_ns_per_byte * static_cast<double>(size - flat_threshold);
  return flat + Duration(static_cast<std::int64_t>(std::llround(extra)));
}

namespace {

constexpr std::uint64_t kKiB = 1024;
constexpr std::uint64_t kMiB = 1024 * kKiB;

// Slope through (512 KiB, 8 ms) and (2 MiB, 22 ms).
constexpr double kExpressSlope = 14e6 / static_cast<double>(3 * kMiB / 2);

}  // namespace

LatencyProfile LatencyProfile::express() {
  LatencyProfile p;
  p.append = {from_ms(8), 512 * kKiB, kExpressSlope};
  p.put = p.append;
  p.get = {from_ms(5), 2 * kMiB, kExpressSlope};
  p.meta = {from_ms(5), 0, 0.0};
  p.jitter_sigma = 0.25;
  p.spike_probability = 0.005;
  p.spike_multiplier = 5.0;
  p.supports_append = true;
  return p;
}

LatencyProfile LatencyProfile::standard() {
  // Only the 2 MiB put point is measured; the flat part and slope are chosen
  // to pass through it with the same shape as the express curve.
  LatencyProfile p;
  constexpr double slope = 42e6 / static_cast<double>(3 * kMiB / 2);
  p.put = {from_ms(35), 512 * kKiB, slope};
  p.append = p.put;
  p.get = {from_ms(25), 2 * kMiB, slope};
  p.meta = {from_ms(20), 0, 0.0};
  p.jitter_sigma = 0.25;
  p.spike_probability = 0.005;
  p.spike_multiplier = 5.0;
  p.supports_append = false;
  return p;
}

LatencyProfile LatencyProfile::without_jitter() const {
  LatencyProfile p = *this;
  p.jitter_sigma = 0.0;
  p.spike_probability = 0.0;
  p.spike_multiplier = 1.0;
  return p;
}

const LatencyCurve& LatencyProfile::curve(OpKind op) const {
  switch (op) {
    case OpKind::kGet: return get;
    case OpKind::kAppend: return append;
    case OpKind::kPut: return put;
    default: return meta;
  }
}

Duration sample_latency(const LatencyProfile& profile, OpKind op, std::uint64_t size, std::mt19937_64& rng) {
  double ns = static_cast<double>(profile.curve(op).at(size).count());
  if (profile.jitter_sigma > 0) {
    std::lognormal_distribution<double> jitter(0.0, profile.jitter_sigma);
    ns *= jitter(rng);
  }
  if (profile.spike_probability > 0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < profile.spike_probability) ns *= profile.spike_multiplier;
  }
  return Duration(static_cast<std::int64_t>(std::max(0.0, ns)));
}

LatencyModel::LatencyModel(LatencyProfile profile, std::uint64_t seed) : profile_(profile), seed_(seed) {}

std::mt19937_64& LatencyModel::stream(const std::string& bucket) {
  auto it = streams_.find(bucket);
  if (it == streams_.end()) {
    std::seed_seq seq{seed_, static_cast<std::uint64_t>(std::hash<std::string>{}(bucket))};
    it = streams_.emplace(bucket, std::mt19937_64(seq)).first;
  }
  return it->second;
}

void LatencyModel::seed_bucket(const std::string& bucket, std::uint64_t seed) {
  std::lock_guard lock(mu_);
  streams_[bucket] = std::mt19937_64(seed);
}

void LatencyModel::set_bucket_profile(const std::string& bucket, LatencyProfile profile) {
  std::lock_guard lock(mu_);
  bucket_profiles_[bucket] = profile;
}

Duration LatencyModel::sample(const std::string& bucket, OpKind op, std::uint64_t size) {
  std::lock_guard lock(mu_);
  auto it = bucket_profiles_.find(bucket);
  return sample_latency(it == bucket_profiles_.end() ? profile_ : it->second, op, size, stream(bucket));
}

// --- LatencyInjectingStore --------------------------------------------------

LatencyInjectingStore::LatencyInjectingStore(ObjectStore& inner, LatencyModel& model, Clock& clock,
                                             std::size_t max_in_flight)
    : inner_(inner), model_(model), clock_(clock), max_in_flight_(std::max<std::size_t>(1, max_in_flight)) {}

void LatencyInjectingStore::delay(const std::string& bucket, OpKind op, std::uint64_t size) {
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    ++in_flight_;
  }
  clock_.sleep_for(model_.sample(bucket, op, size));
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::uint64_t LatencyInjectingStore::append(const ObjectKey& key, std::uint64_t expected_offset, ByteView payload) {
  if (!supports_append() && expected_offset != 0)
    throw StoreError(StoreErrc::kPartLimitExceeded, "backend profile does not support appends");
  counters_.record(OpKind::kAppend, payload.size());
  delay(key.bucket, OpKind::kAppend, payload.size());
  return inner_.append(key, expected_offset, payload);
}

Bytes LatencyInjectingStore::get(const ObjectKey& key, std::optional<ByteRange> range) {
  Bytes out = inner_.get(key, range);
  counters_.record(OpKind::kGet, 0, out.size());
  delay(key.bucket, OpKind::kGet, out.size());
  return out;
}

void LatencyInjectingStore::put(const ObjectKey& key, ByteView data) {
  counters_.record(OpKind::kPut, data.size());
  delay(key.bucket, OpKind::kPut, data.size());
  inner_.put(key, data);
}

void LatencyInjectingStore::remove(const ObjectKey& key) {
  counters_.record(OpKind::kDelete);
  delay(key.bucket, OpKind::kDelete, 0);
  inner_.remove(key);
}

std::optional<ObjectInfo> LatencyInjectingStore::head(const ObjectKey& key) {
  counters_.record(OpKind::kHead);
  delay(key.bucket, OpKind::kHead, 0);
  return inner_.head(key);
}

std::vector<std::string> LatencyInjectingStore::list(const std::string& bucket, const std::string& prefix) {
  counters_.record(OpKind::kList);
  delay(bucket, OpKind::kList, 0);
  return inner_.list(bucket, prefix);
}

// --- Replication ------------------------------------------------------------

void ReplicationPolicy::validate() const {
  if (buckets.empty()) throw ConfigError("replication policy needs at least one bucket");
}

std::uint64_t append_with_retry(ObjectStore& store, const ObjectKey& key, std::uint64_t expected_offset,
                                ByteView payload, const RetryPolicy& retry,
                                const std::function<void(Duration)>& wait, int* attempts) {
  Duration backoff = retry.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    if (attempts) *attempts = attempt + 1;
    try {
      return store.append(key, expected_offset, payload);
    } catch (const StoreError& e) {
      if (e.code() == StoreErrc::kOffsetMismatch) {
        // A previous attempt landed even though its response was lost.
        if (attempt > 0 && e.actual_length() == expected_offset + payload.size()) return e.actual_length();
        throw;
      }
      if (e.code() != StoreErrc::kUnavailable || attempt >= retry.max_retries) throw;
    }
    if (wait) wait(backoff);
    backoff = Duration(static_cast<std::int64_t>(static_cast<double>(backoff.count()) * retry.multiplier));
  }
}

struct ReplicatedAppender::Replica {
  std::string bucket;
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::function<void()>> tasks;
  bool busy = false;
  bool stop = false;
  std::thread thread;

  void run() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return stop || !tasks.empty(); });
        if (tasks.empty()) return;
        task = std::move(tasks.front());
        tasks.pop_front();
        busy = true;
      }
      task();
      {
        std::lock_guard lock(mu);
        busy = false;
      }
      cv.notify_all();
    }
  }
};

ReplicatedAppender::ReplicatedAppender(ObjectStore& store, ReplicationPolicy policy, RetryPolicy retry, Clock& clock)
    : store_(store), policy_(std::move(policy)), retry_(retry), clock_(clock) {
  policy_.validate();
  for (const auto& b : policy_.buckets) {
    auto r = std::make_unique<Replica>();
    r->bucket = b;
    r->thread = std::thread([p = r.get()] { p->run(); });
    replicas_.push_back(std::move(r));
  }
}

ReplicatedAppender::~ReplicatedAppender() {
  for (auto& r : replicas_) {
    {
      std::lock_guard lock(r->mu);
      r->stop = true;
    }
    r->cv.notify_all();
  }
  for (auto& r : replicas_) r->thread.join();
}

void ReplicatedAppender::wait_idle() {
  for (auto& r : replicas_) {
    std::unique_lock lock(r->mu);
    r->cv.wait(lock, [&] { return r->tasks.empty() && !r->busy; });
  }
}

ReplicatedAck ReplicatedAppender::append(const std::string& key, std::uint64_t expected_offset, ByteView payload) {
  struct Shared {
    std::mutex mu;
    std::condition_variable cv;
    std::vector<ReplicaOutcome> outcomes;
    std::size_t done = 0;
    std::size_t succeeded = 0;
    std::uint64_t new_length = 0;
    bool diverged = false;
    std::string error;
  };
  auto shared = std::make_shared<Shared>();
  auto data = std::make_shared<Bytes>(payload.begin(), payload.end());
  const std::size_t n = replicas_.size();
  shared->outcomes.resize(n);
  const TimePoint start = clock_.now();
  const bool use_put = !store_.supports_append();

  for (std::size_t i = 0; i < n; ++i) {
    auto task = [this, i, key, expected_offset, shared, data, start, use_put] {
      ReplicaOutcome out;
      out.bucket = policy_.buckets[i];
      std::uint64_t len = 0;
      bool diverged = false;
      std::string error;
      try {
        if (use_put) {
          if (expected_offset != 0) throw StoreError(StoreErrc::kOffsetMismatch, "put target must start empty");
          Duration backoff = retry_.initial_backoff;
          for (int attempt = 0;; ++attempt) {
            out.attempts = attempt + 1;
            try {
              store_.put({out.bucket, key}, *data);
              break;
            } catch (const StoreError& e) {
              if (e.code() != StoreErrc::kUnavailable || attempt >= retry_.max_retries) throw;
            }
            clock_.sleep_for(backoff);
            backoff = Duration(static_cast<std::int64_t>(static_cast<double>(backoff.count()) * retry_.multiplier));
          }
          len = data->size();
        } else {
          len = append_with_retry(store_, {out.bucket, key}, expected_offset, *data, retry_,
                                  [this](Duration d) { clock_.sleep_for(d); }, &out.attempts);
        }
        out.ok = true;
      } catch (const StoreError& e) {
        diverged = e.code() == StoreErrc::kOffsetMismatch;
        error = e.what();
      } catch (const std::exception& e) {
        error = e.what();
      }
      out.completion = clock_.now() - start;
      {
        std::lock_guard lock(shared->mu);
        shared->outcomes[i] = out;
        ++shared->done;
        if (out.ok) {
          ++shared->succeeded;
          shared->new_length = len;
        }
        shared->diverged |= diverged;
        if (!error.empty()) shared->error = error;
      }
      shared->cv.notify_all();
    };
    {
      std::lock_guard lock(replicas_[i]->mu);
      replicas_[i]->tasks.push_back(std::move(task));
    }
    replicas_[i]->cv.notify_all();
  }

  const std::size_t need = policy_.required_acks();
  std::unique_lock lock(shared->mu);
  shared->cv.wait(lock, [&] { return shared->succeeded >= need || shared->done - shared->succeeded > n - need; });
  if (shared->succeeded < need) {
    throw StoreError(shared->diverged ? StoreErrc::kDiverged : StoreErrc::kUnavailable,
                     "replication policy unsatisfied: " + shared->error);
  }
  ReplicatedAck ack;
  ack.new_length = shared->new_length;
  ack.ack_latency = clock_.now() - start;
  ack.replicas = shared->outcomes;
  return ack;
}

ReplicatedAck simulate_replicated_append(ObjectStore& store, LatencyModel& model, const ReplicationPolicy& policy,
                                         const RetryPolicy& retry, const std::string& key,
                                         std::uint64_t expected_offset, ByteView payload, bool use_put) {
  policy.validate();
  ReplicatedAck ack;
  std::vector<Duration> completions;
  bool diverged = false;
  const OpKind op = use_put ? OpKind::kPut : OpKind::kAppend;
  for (const auto& bucket : policy.buckets) {
    ReplicaOutcome out;
    out.bucket = bucket;
    Duration t{0};
    auto attempt_once = [&]() -> std::uint64_t {
      t += model.sample(bucket, op, payload.size());
      if (use_put) {
        store.put({bucket, key}, payload);
        return payload.size();
      }
      return store.append({bucket, key}, expected_offset, payload);
    };
    // Same retry rules as append_with_retry, but time accumulates in `t`.
    Duration backoff = retry.initial_backoff;
    for (int attempt = 0;; ++attempt) {
      out.attempts = attempt + 1;
      try {
        ack.new_length = attempt_once();
        out.ok = true;
        break;
      } catch (const StoreError& e) {
        if (e.code() == StoreErrc::kOffsetMismatch) {
          if (attempt > 0 && e.actual_length() == expected_offset + payload.size()) {
            ack.new_length = e.actual_length();
            out.ok = true;
          } else {
            diverged = true;
          }
          break;
        }
        if (e.code() != StoreErrc::kUnavailable || attempt >= retry.max_retries) break;
      }
      t += backoff;
      backoff = Duration(static_cast<std::int64_t>(static_cast<double>(backoff.count()) * retry.multiplier));
    }
    out.completion = t;
    if (out.ok) completions.push_back(t);
    ack.replicas.push_back(out);
  }
  const std::size_t need = policy.required_acks();
  if (completions.size() < need)
    throw StoreError(diverged ? StoreErrc::kDiverged : StoreErrc::kUnavailable, "replication policy unsatisfied");
  std::nth_element(completions.begin(), completions.begin() + static_cast<std::ptrdiff_t>(need - 1),
                   completions.end());
  ack.ack_latency = completions[need - 1];
  return ack;
}

}  // namespace objwal
