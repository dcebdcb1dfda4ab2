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

#include "objwal/commit_pipeline.hpp"

#include <algorithm>
#include <stdexcept>

namespace objwal {

const char* to_string(TrackingMode m) { return m == TrackingMode::kRecordLevel ? "record" : "txn"; }

// --- LogDurabilityState -----------------------------------------------------

void LogDurabilityState::register_csn(Csn csn) { nondurable_.insert(csn); }

bool LogDurabilityState::set_end_lsn(Csn csn, const Lsn& end) {
  if (end <= durable_) {
    nondurable_.erase(csn);
    return true;
  }
  nondurable_.insert(csn);
  by_end_.emplace(end, csn);
  return false;
}

std::vector<Csn> LogDurabilityState::advance(const Lsn& durable) {
  if (durable < durable_) throw std::invalid_argument("durable frontier of a log cannot move backwards");
  durable_ = durable;
  std::vector<Csn> now_durable;
  auto end = by_end_.upper_bound(durable_);
  for (auto it = by_end_.begin(); it != end; ++it) {
    nondurable_.erase(it->second);
    now_durable.push_back(it->second);
  }
  by_end_.erase(by_end_.begin(), end);
  return now_durable;
}

void LogDurabilityState::forget(Csn csn) { nondurable_.erase(csn); }

std::optional<Csn> LogDurabilityState::min_nondurable() const {
  if (nondurable_.empty()) return std::nullopt;
  return *nondurable_.begin();
}

Csn compute_gcsn(std::span<const LogDurabilityState> states, Csn next_csn) {
  Csn g = next_csn;
  for (const auto& s : states)
    if (auto m = s.min_nondurable(); m && *m < g) g = *m;
  return g;
}

Csn compute_gcsn(std::span<const std::optional<Csn>> log_minimums, Csn next_csn) {
  Csn g = next_csn;
  for (const auto& m : log_minimums)
    if (m && *m < g) g = *m;
  return g;
}

// --- ReleasedSet ------------------------------------------------------------

void ReleasedSet::insert(Csn csn) {
  if (csn >= watermark_) sparse_.insert(csn);
}

void ReleasedSet::compact(Csn w) {
  if (w <= watermark_) return;
  watermark_ = w;
  std::erase_if(sparse_, [&](Csn c) { return c < watermark_; });
}

bool eligible(const PendingCommit& p, Csn gcsn, const ReleasedSet& released, const PipelineOptions& opts) {
  if (opts.mode == TrackingMode::kTxnLevel) return (opts.gate == TxnLevelGate::kCsn ? p.csn : p.begin_ts) < gcsn;
  return p.dsn.is_none() || p.dsn < gcsn || (opts.released_predecessor && released.contains(p.dsn));
}

// --- CommitPipeline ---------------------------------------------------------

CommitPipeline::CommitPipeline(std::size_t log_count, PipelineOptions opts, std::function<Csn()> next_csn,
                               Clock& clock)
    : opts_(opts), next_csn_(std::move(next_csn)), clock_(clock) {
  states_.reserve(log_count);
  for (std::size_t i = 0; i < log_count; ++i) states_.emplace_back(static_cast<LogId>(i));
}

void CommitPipeline::register_csn(LogId log, Csn csn) {
  std::lock_guard lock(mu_);
  states_.at(log).register_csn(csn);
}

void CommitPipeline::forget_csn(LogId log, Csn csn) {
  std::lock_guard lock(mu_);
  states_.at(log).forget(csn);
}

std::uint64_t CommitPipeline::ready_key(const PendingCommit& p) const {
  if (opts_.mode == TrackingMode::kRecordLevel) return p.dsn.value;
  return opts_.gate == TxnLevelGate::kCsn ? p.csn.value : p.begin_ts.value;
}

void CommitPipeline::make_ready_locked(Csn csn) {
  const auto& p = pending_.at(csn).p;
  if (released_path() && released_.contains(p.dsn))
    immediate_.push_back(csn);
  else
    ready_.emplace(ready_key(p), csn);
}

void CommitPipeline::enqueue(PendingCommit p) {
  std::lock_guard lock(mu_);
  const Csn csn = p.csn;
  const auto log = p.log_id;
  const Lsn end = p.end_lsn;
  auto [it, inserted] = pending_.emplace(csn, Entry{std::move(p)});
  if (!inserted) throw std::invalid_argument("csn enqueued twice");
  ++enqueued_;
  if (!log || states_.at(*log).set_end_lsn(csn, end)) {
    make_ready_locked(csn);
  } else {
    ++waiting_own_;
  }
}

void CommitPipeline::update_log_durability(LogId log, const Lsn& durable) {
  std::lock_guard lock(mu_);
  for (Csn c : states_.at(log).advance(durable)) {
    if (pending_.contains(c)) {
      --waiting_own_;
      make_ready_locked(c);
    }
  }
}

Csn CommitPipeline::compute_gcsn() {
  // Read the counter first: every CSN below it is already registered.
  const Csn next = next_csn_();
  std::lock_guard lock(mu_);
  return objwal::compute_gcsn(states_, next);
}

void CommitPipeline::release_locked(Csn csn, TimePoint now, std::vector<ReleaseEvent>& out,
                                    std::vector<std::function<void(const ReleaseEvent&)>>& handles) {
  auto it = pending_.find(csn);
  PendingCommit& p = it->second.p;
  ReleaseEvent ev{p.csn, p.dsn, p.log_id, p.enqueue_time, now};
  if (p.on_release) handles.push_back(std::move(p.on_release));
  pending_.erase(it);
  released_.insert(csn);
  ++released_count_;
  out.push_back(ev);
}

std::vector<ReleaseEvent> CommitPipeline::drain_releasable() {
  const Csn next = next_csn_();
  std::vector<ReleaseEvent> events;
  std::vector<std::function<void(const ReleaseEvent&)>> handles;
  std::function<void(const ReleaseEvent&)> listener;
  {
    std::lock_guard lock(mu_);
    const Csn g = std::max(last_gcsn_, objwal::compute_gcsn(states_, next));
    last_gcsn_ = g;
    const TimePoint now = clock_.now();

    std::vector<Csn> work;
    work.swap(immediate_);
    while (!ready_.empty() && ready_.begin()->first < g.value) {
      work.push_back(ready_.begin()->second);
      ready_.erase(ready_.begin());
    }
    for (std::size_t i = 0; i < work.size(); ++i) {
      const Csn c = work[i];
      release_locked(c, now, events, handles);
      if (released_path()) {
        // Transactions whose direct predecessor was just released.
        auto [b, e] = ready_.equal_range(c.value);
        for (auto it = b; it != e; ++it) work.push_back(it->second);
        ready_.erase(b, e);
      }
    }
    released_.compact(g);
    listener = listener_;
  }
  for (const auto& ev : events) {
    if (listener) listener(ev);
  }
  for (std::size_t i = 0; i < handles.size(); ++i) handles[i](events[i]);
  return events;
}

void CommitPipeline::set_release_listener(std::function<void(const ReleaseEvent&)> listener) {
  std::lock_guard lock(mu_);
  listener_ = std::move(listener);
}

std::size_t CommitPipeline::pending_count() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

bool CommitPipeline::is_released(Csn csn) const {
  std::lock_guard lock(mu_);
  return released_.contains(csn);
}

Csn CommitPipeline::last_gcsn() const {
  std::lock_guard lock(mu_);
  return last_gcsn_;
}

PipelineStats CommitPipeline::stats() const {
  std::lock_guard lock(mu_);
  PipelineStats s;
  s.enqueued = enqueued_;
  s.released = released_count_;
  s.waiting_own = waiting_own_;
  s.waiting_deps = ready_.size() + immediate_.size();
  s.last_gcsn = last_gcsn_;
  return s;
}

LogDurabilityState CommitPipeline::log_state(LogId log) const {
  std::lock_guard lock(mu_);
  return states_.at(log);
}

}  // namespace objwal
