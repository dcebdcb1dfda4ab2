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
#include <chrono>
#include <thread>

namespace objwal {

using Duration = std::chrono::nanoseconds;
using TimePoint = std::chrono::nanoseconds;  // since an arbitrary epoch

inline constexpr double to_ms(Duration d) { return std::chrono::duration<double, std::milli>(d).count(); }
inline constexpr Duration from_ms(double ms) { return Duration(static_cast<std::int64_t>(ms * 1e6)); }

class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimePoint now() const = 0;
  virtual void sleep_for(Duration d) = 0;
};

class SteadyClock final : public Clock {
 public:
  TimePoint now() const override {
    return std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now().time_since_epoch());
  }
  void sleep_for(Duration d) override {
    if (d.count() > 0) std::this_thread::sleep_for(d);
  }

  static SteadyClock& instance() {
    static SteadyClock clock;
    return clock;
  }
};

/// Time advanced explicitly by a driver. sleep_for just moves time forward,
/// which is only meaningful for single-threaded callers.
class ManualClock final : public Clock {
 public:
  TimePoint now() const override { return TimePoint(now_.load(std::memory_order_acquire)); }
  void sleep_for(Duration d) override { advance(d); }
  void advance(Duration d) { now_.fetch_add(d.count(), std::memory_order_acq_rel); }
  void set(TimePoint t) { now_.store(t.count(), std::memory_order_release); }

 private:
  std::atomic<std::int64_t> now_{0};
};

}  // namespace objwal
