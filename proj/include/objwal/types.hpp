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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace objwal {

/// Commit sequence number. Drawn from the central counter at pre-commit;
/// 0 is reserved to mean "no predecessor".
struct Csn {
  std::uint64_t value = 0;

  constexpr Csn() = default;
  constexpr explicit Csn(std::uint64_t v) : value(v) {}

  constexpr auto operator<=>(const Csn&) const = default;
  constexpr bool is_none() const { return value == 0; }
};

/// Dependency sequence number: the CSN of the most recent direct predecessor.
using Dsn = Csn;

inline constexpr Csn kNoCsn{0};

inline std::ostream& operator<<(std::ostream& os, Csn c) { return os << c.value; }

using LogId = std::uint32_t;
using TableId = std::uint32_t;
using Rid = std::uint64_t;

/// Position within one log: (segment, byte offset) ordered lexicographically.
struct Lsn {
  LogId log_id = 0;
  std::uint32_t segment_index = 0;
  std::uint64_t byte_offset = 0;

  constexpr bool operator==(const Lsn&) const = default;

  // Only meaningful for two positions of the same log.
  constexpr auto operator<=>(const Lsn& o) const {
    if (auto c = segment_index <=> o.segment_index; c != 0) return c;
    return byte_offset <=> o.byte_offset;
  }
};

inline std::ostream& operator<<(std::ostream& os, const Lsn& l) {
  return os << "log" << l.log_id << "@" << l.segment_index << ":" << l.byte_offset;
}

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace objwal

template <>
struct std::hash<objwal::Csn> {
  std::size_t operator()(objwal::Csn c) const noexcept { return std::hash<std::uint64_t>{}(c.value); }
};
