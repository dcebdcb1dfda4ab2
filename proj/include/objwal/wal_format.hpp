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
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "objwal/types.hpp"

namespace objwal {

using Bytes = std::vector<std::byte>;
using ByteView = std::span<const std::byte>;

enum class RecordKind : std::uint8_t { kInsert = 1, kUpdate = 2, kDelete = 3 };

/// One modified record. `payload` holds the new values of the fields in
/// `field_mask`, ascending by field index.
struct DeltaRecord {
  RecordKind kind = RecordKind::kUpdate;
  TableId table_id = 0;
  Rid rid = 0;
  std::uint64_t field_mask = 0;
  Bytes payload;

  bool operator==(const DeltaRecord&) const = default;
};

/// All delta records of one transaction, written as a single contiguous block.
struct TxnEntry {
  std::uint8_t format_version = 1;
  Csn csn;
  Dsn dsn;
  std::vector<DeltaRecord> records;

  bool operator==(const TxnEntry&) const = default;
};

inline constexpr std::array<std::byte, 4> kEntryMagic{std::byte{0x4D}, std::byte{0x53}, std::byte{0x4C},
                                                      std::byte{0x31}};  // "MSL1"
inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::size_t kEntryHeaderSize = 36;
inline constexpr std::size_t kRecordHeaderSize = 24;
inline constexpr std::size_t kCrcCoveredHeaderBytes = 32;

/// Field layout of a table, needed to find where a record's payload ends
/// since the record header carries no length.
struct TableLayout {
  std::uint32_t field_count = 10;
  std::uint32_t field_width = 8;
  // Variable layouts prefix each present field with a u16 length.
  bool variable = false;

  std::uint64_t full_mask() const {
    return field_count >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << field_count) - 1);
  }
};

class SchemaCatalog {
 public:
  SchemaCatalog() = default;
  explicit SchemaCatalog(TableLayout fallback) : fallback_(fallback) {}

  void add(TableId table, TableLayout layout) { layouts_[table] = layout; }
  const TableLayout& layout(TableId table) const;

  /// Ten 8-byte fields for every table.
  static const SchemaCatalog& fixed_default();

 private:
  TableLayout fallback_;
  std::unordered_map<TableId, TableLayout> layouts_;
};

/// Raised for a checksummed entry this reader cannot interpret.
class UnsupportedFormat : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// End of the valid prefix of a log.
struct TornTail {
  bool operator==(const TornTail&) const = default;
};

struct DecodedEntry {
  TxnEntry entry;
  std::size_t next_offset = 0;
};

using DecodeResult = std::variant<DecodedEntry, TornTail>;

std::uint32_t crc32c(ByteView data);

std::size_t encoded_record_size(const DeltaRecord& r);
std::size_t encoded_entry_size(std::span<const DeltaRecord> records);

/// Throws std::invalid_argument when csn <= dsn or `records` is empty.
Bytes encode_txn_entry(Csn csn, Dsn dsn, std::span<const DeltaRecord> records);
void encode_txn_entry_into(Csn csn, Dsn dsn, std::span<const DeltaRecord> records, std::span<std::byte> out);

DecodeResult decode_txn_entry(ByteView bytes, std::size_t offset,
                              const SchemaCatalog& catalog = SchemaCatalog::fixed_default());

/// Decodes every entry from `offset` until the first torn tail.
std::vector<TxnEntry> decode_all(ByteView bytes, std::size_t offset = 0,
                                 const SchemaCatalog& catalog = SchemaCatalog::fixed_default(),
                                 std::size_t* end_offset = nullptr);

// Variable-width payload helpers: each field is u16 length + bytes.
Bytes encode_variable_fields(std::span<const std::string> fields);
std::vector<std::string> decode_variable_fields(ByteView payload, std::size_t field_count);

// Generic checksummed frame used for segment footers and checkpoint objects:
// magic[4] | version u8 | reserved u8[3] | body_length u32 | crc32c u32 | body
inline constexpr std::size_t kFrameHeaderSize = 16;
using Magic = std::array<std::byte, 4>;

inline constexpr Magic kFooterMagic{std::byte{'M'}, std::byte{'S'}, std::byte{'L'}, std::byte{'F'}};
inline constexpr Magic kCheckpointRowsMagic{std::byte{'M'}, std::byte{'S'}, std::byte{'L'}, std::byte{'C'}};
inline constexpr Magic kCheckpointMetaMagic{std::byte{'M'}, std::byte{'S'}, std::byte{'L'}, std::byte{'M'}};

Bytes encode_frame(const Magic& magic, ByteView body);
struct DecodedFrame {
  Bytes body;
  std::size_t next_offset = 0;
};
std::optional<DecodedFrame> decode_frame(const Magic& magic, ByteView bytes, std::size_t offset);

/// Trailer written into the last part of a segment before it is sealed.
struct SegmentFooter {
  Csn min_csn;
  Csn max_csn;
  std::uint32_t entry_count = 0;

  bool operator==(const SegmentFooter&) const = default;
};
inline constexpr std::size_t kFooterSize = kFrameHeaderSize + 20;

Bytes encode_footer(const SegmentFooter& f);
std::optional<SegmentFooter> decode_footer(ByteView bytes, std::size_t offset);

// Little-endian helpers.
namespace le {

inline void put_u16(std::byte* p, std::uint16_t v) {
  p[0] = std::byte(v & 0xff);
  p[1] = std::byte(v >> 8);
}
inline void put_u32(std::byte* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = std::byte((v >> (8 * i)) & 0xff);
}
inline void put_u64(std::byte* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = std::byte((v >> (8 * i)) & 0xff);
}
inline std::uint16_t get_u16(const std::byte* p) {
  return static_cast<std::uint16_t>(std::to_integer<unsigned>(p[0]) | (std::to_integer<unsigned>(p[1]) << 8));
}
inline std::uint32_t get_u32(const std::byte* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | std::to_integer<std::uint32_t>(p[i]);
  return v;
}
inline std::uint64_t get_u64(const std::byte* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | std::to_integer<std::uint64_t>(p[i]);
  return v;
}

inline void append_u32(Bytes& out, std::uint32_t v) {
  auto n = out.size();
  out.resize(n + 4);
  put_u32(out.data() + n, v);
}
inline void append_u64(Bytes& out, std::uint64_t v) {
  auto n = out.size();
  out.resize(n + 8);
  put_u64(out.data() + n, v);
}

}  // namespace le

}  // namespace objwal
