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

#include "objwal/wal_format.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include <boost/crc.hpp>

#if defined(__x86_64__)
#include <nmmintrin.h>
#endif

namespace objwal {

namespace {

#if defined(__x86_64__)
__attribute__((target("sse4.2"))) std::uint32_t crc32c_hw(std::uint32_t state, const void* data, std::size_t n) {
  auto p = static_cast<const unsigned char*>(data);
  std::uint64_t crc = state;
  for (; n >= 8; p += 8, n -= 8) {
    std::uint64_t v;
    std::memcpy(&v, p, 8);
    crc = _mm_crc32_u64(crc, v);
  }
  auto c = static_cast<std::uint32_t>(crc);
  for (; n > 0; ++p, --n) c = _mm_crc32_u8(c, *p);
  return c;
}

const bool kHaveSse42 = __builtin_cpu_supports("sse4.2");
#else
constexpr bool kHaveSse42 = false;
std::uint32_t crc32c_hw(std::uint32_t state, const void*, std::size_t) { return state; }
#endif

// CRC-32C (Castagnoli); SSE4.2 instruction when available.
class Crc32c {
 public:
  void process_bytes(const void* p, std::size_t n) {
    if (kHaveSse42)
      state_ = crc32c_hw(state_, p, n);
    else
      soft_.process_bytes(p, n);
  }
  std::uint32_t checksum() const { return kHaveSse42 ? ~state_ : soft_.checksum(); }

 private:
  std::uint32_t state_ = 0xFFFFFFFFu;
  boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true> soft_;
};

bool magic_matches(const std::byte* p, const Magic& m) { return std::equal(m.begin(), m.end(), p); }

// Bytes consumed by the payload that starts at `p`, or nullopt if it would
// run past `end`.
std::optional<std::size_t> payload_length(const TableLayout& layout, RecordKind kind, std::uint64_t mask,
                                          const std::byte* p, const std::byte* end) {
  if (kind == RecordKind::kDelete) return 0;
  const auto fields = static_cast<std::size_t>(std::popcount(mask));
  if (!layout.variable) {
    const std::size_t n = fields * layout.field_width;
    if (static_cast<std::size_t>(end - p) < n) return std::nullopt;
    return n;
  }
  std::size_t n = 0;
  for (std::size_t i = 0; i < fields; ++i) {
    if (end - (p + n) < 2) return std::nullopt;
    const std::size_t len = le::get_u16(p + n);
    n += 2 + len;
    if (static_cast<std::size_t>(end - p) < n) return std::nullopt;
  }
  return n;
}

}  // namespace

const TableLayout& SchemaCatalog::layout(TableId table) const {
  auto it = layouts_.find(table);
  return it == layouts_.end() ? fallback_ : it->second;
}

const SchemaCatalog& SchemaCatalog::fixed_default() {
  static const SchemaCatalog catalog;
  return catalog;
}

std::uint32_t crc32c(ByteView data) {
  Crc32c crc;
  crc.process_bytes(data.data(), data.size());
  return crc.checksum();
}

std::size_t encoded_record_size(const DeltaRecord& r) { return kRecordHeaderSize + r.payload.size(); }

std::size_t encoded_entry_size(std::span<const DeltaRecord> records) {
  std::size_t n = kEntryHeaderSize;
  for (const auto& r : records) n += encoded_record_size(r);
  return n;
}

void encode_txn_entry_into(Csn csn, Dsn dsn, std::span<const DeltaRecord> records, std::span<std::byte> out) {
  if (csn <= dsn) throw std::invalid_argument("txn entry requires csn > dsn");
  if (records.empty()) throw std::invalid_argument("txn entry requires at least one record");
  const std::size_t total = encoded_entry_size(records);
  if (out.size() < total) throw std::invalid_argument("output span too small for txn entry");
  if (records.size() > UINT32_MAX || total - kEntryHeaderSize > UINT32_MAX)
    throw std::invalid_argument("txn entry too large");

  std::byte* p = out.data();
  std::copy(kEntryMagic.begin(), kEntryMagic.end(), p);
  p[4] = std::byte{kFormatVersion};
  p[5] = p[6] = p[7] = std::byte{0};
  le::put_u64(p + 8, csn.value);
  le::put_u64(p + 16, dsn.value);
  le::put_u32(p + 24, static_cast<std::uint32_t>(records.size()));
  le::put_u32(p + 28, static_cast<std::uint32_t>(total - kEntryHeaderSize));

  std::byte* body = p + kEntryHeaderSize;
  for (const auto& r : records) {
    if (r.kind == RecordKind::kDelete && !r.payload.empty())
      throw std::invalid_argument("delete records carry no payload");
    body[0] = std::byte{static_cast<std::uint8_t>(r.kind)};
    body[1] = body[2] = body[3] = std::byte{0};
    le::put_u32(body + 4, r.table_id);
    le::put_u64(body + 8, r.rid);
    le::put_u64(body + 16, r.field_mask);
    if (!r.payload.empty()) std::memcpy(body + kRecordHeaderSize, r.payload.data(), r.payload.size());
    body += encoded_record_size(r);
  }

  Crc32c crc;
  crc.process_bytes(p, kCrcCoveredHeaderBytes);
  crc.process_bytes(p + kEntryHeaderSize, total - kEntryHeaderSize);
  le::put_u32(p + 32, crc.checksum());
}

Bytes encode_txn_entry(Csn csn, Dsn dsn, std::span<const DeltaRecord> records) {
  if (records.empty()) throw std::invalid_argument("txn entry requires at least one record");
  Bytes out(encoded_entry_size(records));
  encode_txn_entry_into(csn, dsn, records, out);
  return out;
}

DecodeResult decode_txn_entry(ByteView bytes, std::size_t offset, const SchemaCatalog& catalog) {
  if (offset > bytes.size() || bytes.size() - offset < kEntryHeaderSize) return TornTail{};
  const std::byte* p = bytes.data() + offset;
  if (!magic_matches(p, kEntryMagic)) return TornTail{};

  const std::uint32_t body_len = le::get_u32(p + 28);
  if (bytes.size() - offset - kEntryHeaderSize < body_len) return TornTail{};

  Crc32c crc;
  crc.process_bytes(p, kCrcCoveredHeaderBytes);
  crc.process_bytes(p + kEntryHeaderSize, body_len);
  if (crc.checksum() != le::get_u32(p + 32)) return TornTail{};

  // Past this point the bytes were written by an encoder; anything odd is a
  // format problem rather than a torn write.
  const auto version = std::to_integer<std::uint8_t>(p[4]);
  if (version != kFormatVersion)
    throw UnsupportedFormat("unknown txn entry format version " + std::to_string(version));

  DecodedEntry out;
  out.entry.format_version = version;
  out.entry.csn = Csn{le::get_u64(p + 8)};
  out.entry.dsn = Csn{le::get_u64(p + 16)};
  const std::uint32_t count = le::get_u32(p + 24);
  if (out.entry.csn <= out.entry.dsn || count == 0) throw UnsupportedFormat("txn entry header violates csn > dsn");

  const std::byte* body = p + kEntryHeaderSize;
  const std::byte* end = body + body_len;
  out.entry.records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (end - body < static_cast<std::ptrdiff_t>(kRecordHeaderSize))
      throw UnsupportedFormat("record header exceeds entry body");
    DeltaRecord r;
    const auto kind = std::to_integer<std::uint8_t>(body[0]);
    if (kind < 1 || kind > 3) throw UnsupportedFormat("unknown record kind " + std::to_string(kind));
    r.kind = static_cast<RecordKind>(kind);
    r.table_id = le::get_u32(body + 4);
    r.rid = le::get_u64(body + 8);
    r.field_mask = le::get_u64(body + 16);
    body += kRecordHeaderSize;
    auto len = payload_length(catalog.layout(r.table_id), r.kind, r.field_mask, body, end);
    if (!len) throw UnsupportedFormat("record payload exceeds entry body");
    r.payload.assign(body, body + *len);
    body += *len;
    out.entry.records.push_back(std::move(r));
  }
  if (body != end) throw UnsupportedFormat("entry body has trailing bytes");
  out.next_offset = offset + kEntryHeaderSize + body_len;
  return out;
}

std::vector<TxnEntry> decode_all(ByteView bytes, std::size_t offset, const SchemaCatalog& catalog,
                                 std::size_t* end_offset) {
  std::vector<TxnEntry> entries;
  while (true) {
    auto res = decode_txn_entry(bytes, offset, catalog);
    auto* d = std::get_if<DecodedEntry>(&res);
    if (!d) break;
    entries.push_back(std::move(d->entry));
    offset = d->next_offset;
  }
  if (end_offset) *end_offset = offset;
  return entries;
}

Bytes encode_variable_fields(std::span<const std::string> fields) {
  Bytes out;
  for (const auto& f : fields) {
    if (f.size() > UINT16_MAX) throw std::invalid_argument("variable field longer than 65535 bytes");
    const auto n = out.size();
    out.resize(n + 2 + f.size());
    le::put_u16(out.data() + n, static_cast<std::uint16_t>(f.size()));
    std::memcpy(out.data() + n + 2, f.data(), f.size());
  }
  return out;
}

std::vector<std::string> decode_variable_fields(ByteView payload, std::size_t field_count) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < field_count; ++i) {
    if (payload.size() - pos < 2) throw UnsupportedFormat("variable field length prefix truncated");
    const std::size_t len = le::get_u16(payload.data() + pos);
    pos += 2;
    if (payload.size() - pos < len) throw UnsupportedFormat("variable field truncated");
    fields.emplace_back(reinterpret_cast<const char*>(payload.data() + pos), len);
    pos += len;
  }
  return fields;
}

Bytes encode_frame(const Magic& magic, ByteView body) {
  Bytes out(kFrameHeaderSize + body.size());
  std::copy(magic.begin(), magic.end(), out.begin());
  out[4] = std::byte{kFormatVersion};
  le::put_u32(out.data() + 8, static_cast<std::uint32_t>(body.size()));
  std::copy(body.begin(), body.end(), out.begin() + kFrameHeaderSize);
  Crc32c crc;
  crc.process_bytes(out.data(), 12);
  crc.process_bytes(body.data(), body.size());
  le::put_u32(out.data() + 12, crc.checksum());
  return out;
}

std::optional<DecodedFrame> decode_frame(const Magic& magic, ByteView bytes, std::size_t offset) {
  if (offset > bytes.size() || bytes.size() - offset < kFrameHeaderSize) return std::nullopt;
  const std::byte* p = bytes.data() + offset;
  if (!magic_matches(p, magic)) return std::nullopt;
  const std::uint32_t len = le::get_u32(p + 8);
  if (bytes.size() - offset - kFrameHeaderSize < len) return std::nullopt;
  Crc32c crc;
  crc.process_bytes(p, 12);
  crc.process_bytes(p + kFrameHeaderSize, len);
  if (crc.checksum() != le::get_u32(p + 12)) return std::nullopt;
  if (std::to_integer<std::uint8_t>(p[4]) != kFormatVersion) throw UnsupportedFormat("unknown frame version");
  DecodedFrame f;
  f.body.assign(p + kFrameHeaderSize, p + kFrameHeaderSize + len);
  f.next_offset = offset + kFrameHeaderSize + len;
  return f;
}

Bytes encode_footer(const SegmentFooter& f) {
  Bytes body;
  le::append_u64(body, f.min_csn.value);
  le::append_u64(body, f.max_csn.value);
  le::append_u32(body, f.entry_count);
  return encode_frame(kFooterMagic, body);
}

std::optional<SegmentFooter> decode_footer(ByteView bytes, std::size_t offset) {
  auto frame = decode_frame(kFooterMagic, bytes, offset);
  if (!frame || frame->body.size() != 20) return std::nullopt;
  SegmentFooter f;
  f.min_csn = Csn{le::get_u64(frame->body.data())};
  f.max_csn = Csn{le::get_u64(frame->body.data() + 8)};
  f.entry_count = le::get_u32(frame->body.data() + 16);
  return f;
}

}  // namespace objwal
