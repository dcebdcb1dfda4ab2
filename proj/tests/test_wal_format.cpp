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

#include <gtest/gtest.h>

#include "objwal/wal_format.hpp"
#include "test_util.hpp"

using namespace objwal;
using namespace objwal::testing;

namespace {

DeltaRecord one_field_update() {
  DeltaRecord r;
  r.kind = RecordKind::kUpdate;
  r.table_id = 7;
  r.rid = 42;
  r.field_mask = 1;
  r.payload = bytes_of({1, 2, 3, 4, 5, 6, 7, 8});
  return r;
}

DecodedEntry ok(const DecodeResult& r) {
  if (!std::holds_alternative<DecodedEntry>(r)) throw std::runtime_error("expected an entry");
  return std::get<DecodedEntry>(r);
}

}  // namespace

TEST(Crc32c, CheckValue) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32c(ByteView(reinterpret_cast<const std::byte*>(s.data()), s.size())), 0xE3069283u);
}

TEST(TxnEntryFormat, BitExactLayout) {
  // Computed independently of the encoder.
  const Bytes expected = bytes_of({0x4D, 0x53, 0x4C, 0x31, 0x01, 0x00, 0x00, 0x00, 0x66, 0x00, 0x00, 0x00, 0x00, 0x00,
                                   0x00, 0x00, 0x62, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00,
                                   0x20, 0x00, 0x00, 0x00, 0xE9, 0x55, 0x4E, 0x65, 0x02, 0x00, 0x00, 0x00, 0x07, 0x00,
                                   0x00, 0x00, 0x2A, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00,
                                   0x00, 0x00, 0x00, 0x00, 0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08});
  std::vector<DeltaRecord> recs{one_field_update()};
  EXPECT_EQ(encode_txn_entry(Csn{102}, Csn{98}, recs), expected);
  EXPECT_EQ(encoded_entry_size(recs), expected.size());
}

TEST(TxnEntryFormat, HeaderFieldsReadBack) {
  std::vector<DeltaRecord> recs{one_field_update()};
  const Bytes b = encode_txn_entry(Csn{102}, Csn{98}, recs);
  const auto d = ok(decode_txn_entry(b, 0));
  EXPECT_EQ(d.entry.csn, Csn{102});
  EXPECT_EQ(d.entry.dsn, Csn{98});
  EXPECT_EQ(d.entry.records.size(), 1u);
  EXPECT_EQ(d.next_offset, b.size());
}

TEST(TxnEntryFormat, NoPredecessor) {
  DeltaRecord r;
  r.kind = RecordKind::kInsert;
  r.field_mask = TableLayout{}.full_mask();
  r.payload = filled(80, 3);
  const Bytes b = encode_txn_entry(Csn{1}, kNoCsn, std::span(&r, 1));
  EXPECT_EQ(le::get_u64(b.data() + 16), 0u);
  EXPECT_EQ(ok(decode_txn_entry(b, 0)).entry.dsn, kNoCsn);
}

TEST(TxnEntryFormat, RejectsBadInput) {
  std::vector<DeltaRecord> recs{one_field_update()};
  EXPECT_THROW(encode_txn_entry(Csn{5}, Csn{5}, recs), std::invalid_argument);
  EXPECT_THROW(encode_txn_entry(Csn{5}, Csn{9}, recs), std::invalid_argument);
  EXPECT_THROW(encode_txn_entry(Csn{5}, Csn{1}, {}), std::invalid_argument);
  DeltaRecord del;
  del.kind = RecordKind::kDelete;
  del.payload = bytes_of({1});
  EXPECT_THROW(encode_txn_entry(Csn{5}, Csn{1}, std::span(&del, 1)), std::invalid_argument);
}

TEST(TxnEntryFormat, RoundTripRandomized) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const TxnEntry e = random_entry(rng);
    const Bytes b = encode(e);
    const auto d = ok(decode_txn_entry(b, 0));
    ASSERT_EQ(d.entry, e);
    ASSERT_EQ(d.next_offset, b.size());
    ASSERT_EQ(encode(d.entry), b);
  }
}

TEST(TxnEntryFormat, EmptyInputIsTornTail) {
  EXPECT_TRUE(std::holds_alternative<TornTail>(decode_txn_entry({}, 0)));
}

TEST(TxnEntryFormat, LastByteFlipIsTornTail) {
  std::vector<DeltaRecord> recs{one_field_update()};
  Bytes b = encode_txn_entry(Csn{102}, Csn{98}, recs);
  b.back() ^= std::byte{1};
  EXPECT_TRUE(std::holds_alternative<TornTail>(decode_txn_entry(b, 0)));
}

TEST(TxnEntryFormat, EverySingleBitFlipDetected) {
  std::mt19937_64 rng(11);
  const Bytes b = encode(random_entry(rng));
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (int bit = 0; bit < 8; ++bit) {
      Bytes c = b;
      c[i] ^= std::byte(1u << bit);
      ASSERT_TRUE(std::holds_alternative<TornTail>(decode_txn_entry(c, 0))) << "byte " << i << " bit " << bit;
    }
  }
}

TEST(TxnEntryFormat, UnknownVersionIsUnsupported) {
  std::vector<DeltaRecord> recs{one_field_update()};
  Bytes b = encode_txn_entry(Csn{102}, Csn{98}, recs);
  b[4] = std::byte{2};
  Bytes covered(b.begin(), b.begin() + kCrcCoveredHeaderBytes);
  covered.insert(covered.end(), b.begin() + kEntryHeaderSize, b.end());
  le::put_u32(b.data() + kCrcCoveredHeaderBytes, crc32c(covered));
  EXPECT_THROW(decode_txn_entry(b, 0), UnsupportedFormat);
}

TEST(TxnEntryFormat, PrefixSafety) {
  std::mt19937_64 rng(3);
  std::vector<TxnEntry> entries;
  Bytes log;
  for (int i = 0; i < 4; ++i) {
    entries.push_back(random_entry(rng));
    Bytes b = encode(entries.back());
    log.insert(log.end(), b.begin(), b.end());
  }
  const std::size_t last = log.size() - encode(entries.back()).size();
  for (std::size_t cut = last; cut < log.size(); ++cut) {
    std::size_t end = 0;
    auto got = decode_all(ByteView(log.data(), cut), 0, SchemaCatalog::fixed_default(), &end);
    ASSERT_EQ(got.size(), 3u);
    ASSERT_EQ(end, last);
    for (int i = 0; i < 3; ++i) ASSERT_EQ(got[i], entries[i]);
  }
  EXPECT_EQ(decode_all(log).size(), 4u);
}

TEST(TxnEntryFormat, SizeIsDeterministic) {
  DeltaRecord a = one_field_update();
  DeltaRecord b = a;
  b.payload = bytes_of({9, 9, 9, 9, 9, 9, 9, 9});
  b.rid = 1;
  std::vector<DeltaRecord> ra{a, a}, rb{b, b};
  EXPECT_EQ(encoded_entry_size(ra), encoded_entry_size(rb));
  EXPECT_EQ(encoded_entry_size(ra), kEntryHeaderSize + 2 * (kRecordHeaderSize + 8));
}

TEST(TxnEntryFormat, VariableWidthLayout) {
  SchemaCatalog cat;
  cat.add(3, TableLayout{3, 0, true});
  const std::vector<std::string> fields{"alpha", "", "gamma-ray"};
  DeltaRecord r;
  r.kind = RecordKind::kUpdate;
  r.table_id = 3;
  r.rid = 9;
  r.field_mask = 0b101;
  std::vector<std::string> present{fields[0], fields[2]};
  r.payload = encode_variable_fields(present);
  EXPECT_EQ(r.payload.size(), 2u + 5 + 2 + 9);
  std::vector<DeltaRecord> recs{r, one_field_update()};
  const Bytes b = encode_txn_entry(Csn{4}, Csn{2}, recs);
  const auto d = ok(decode_txn_entry(b, 0, cat));
  ASSERT_EQ(d.entry.records, recs);
  EXPECT_EQ(decode_variable_fields(d.entry.records[0].payload, 2), present);
}

TEST(Frame, FooterRoundTripAndCorruption) {
  SegmentFooter f{Csn{3}, Csn{99}, 17};
  Bytes b = encode_footer(f);
  ASSERT_EQ(b.size(), kFooterSize);
  EXPECT_EQ(decode_footer(b, 0), f);
  for (std::size_t i = 0; i < b.size(); ++i) {
    Bytes c = b;
    c[i] ^= std::byte{0x40};
    EXPECT_FALSE(decode_footer(c, 0).has_value()) << i;
  }
  // A footer is never mistaken for a transaction entry.
  EXPECT_TRUE(std::holds_alternative<TornTail>(decode_txn_entry(b, 0)));
}
