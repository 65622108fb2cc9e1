#pragma once

#include "common.hpp"

namespace osmr {

// Record wire format, also the on-disk format inside checkpoint images:
//   key_len   u32 LE   (>= 1)
//   val_len   u32 LE   (>= 0)
//   key bytes
//   value bytes
inline constexpr size_t kRecordHeader = 8;

inline size_t encoded_size(size_t key_len, size_t val_len) {
  return kRecordHeader + key_len + val_len;
}

void encode_record(Bytes& out, ByteView key, ByteView value);

struct RecordView {
  const uint8_t* key;
  uint32_t key_len;
  const uint8_t* value;
  uint32_t val_len;

  ByteView key_view() const { return {key, key_len}; }
  ByteView value_view() const { return {value, val_len}; }
};

// Decodes the record at data[pos]; advances pos past it. Truncated input or
// a zero-length key fails with Err::corruption.
RecordView decode_record(ByteView data, size_t& pos);

// Walks a whole buffer of concatenated records.
template <typename Fn>
void iterate_records(ByteView data, Fn&& fn) {
  size_t pos = 0;
  while (pos < data.size()) fn(decode_record(data, pos));
}

inline uint64_t hash64(ByteView key) { return fnv1a64(key.data(), key.size()); }

inline int route(ByteView key, int num_workers) {
  return static_cast<int>(hash64(key) % static_cast<uint64_t>(num_workers));
}

// Bucket control word: bits 0..62 hold the committed byte count (record
// bytes only, excluding the control word), bit 63 is the seal.
inline constexpr uint64_t kSealBit = 1ull << 63;
inline constexpr uint64_t kCountMask = kSealBit - 1;

inline uint64_t ctl_count(uint64_t ctl) { return ctl & kCountMask; }
inline bool ctl_sealed(uint64_t ctl) { return (ctl & kSealBit) != 0; }

}  // namespace osmr
