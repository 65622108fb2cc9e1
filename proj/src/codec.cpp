#include "codec.hpp"

#include <cstring>

namespace osmr {

void encode_record(Bytes& out, ByteView key, ByteView value) {
  if (key.empty()) fail(Err::usage, "encode_record: empty key");
  if (key.size() >= (1ull << 32) || value.size() >= (1ull << 32))
    fail(Err::usage, "encode_record: field exceeds 2^32");
  size_t base = out.size();
  out.resize(base + encoded_size(key.size(), value.size()));
  uint8_t* p = out.data() + base;
  store_u32le(p, static_cast<uint32_t>(key.size()));
  store_u32le(p + 4, static_cast<uint32_t>(value.size()));
  std::memcpy(p + 8, key.data(), key.size());
  std::memcpy(p + 8 + key.size(), value.data(), value.size());
}

RecordView decode_record(ByteView data, size_t& pos) {
  if (pos + kRecordHeader > data.size()) fail(Err::corruption, "record header truncated");
  const uint8_t* p = data.data() + pos;
  uint32_t klen = load_u32le(p);
  uint32_t vlen = load_u32le(p + 4);
  if (klen == 0) fail(Err::corruption, "record with zero-length key");
  size_t total = encoded_size(klen, vlen);
  if (pos + total > data.size()) fail(Err::corruption, "record body truncated");
  RecordView r{p + 8, klen, p + 8 + klen, vlen};
  pos += total;
  return r;
}

}  // namespace osmr
