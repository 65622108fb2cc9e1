#include "reduce_table.hpp"

#include <algorithm>

namespace osmr {

void ReduceTable::rehash(size_t n) {
  std::vector<Slot> old;
  old.swap(slots_);
  slots_.resize(n);
  for (auto& s : old) {
    if (s.key_len == 0) continue;
    size_t mask = slots_.size() - 1;
    size_t idx = static_cast<size_t>(s.hash) & mask;
    while (slots_[idx].key_len != 0) idx = (idx + 1) & mask;
    slots_[idx] = std::move(s);
  }
}

namespace {

int compare_keys(const uint8_t* a, uint32_t alen, const uint8_t* b, uint32_t blen) {
  int c = std::memcmp(a, b, std::min(alen, blen));
  if (c != 0) return c;
  return alen < blen ? -1 : (alen > blen ? 1 : 0);
}

// Big-endian load of the first up-to-8 key bytes; orders identically to the
// byte-wise comparison for the covered prefix.
uint64_t key_prefix(const uint8_t* p, uint32_t len) {
  uint64_t v = 0;
  uint32_t n = std::min<uint32_t>(len, 8);
  for (uint32_t i = 0; i < n; i++) v |= static_cast<uint64_t>(p[i]) << (56 - 8 * i);
  return v;
}

struct SortRec {
  uint64_t prefix;
  const uint8_t* key;
  uint32_t key_len;
  const uint8_t* val;
  uint32_t val_len;
};

}  // namespace

void ReduceTable::sort_into(Bytes& out) {
  std::vector<SortRec> recs;
  recs.reserve(count_);
  for (auto& s : slots_) {
    if (s.key_len == 0) continue;
    const uint8_t* k = arena_.data() + s.key_off;
    recs.push_back({key_prefix(k, s.key_len), k, s.key_len, s.val.data(), s.val.size()});
  }
  std::sort(recs.begin(), recs.end(), [](const SortRec& a, const SortRec& b) {
    if (a.prefix != b.prefix) return a.prefix < b.prefix;
    return compare_keys(a.key, a.key_len, b.key, b.key_len) < 0;
  });
  size_t bytes = 0;
  for (const auto& r : recs) bytes += encoded_size(r.key_len, r.val_len);
  out.reserve(out.size() + bytes);
  for (const auto& r : recs)
    encode_record(out, {r.key, r.key_len}, {r.val, r.val_len});
}

void merge_runs(ByteView a, ByteView b, const UseCase& uc, Bytes& out) {
  size_t pa = 0, pb = 0;
  bool has_a = pa < a.size(), has_b = pb < b.size();
  RecordView ra{}, rb{};
  if (has_a) ra = decode_record(a, pa);
  if (has_b) rb = decode_record(b, pb);
  Value acc;
  while (has_a || has_b) {
    int c;
    if (!has_a)
      c = 1;
    else if (!has_b)
      c = -1;
    else
      c = compare_keys(ra.key, ra.key_len, rb.key, rb.key_len);
    if (c < 0) {
      encode_record(out, ra.key_view(), ra.value_view());
      has_a = pa < a.size();
      if (has_a) ra = decode_record(a, pa);
    } else if (c > 0) {
      encode_record(out, rb.key_view(), rb.value_view());
      has_b = pb < b.size();
      if (has_b) rb = decode_record(b, pb);
    } else {
      acc.assign(ra.value_view());
      uc.reduce(ra.key_view(), rb.value_view(), acc);
      encode_record(out, ra.key_view(), acc.view());
      has_a = pa < a.size();
      if (has_a) ra = decode_record(a, pa);
      has_b = pb < b.size();
      if (has_b) rb = decode_record(b, pb);
    }
  }
}

bool run_strictly_sorted(ByteView run) {
  size_t pos = 0;
  bool first = true;
  RecordView prev{};
  while (pos < run.size()) {
    RecordView r = decode_record(run, pos);
    if (!first && compare_keys(prev.key, prev.key_len, r.key, r.key_len) >= 0) return false;
    prev = r;
    first = false;
  }
  return true;
}

}  // namespace osmr
