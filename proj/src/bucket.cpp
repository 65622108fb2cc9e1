#include "bucket.hpp"

namespace osmr {

AppendResult append_record(Endpoint& ep, const ChainLayout& lay, int target, ByteView record,
                           const ChainHooks& hooks) {
  const int self = ep.rank();
  const uint64_t need = record.size();
  for (;;) {
    hooks.at("append:load_dir");
    uint64_t cw = ep.atomic_fetch(self, lay.dir_wid, lay.count_off(target));
    if (ctl_sealed(cw)) return AppendResult::sealed;
    uint64_t n = ctl_count(cw);

    uint64_t tail_disp, tail_cap;
    if (n == 0) {
      // First bucket. Publish the slot before the count so a sealer that
      // observes count == 1 always sees a valid displacement.
      uint64_t cap = std::max(lay.bucket_size, need + 8);
      hooks.at("append:attach");
      tail_disp = ep.attach_region(lay.kv_wid, cap);
      ep.atomic_replace(self, lay.dir_wid, lay.slot_off(target, 0), tail_disp);
      ep.atomic_replace(self, lay.dir_wid, lay.slot_off(target, 0) + 8, cap);
      hooks.at("append:cas_dir");
      uint64_t expected = cw;
      if (!ep.compare_and_swap(self, lay.dir_wid, lay.count_off(target), expected, 1))
        continue;  // lost to the seal; the region stays unpublished
      tail_cap = cap;
    } else {
      tail_disp = ep.atomic_fetch(self, lay.dir_wid, lay.slot_off(target, n - 1));
      tail_cap = ep.atomic_fetch(self, lay.dir_wid, lay.slot_off(target, n - 1) + 8);
    }

    hooks.at("append:load_ctl");
    uint64_t ctl = ep.atomic_fetch(self, lay.kv_wid, tail_disp);
    if (ctl_sealed(ctl)) return AppendResult::sealed;
    uint64_t committed = ctl_count(ctl);

    if (8 + committed + need > tail_cap) {
      if (n >= ChainLayout::kMaxChain)
        fail(Err::resource, "bucket chain exceeds " + std::to_string(ChainLayout::kMaxChain) +
                                " buckets; raise bucket_size");
      uint64_t cap = std::min(std::max(tail_cap * 2, need + 8), std::max(lay.bucket_cap_max, need + 8));
      hooks.at("append:attach");
      uint64_t disp = ep.attach_region(lay.kv_wid, cap);
      ep.atomic_replace(self, lay.dir_wid, lay.slot_off(target, n), disp);
      ep.atomic_replace(self, lay.dir_wid, lay.slot_off(target, n) + 8, cap);
      hooks.at("append:cas_dir");
      uint64_t expected = cw;
      if (!ep.compare_and_swap(self, lay.dir_wid, lay.count_off(target), expected, n + 1))
        continue;
      tail_disp = disp;
      committed = 0;
    }

    // Write the payload first, then publish it by committing the count.
    // The committed range [8, 8+committed) therefore always holds whole,
    // fully written records.
    hooks.at("append:write");
    {
      // The owner holds a shared epoch on its own kv window for the whole
      // map phase; this put stays inside that epoch.
      ep.put(self, lay.kv_wid, tail_disp + 8 + committed, record);
    }
    hooks.at("append:commit");
    uint64_t expected = committed;  // unsealed, count == committed
    if (ep.compare_and_swap(self, lay.kv_wid, tail_disp, expected, committed + need))
      return AppendResult::appended;
    // Single writer: the only possible interference is the seal.
    if (!ctl_sealed(expected)) fail(Err::protocol, "bucket control changed under single writer");
    return AppendResult::sealed;
  }
}

std::vector<SealedBucket> seal_chain(Endpoint& ep, const ChainLayout& lay, int owner,
                                     const ChainHooks& hooks) {
  const int self = ep.rank();
  hooks.at("seal:dir");
  // Sealing the directory first pins the chain length; sealing each bucket
  // then pins its committed count. Appends racing either CAS lose cleanly.
  uint64_t cw = ep.fetch_or(owner, lay.dir_wid, lay.count_off(self), kSealBit);
  uint64_t n = ctl_count(cw);
  std::vector<SealedBucket> out;
  out.reserve(n);
  for (uint64_t i = 0; i < n; i++) {
    uint64_t disp = ep.atomic_fetch(owner, lay.dir_wid, lay.slot_off(self, i));
    hooks.at("seal:ctl");
    uint64_t ctl = ep.fetch_or(owner, lay.kv_wid, disp, kSealBit);
    out.push_back({disp, ctl_count(ctl)});
  }
  return out;
}

std::vector<SealedBucket> snapshot_chain(Endpoint& ep, const ChainLayout& lay, int target) {
  const int self = ep.rank();
  uint64_t cw = ep.atomic_fetch(self, lay.dir_wid, lay.count_off(target));
  uint64_t n = ctl_count(cw);
  std::vector<SealedBucket> out;
  out.reserve(n);
  for (uint64_t i = 0; i < n; i++) {
    uint64_t disp = ep.atomic_fetch(self, lay.dir_wid, lay.slot_off(target, i));
    uint64_t ctl = ep.atomic_fetch(self, lay.kv_wid, disp);
    out.push_back({disp, ctl_count(ctl)});
  }
  return out;
}

void read_bucket(Endpoint& ep, const ChainLayout& lay, int owner, const SealedBucket& b,
                 uint64_t chunk_limit, Bytes& out) {
  size_t base = out.size();
  out.resize(base + b.committed);
  if (b.committed)
    ep.get_chunked(owner, lay.kv_wid, b.disp + 8, b.committed, chunk_limit, out.data() + base);
}

}  // namespace osmr
