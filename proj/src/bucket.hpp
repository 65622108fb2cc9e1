#pragma once

#include "codec.hpp"
#include "rma.hpp"

namespace osmr {

// Per-target bucket chains.
//
// A mapping worker owns one chain per reduce target, stored in its own
// key-value window. The chain directory lives in the owner's directory
// window at target * kDirStride:
//
//   count word  u64   bits 0..62 = buckets in chain, bit 63 = chain seal
//   slot[i]     2xu64 {bucket displacement, bucket capacity}
//
// Each bucket region starts with its control word (committed | seal);
// records occupy [disp+8, disp+8+committed). Chains have a single appending
// writer (the owner) and a single sealing reader (the reduce target), so
// the only required atomicity is append-commit vs. seal, settled by CAS on
// the control word: a record is either committed before the seal lands (the
// sealer's count covers it) or the commit fails and the caller keeps the
// record. Payload bytes are written before the commit CAS; bytes beyond the
// committed count are never read.

struct ChainLayout {
  int kv_wid;
  int dir_wid;
  uint64_t bucket_size;               // initial bucket capacity
  uint64_t bucket_cap_max = 256ull << 20;
  static constexpr int kMaxChain = 64;
  static constexpr uint64_t kSlotStride = 16;
  static constexpr uint64_t kDirStride = 8 + kMaxChain * kSlotStride;

  static uint64_t dir_size(int num_workers) { return kDirStride * num_workers; }
  static uint64_t count_off(int target) { return kDirStride * target; }
  static uint64_t slot_off(int target, int i) {
    return kDirStride * target + 8 + kSlotStride * i;
  }
};

// Test seam: invoked before each labeled protocol step when set.
struct ChainHooks {
  void (*fn)(void* ctx, const char* step) = nullptr;
  void* ctx = nullptr;
  void at(const char* step) const {
    if (fn) fn(ctx, step);
  }
};

enum class AppendResult { appended, sealed };

// Appends one encoded record to the caller's own chain for `target`;
// grows the chain when the tail bucket is full. Returns `sealed` without
// writing anything observable once the target has sealed the chain.
AppendResult append_record(Endpoint& ep, const ChainLayout& lay, int target, ByteView record,
                           const ChainHooks& hooks = {});

struct SealedBucket {
  uint64_t disp;
  uint64_t committed;
};

// Seals the chain owner -> ep.rank() and returns the final bucket list.
// Idempotent: re-sealing returns the same snapshot.
std::vector<SealedBucket> seal_chain(Endpoint& ep, const ChainLayout& lay, int owner,
                                     const ChainHooks& hooks = {});

// Owner-side quiesced snapshot (no seal); used by the coupled engine after
// its map phase, when no appends can be in flight.
std::vector<SealedBucket> snapshot_chain(Endpoint& ep, const ChainLayout& lay, int target);

// Reads one bucket's record bytes; caller holds a lock epoch on (owner, kv).
void read_bucket(Endpoint& ep, const ChainLayout& lay, int owner, const SealedBucket& b,
                 uint64_t chunk_limit, Bytes& out);

}  // namespace osmr
