#pragma once

#include "codec.hpp"
#include "usecase.hpp"

namespace osmr {

// Open-addressing aggregation table keyed by record key bytes. One instance
// per worker: map emissions fold into it (local reduce), pulled reduce
// records fold into it, and sorting it yields the worker's level-0 combine
// run. Key bytes live in an internal arena; entries reference offsets so
// growth never invalidates them.
class ReduceTable {
public:
  ReduceTable() { rehash(1024); }

  void insert(ByteView key, ByteView value, const UseCase& uc, bool local) {
    insert_hashed(hash64(key), key, value, uc, local);
  }

  void insert_hashed(uint64_t h, ByteView key, ByteView value, const UseCase& uc, bool local) {
    size_t idx = probe(h, key);
    Slot& s = slots_[idx];
    if (s.key_len == 0) {
      s.hash = h;
      s.key_off = arena_add(key);
      s.key_len = static_cast<uint32_t>(key.size());
      s.val.assign(value);
      count_++;
      payload_ += key.size() + value.size();
      if (count_ * 10 >= slots_.size() * 7) rehash(slots_.size() * 2);
    } else {
      if (local)
        uc.reduce_local(key, value, s.val);
      else
        uc.reduce(key, value, s.val);
    }
  }

  // Moves an already-owned value in without invoking reduce; the key must
  // not be present. Used when re-homing stray entries.
  void adopt(uint64_t h, ByteView key, Value&& value) {
    size_t idx = probe(h, key);
    Slot& s = slots_[idx];
    if (s.key_len != 0) fail(Err::protocol, "adopt of duplicate key");
    s.hash = h;
    s.key_off = arena_add(key);
    s.key_len = static_cast<uint32_t>(key.size());
    payload_ += key.size() + value.size();
    s.val = std::move(value);
    count_++;
    if (count_ * 10 >= slots_.size() * 7) rehash(slots_.size() * 2);
  }

  size_t size() const { return count_; }
  size_t payload_bytes() const { return payload_; }

  struct EntryRef {
    uint64_t hash;
    ByteView key;
    Value& val;
  };

  template <typename Fn>
  void for_each(Fn&& fn) {
    for (auto& s : slots_) {
      if (s.key_len == 0) continue;
      fn(EntryRef{s.hash, {arena_.data() + s.key_off, s.key_len}, s.val});
    }
  }

  void clear() {
    for (auto& s : slots_) {
      if (s.key_len) {
        s.val = Value();
        s.key_len = 0;
      }
    }
    arena_.clear();
    count_ = 0;
    payload_ = 0;
  }

  // Sorts entries byte-lexicographically by key and appends encoded records
  // to out. The table is left unchanged.
  void sort_into(Bytes& out);

private:
  struct Slot {
    uint64_t hash = 0;
    uint32_t key_off = 0;
    uint32_t key_len = 0;  // 0 = empty
    Value val;
  };

  uint32_t arena_add(ByteView key) {
    size_t off = arena_.size();
    if (off + key.size() > 0xffffffffull) fail(Err::resource, "reduce table key arena overflow");
    arena_.insert(arena_.end(), key.begin(), key.end());
    return static_cast<uint32_t>(off);
  }

  bool slot_matches(const Slot& s, uint64_t h, ByteView key) const {
    return s.hash == h && s.key_len == key.size() &&
           std::memcmp(arena_.data() + s.key_off, key.data(), key.size()) == 0;
  }

  size_t probe(uint64_t h, ByteView key) const {
    size_t mask = slots_.size() - 1;
    size_t idx = static_cast<size_t>(h) & mask;
    while (slots_[idx].key_len != 0 && !slot_matches(slots_[idx], h, key)) idx = (idx + 1) & mask;
    return idx;
  }

  void rehash(size_t n);

  std::vector<Slot> slots_;
  Bytes arena_;
  size_t count_ = 0;
  size_t payload_ = 0;
};

// Byte-lexicographic comparison of two sorted encoded-record buffers is the
// combine ordering; merge_runs combines equal keys with uc.reduce.
void merge_runs(ByteView a, ByteView b, const UseCase& uc, Bytes& out);

// Validates that a run is strictly sorted with no duplicate keys.
bool run_strictly_sorted(ByteView run);

}  // namespace osmr
