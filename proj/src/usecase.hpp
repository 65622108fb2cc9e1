#pragma once

#include <cstdlib>
#include <cstring>
#include <memory>

#include "common.hpp"

namespace osmr {

// Small value buffer: inline up to 16 bytes (word counts are 8), heap
// beyond. Reduce folds mutate the accumulator in place.
class Value {
public:
  Value() = default;
  explicit Value(ByteView v) { assign(v); }
  Value(Value&& o) noexcept { move_from(o); }
  Value& operator=(Value&& o) noexcept {
    if (this != &o) {
      release();
      move_from(o);
    }
    return *this;
  }
  Value(const Value&) = delete;
  Value& operator=(const Value&) = delete;
  ~Value() { release(); }

  uint8_t* data() { return len_ <= kInline ? inl_ : heap_; }
  const uint8_t* data() const { return len_ <= kInline ? inl_ : heap_; }
  uint32_t size() const { return len_; }
  ByteView view() const { return {data(), len_}; }

  void assign(ByteView v) {
    resize(static_cast<uint32_t>(v.size()));
    std::memcpy(data(), v.data(), v.size());
  }

  void resize(uint32_t n) {
    if (n > kInline) {
      if (len_ <= kInline || n > cap_) {
        uint32_t cap = std::max(n, 2 * cap_);
        uint8_t* p = static_cast<uint8_t*>(std::malloc(cap));
        if (!p) fail(Err::resource, "value allocation failed");
        std::memcpy(p, data(), len_ <= kInline ? len_ : std::min(len_, n));
        release();
        heap_ = p;
        cap_ = cap;
      }
    }
    len_ = n;
  }

private:
  static constexpr uint32_t kInline = 16;
  void release() {
    if (len_ > kInline) std::free(heap_);
  }
  void move_from(Value& o) {
    len_ = o.len_;
    if (len_ <= kInline)
      std::memcpy(inl_, o.inl_, len_);
    else {
      heap_ = o.heap_;
      cap_ = o.cap_;
    }
    o.len_ = 0;
  }

  uint32_t len_ = 0;
  uint32_t cap_ = 0;
  union {
    uint8_t inl_[kInline];
    uint8_t* heap_;
  };
};

// Map input. `bytes` covers the task's nominal range plus context: when the
// task does not start at the file head, bytes[0] is the byte preceding the
// task (lead == 1), and the view extends past the nominal end far enough to
// finish any record straddling the boundary.
struct TaskInput {
  ByteView bytes;
  size_t lead;     // context bytes before the task's own range
  size_t nominal;  // task-owned byte count
};

class Emitter {
public:
  virtual void emit(ByteView key, ByteView value) = 0;
  virtual ~Emitter() = default;
};

// reduce must be associative and commutative over values; the engines fold
// in arrival order and merge combine runs pairwise.
class UseCase {
public:
  virtual void map(const TaskInput& in, Emitter& out) const = 0;
  virtual void reduce(ByteView key, ByteView incoming, Value& acc) const = 0;
  virtual void reduce_local(ByteView key, ByteView incoming, Value& acc) const {
    reduce(key, incoming, acc);
  }
  virtual ~UseCase() = default;
};

std::unique_ptr<UseCase> make_wordcount();
std::unique_ptr<UseCase> find_usecase(const std::string& name);

}  // namespace osmr
