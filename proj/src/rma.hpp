#pragma once

#include <array>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <vector>

#include "common.hpp"
#include "storage.hpp"

namespace osmr {

// In-process realization of the one-sided substrate: every worker is a
// thread, windows live in the shared address space, and all window access
// (including a worker's access to its own windows) goes through Endpoint
// operations so the engines stay written against the remote-memory model.
// The Fabric boundary is the seam where a multi-process transport would
// plug in.

enum class LockKind { shared, exclusive };

inline constexpr int kMaxWindows = 16;

struct FabricStats {
  uint64_t puts = 0;
  uint64_t gets = 0;
  uint64_t put_bytes = 0;
  uint64_t get_bytes = 0;
  uint64_t transfers = 0;  // physical transfers; get_chunked counts one per chunk
  uint64_t atomics = 0;
  uint64_t lock_acquires = 0;
};

class Fabric;

// FIFO-fair shared/exclusive lock. Waiters are granted strictly in request
// order; a run of adjacent shared requests is admitted together.
class FifoSharedMutex {
public:
  void acquire(LockKind kind, Fabric& fab);
  void release(LockKind kind);

private:
  struct Waiter {
    explicit Waiter(LockKind k) : kind(k) {}
    LockKind kind;
    bool granted = false;
  };
  void admit_locked();

  std::mutex m_;
  std::condition_variable cv_;
  std::deque<std::shared_ptr<Waiter>> queue_;
  int active_shared_ = 0;
  bool active_exclusive_ = false;
};

class Window {
public:
  Window(int owner, int id, uint64_t initial_size);

  int id() const { return id_; }
  uint64_t size() const;

  // Owner-side grow; returns the displacement of the new zero-filled region.
  // Displacements are 64-byte aligned and strictly increasing.
  uint64_t attach(uint64_t len);

  // Resolves [off, off+len) to memory; the range must lie inside one region.
  uint8_t* resolve(uint64_t off, uint64_t len);

  // Copies a possibly region-spanning span out; only the sync path needs
  // this, because merged dirty ranges may cross region seams.
  void copy_out(uint64_t off, uint64_t len, uint8_t* dst);

  void mark_dirty(uint64_t off, uint64_t len);
  bool has_storage() const { return storage_.has_value(); }
  void attach_storage(StorageFile file);
  void seed_recovered(const Bytes& image);
  void sync();
  void set_meta(Bytes meta);
  Bytes meta() const;

  FifoSharedMutex lock;

private:
  struct Region {
    uint64_t disp;
    uint64_t len;
    std::unique_ptr<uint64_t[]> mem;
    uint8_t* base() const { return reinterpret_cast<uint8_t*>(mem.get()); }
  };

  int owner_;
  int id_;
  uint64_t size_ = 0;  // displacement-space high-water mark
  std::vector<Region> regions_;
  mutable std::shared_mutex regions_mu_;

  std::optional<StorageFile> storage_;
  mutable std::mutex dirty_mu_;
  std::vector<std::pair<uint64_t, uint64_t>> dirty_;
  Bytes meta_;
};

class Endpoint;

class Fabric {
public:
  explicit Fabric(int num_workers);
  ~Fabric();

  int num_workers() const { return num_workers_; }
  Endpoint& endpoint(int rank);

  uint64_t barrier_episodes() const { return barrier_episodes_.load(); }

  void abort(std::exception_ptr e);
  bool aborted() const { return aborted_.load(std::memory_order_relaxed); }
  void check_abort();
  void rethrow_abort_cause();

  FabricStats stats() const;

  Window& window(int rank, int wid);
  Window* window_if(int rank, int wid);

private:
  friend class Endpoint;
  friend class FifoSharedMutex;

  void barrier_arrive();

  int num_workers_;
  std::vector<std::array<std::unique_ptr<Window>, kMaxWindows>> windows_;
  std::vector<std::unique_ptr<Endpoint>> endpoints_;

  std::mutex barrier_mu_;
  std::condition_variable barrier_cv_;
  int barrier_count_ = 0;
  uint64_t barrier_generation_ = 0;
  std::atomic<uint64_t> barrier_episodes_{0};

  std::atomic<bool> aborted_{false};
  std::mutex abort_mu_;
  std::exception_ptr abort_cause_;

  std::atomic<uint64_t> st_puts_{0}, st_gets_{0}, st_put_bytes_{0}, st_get_bytes_{0},
      st_transfers_{0}, st_atomics_{0}, st_locks_{0};
};

class Endpoint {
public:
  Endpoint(Fabric& fab, int rank) : fab_(fab), rank_(rank) {}

  int rank() const { return rank_; }
  Fabric& fabric() { return fab_; }

  // Window lifecycle (own windows only).
  void create_window(int wid, uint64_t initial_size);
  void create_window_storage(int wid, uint64_t initial_size, const std::string& path);
  void create_window_recovered(int wid, const LoadedImage& img, const std::string& path);
  uint64_t attach_region(int wid, uint64_t len);
  void win_sync(int wid);
  void set_window_meta(int wid, Bytes meta);

  // Data movement; caller must hold a lock epoch on (target, wid).
  void put(int target, int wid, uint64_t off, ByteView data);
  void get(int target, int wid, uint64_t off, uint64_t len, uint8_t* dst);
  void get_chunked(int target, int wid, uint64_t off, uint64_t len, uint64_t chunk_limit,
                   uint8_t* dst);

  // 64-bit atomics on 8-byte-aligned offsets; usable without a lock epoch.
  void atomic_replace(int target, int wid, uint64_t off, uint64_t value);
  uint64_t atomic_fetch(int target, int wid, uint64_t off);
  uint64_t fetch_or(int target, int wid, uint64_t off, uint64_t bits);
  bool compare_and_swap(int target, int wid, uint64_t off, uint64_t& expected, uint64_t desired);

  void lock(int target, int wid, LockKind kind);
  void unlock(int target, int wid);
  bool holds_lock(int target, int wid) const;

  void barrier();
  void check_abort() { fab_.check_abort(); }

private:
  uint64_t* word_at(int target, int wid, uint64_t off, Window** wout);
  void require_epoch(int target, int wid, const char* op);

  Fabric& fab_;
  int rank_;
  uint8_t& held_slot(int target, int wid);

  // 0 none, 1 shared, 2 exclusive; indexed target*kMaxWindows+wid. Flat so
  // the per-record append path stays cheap.
  std::vector<uint8_t> held_;
};

}  // namespace osmr
