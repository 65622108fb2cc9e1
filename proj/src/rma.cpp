#include "rma.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>

namespace osmr {

using namespace std::chrono_literals;

// Waits poll the fabric abort flag so a failed worker cannot strand peers
// inside a lock queue or barrier.
static constexpr auto kAbortPoll = 20ms;

// ---- FifoSharedMutex ----

void FifoSharedMutex::admit_locked() {
  while (!queue_.empty()) {
    auto& w = queue_.front();
    if (w->kind == LockKind::exclusive) {
      if (active_shared_ == 0 && !active_exclusive_) {
        active_exclusive_ = true;
        w->granted = true;
        queue_.pop_front();
        cv_.notify_all();
      }
      break;
    }
    if (active_exclusive_) break;
    active_shared_++;
    w->granted = true;
    queue_.pop_front();
    cv_.notify_all();
  }
}

void FifoSharedMutex::acquire(LockKind kind, Fabric& fab) {
  auto w = std::make_shared<Waiter>(kind);
  std::unique_lock<std::mutex> lk(m_);
  queue_.push_back(w);
  admit_locked();
  while (!w->granted) {
    cv_.wait_for(lk, kAbortPoll);
    if (!w->granted && fab.aborted()) {
      for (auto it = queue_.begin(); it != queue_.end(); ++it) {
        if (*it == w) {
          queue_.erase(it);
          break;
        }
      }
      lk.unlock();
      fab.check_abort();
    }
  }
}

void FifoSharedMutex::release(LockKind kind) {
  std::lock_guard<std::mutex> lk(m_);
  if (kind == LockKind::exclusive)
    active_exclusive_ = false;
  else
    active_shared_--;
  admit_locked();
}

// ---- Window ----

namespace {
constexpr uint64_t kRegionAlign = 64;

uint64_t align_up(uint64_t v, uint64_t a) { return (v + a - 1) / a * a; }

std::unique_ptr<uint64_t[]> alloc_zeroed(uint64_t bytes) {
  return std::make_unique<uint64_t[]>((bytes + 7) / 8);  // value-init: zero-filled
}
}  // namespace

Window::Window(int owner, int id, uint64_t initial_size) : owner_(owner), id_(id) {
  if (initial_size > 0) {
    Region r{0, initial_size, alloc_zeroed(initial_size)};
    regions_.push_back(std::move(r));
    size_ = initial_size;
  }
}

uint64_t Window::size() const {
  std::shared_lock lk(regions_mu_);
  return size_;
}

uint64_t Window::attach(uint64_t len) {
  if (len == 0) fail(Err::usage, "attach_region: zero length");
  std::unique_lock lk(regions_mu_);
  uint64_t disp = align_up(size_, kRegionAlign);
  Region r{disp, len, alloc_zeroed(len)};
  regions_.push_back(std::move(r));
  size_ = disp + len;
  return disp;
}

uint8_t* Window::resolve(uint64_t off, uint64_t len) {
  std::shared_lock lk(regions_mu_);
  // Regions are appended in displacement order; binary search the owner.
  size_t lo = 0, hi = regions_.size();
  while (lo < hi) {
    size_t mid = (lo + hi) / 2;
    if (regions_[mid].disp + regions_[mid].len <= off)
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo >= regions_.size()) fail(Err::protocol, "window access outside attached regions");
  const Region& r = regions_[lo];
  if (off < r.disp || off + len > r.disp + r.len)
    fail(Err::protocol, "window access crosses region bounds");
  return r.base() + (off - r.disp);
}

void Window::copy_out(uint64_t off, uint64_t len, uint8_t* dst) {
  std::shared_lock lk(regions_mu_);
  size_t lo = 0, hi = regions_.size();
  while (lo < hi) {
    size_t mid = (lo + hi) / 2;
    if (regions_[mid].disp + regions_[mid].len <= off)
      lo = mid + 1;
    else
      hi = mid;
  }
  // Dirty ranges merge only across displacement-adjacent regions, so the
  // span is gapless; walk regions and fail loudly if that ever breaks.
  while (len > 0) {
    if (lo >= regions_.size() || off < regions_[lo].disp)
      fail(Err::protocol, "window sync range not covered by regions");
    const Region& r = regions_[lo];
    uint64_t take = std::min(len, r.disp + r.len - off);
    std::memcpy(dst, r.base() + (off - r.disp), take);
    off += take;
    dst += take;
    len -= take;
    lo++;
  }
}

void Window::mark_dirty(uint64_t off, uint64_t len) {
  if (!storage_ || len == 0) return;
  std::lock_guard lk(dirty_mu_);
  if (!dirty_.empty()) {
    auto& [loff, llen] = dirty_.back();
    if (off >= loff && off <= loff + llen) {  // overlap or adjacency: extend
      uint64_t end = std::max(loff + llen, off + len);
      llen = end - loff;
      return;
    }
  }
  dirty_.emplace_back(off, len);
}

void Window::attach_storage(StorageFile file) { storage_ = std::move(file); }

void Window::seed_recovered(const Bytes& image) {
  std::unique_lock lk(regions_mu_);
  if (!regions_.empty()) fail(Err::usage, "seed_recovered on non-empty window");
  if (image.empty()) return;
  Region r{0, image.size(), alloc_zeroed(image.size())};
  std::memcpy(r.base(), image.data(), image.size());
  regions_.push_back(std::move(r));
  size_ = image.size();
}

void Window::set_meta(Bytes meta) {
  std::lock_guard lk(dirty_mu_);
  meta_ = std::move(meta);
}

Bytes Window::meta() const {
  std::lock_guard lk(dirty_mu_);
  return meta_;
}

void Window::sync() {
  if (!storage_) return;
  std::vector<std::pair<uint64_t, uint64_t>> ranges;
  Bytes meta;
  {
    std::lock_guard lk(dirty_mu_);
    ranges.swap(dirty_);
    meta = meta_;
  }
  std::sort(ranges.begin(), ranges.end());
  std::vector<std::pair<uint64_t, uint64_t>> merged;
  for (auto& [off, len] : ranges) {
    if (!merged.empty() && off <= merged.back().first + merged.back().second) {
      uint64_t end = std::max(merged.back().first + merged.back().second, off + len);
      merged.back().second = end - merged.back().first;
    } else {
      merged.emplace_back(off, len);
    }
  }
  storage_->sync(
      merged, size(),
      [this](uint64_t off, uint64_t len, uint8_t* dst) { copy_out(off, len, dst); }, meta);
}

// ---- Fabric ----

Fabric::Fabric(int num_workers) : num_workers_(num_workers) {
  if (num_workers < 1) fail(Err::config, "num_workers must be >= 1");
  windows_.resize(num_workers);
  endpoints_.reserve(num_workers);
  for (int r = 0; r < num_workers; r++) endpoints_.push_back(std::make_unique<Endpoint>(*this, r));
}

Fabric::~Fabric() = default;

Endpoint& Fabric::endpoint(int rank) {
  if (rank < 0 || rank >= num_workers_) fail(Err::usage, "endpoint: rank out of range");
  return *endpoints_[rank];
}

Window& Fabric::window(int rank, int wid) {
  Window* w = window_if(rank, wid);
  if (!w) fail(Err::protocol, "window not created: rank " + std::to_string(rank) + " id " +
                                  std::to_string(wid));
  return *w;
}

Window* Fabric::window_if(int rank, int wid) {
  if (rank < 0 || rank >= num_workers_ || wid < 0 || wid >= kMaxWindows)
    fail(Err::usage, "window id/rank out of range");
  return windows_[static_cast<size_t>(rank)][static_cast<size_t>(wid)].get();
}

void Fabric::barrier_arrive() {
  std::unique_lock<std::mutex> lk(barrier_mu_);
  uint64_t gen = barrier_generation_;
  if (++barrier_count_ == num_workers_) {
    barrier_count_ = 0;
    barrier_generation_++;
    barrier_episodes_.fetch_add(1);
    barrier_cv_.notify_all();
    return;
  }
  while (barrier_generation_ == gen) {
    barrier_cv_.wait_for(lk, kAbortPoll);
    if (barrier_generation_ == gen && aborted()) {
      // Leave the barrier broken; every other waiter aborts the same way.
      barrier_count_--;
      lk.unlock();
      check_abort();
    }
  }
}

void Fabric::abort(std::exception_ptr e) {
  {
    std::lock_guard lk(abort_mu_);
    if (!abort_cause_) abort_cause_ = e;
  }
  aborted_.store(true);
}

void Fabric::check_abort() {
  if (!aborted()) return;
  fail(Err::abort, "job aborted by a peer worker");
}

void Fabric::rethrow_abort_cause() {
  std::lock_guard lk(abort_mu_);
  if (abort_cause_) std::rethrow_exception(abort_cause_);
}

FabricStats Fabric::stats() const {
  FabricStats s;
  s.puts = st_puts_.load();
  s.gets = st_gets_.load();
  s.put_bytes = st_put_bytes_.load();
  s.get_bytes = st_get_bytes_.load();
  s.transfers = st_transfers_.load();
  s.atomics = st_atomics_.load();
  s.lock_acquires = st_locks_.load();
  return s;
}

// ---- Endpoint ----

void Endpoint::create_window(int wid, uint64_t initial_size) {
  if (wid < 0 || wid >= kMaxWindows) fail(Err::usage, "window id out of range");
  auto& slot = fab_.windows_[static_cast<size_t>(rank_)][static_cast<size_t>(wid)];
  if (slot) fail(Err::usage, "window already created");
  slot = std::make_unique<Window>(rank_, wid, initial_size);
}

void Endpoint::create_window_storage(int wid, uint64_t initial_size, const std::string& path) {
  create_window(wid, initial_size);
  Window& w = fab_.window(rank_, wid);
  w.attach_storage(StorageFile::create(path, static_cast<uint32_t>(wid), initial_size));
  if (initial_size) w.mark_dirty(0, initial_size);
}

void Endpoint::create_window_recovered(int wid, const LoadedImage& img, const std::string& path) {
  create_window(wid, 0);
  Window& w = fab_.window(rank_, wid);
  w.seed_recovered(img.bytes);
  StorageHeader hdr;
  hdr.window_id = static_cast<uint32_t>(wid);
  hdr.sync_epoch = img.sync_epoch;
  w.attach_storage(StorageFile::reopen(path, hdr));
}

uint64_t Endpoint::attach_region(int wid, uint64_t len) {
  return fab_.window(rank_, wid).attach(len);
}

void Endpoint::win_sync(int wid) { fab_.window(rank_, wid).sync(); }

void Endpoint::set_window_meta(int wid, Bytes meta) {
  fab_.window(rank_, wid).set_meta(std::move(meta));
}

uint8_t& Endpoint::held_slot(int target, int wid) {
  if (target < 0 || target >= fab_.num_workers_ || wid < 0 || wid >= kMaxWindows)
    fail(Err::usage, "lock target/window out of range");
  if (held_.empty()) held_.assign(static_cast<size_t>(fab_.num_workers_) * kMaxWindows, 0);
  return held_[static_cast<size_t>(target) * kMaxWindows + static_cast<size_t>(wid)];
}

void Endpoint::require_epoch(int target, int wid, const char* op) {
  if (held_slot(target, wid) == 0)
    fail(Err::protocol, std::string(op) + " without a lock epoch on target window");
}

void Endpoint::put(int target, int wid, uint64_t off, ByteView data) {
  require_epoch(target, wid, "put");
  Window& w = fab_.window(target, wid);
  uint8_t* dst = w.resolve(off, data.size());
  std::memcpy(dst, data.data(), data.size());
  w.mark_dirty(off, data.size());
  fab_.st_puts_.fetch_add(1, std::memory_order_relaxed);
  fab_.st_put_bytes_.fetch_add(data.size(), std::memory_order_relaxed);
  fab_.st_transfers_.fetch_add(1, std::memory_order_relaxed);
}

void Endpoint::get(int target, int wid, uint64_t off, uint64_t len, uint8_t* dst) {
  require_epoch(target, wid, "get");
  Window& w = fab_.window(target, wid);
  const uint8_t* src = w.resolve(off, len);
  std::memcpy(dst, src, len);
  fab_.st_gets_.fetch_add(1, std::memory_order_relaxed);
  fab_.st_get_bytes_.fetch_add(len, std::memory_order_relaxed);
  fab_.st_transfers_.fetch_add(1, std::memory_order_relaxed);
}

void Endpoint::get_chunked(int target, int wid, uint64_t off, uint64_t len, uint64_t chunk_limit,
                           uint8_t* dst) {
  if (chunk_limit == 0) fail(Err::usage, "get_chunked: zero chunk limit");
  while (len > 0) {
    uint64_t n = std::min(len, chunk_limit);
    get(target, wid, off, n, dst);
    off += n;
    dst += n;
    len -= n;
  }
}

uint64_t* Endpoint::word_at(int target, int wid, uint64_t off, Window** wout) {
  if (off % 8 != 0) fail(Err::protocol, "atomic on misaligned offset");
  Window& w = fab_.window(target, wid);
  if (wout) *wout = &w;
  fab_.st_atomics_.fetch_add(1, std::memory_order_relaxed);
  return reinterpret_cast<uint64_t*>(w.resolve(off, 8));
}

void Endpoint::atomic_replace(int target, int wid, uint64_t off, uint64_t value) {
  Window* w;
  std::atomic_ref<uint64_t>(*word_at(target, wid, off, &w)).store(value);
  w->mark_dirty(off, 8);
}

uint64_t Endpoint::atomic_fetch(int target, int wid, uint64_t off) {
  return std::atomic_ref<uint64_t>(*word_at(target, wid, off, nullptr)).load();
}

uint64_t Endpoint::fetch_or(int target, int wid, uint64_t off, uint64_t bits) {
  // Realized as a CAS retry loop: the substrate only assumes compare-and-swap.
  Window* w;
  std::atomic_ref<uint64_t> ref(*word_at(target, wid, off, &w));
  uint64_t cur = ref.load();
  while (!ref.compare_exchange_weak(cur, cur | bits)) {
  }
  w->mark_dirty(off, 8);
  return cur;
}

bool Endpoint::compare_and_swap(int target, int wid, uint64_t off, uint64_t& expected,
                                uint64_t desired) {
  Window* w;
  std::atomic_ref<uint64_t> ref(*word_at(target, wid, off, &w));
  bool ok = ref.compare_exchange_strong(expected, desired);
  if (ok) w->mark_dirty(off, 8);
  return ok;
}

void Endpoint::lock(int target, int wid, LockKind kind) {
  uint8_t& slot = held_slot(target, wid);
  if (slot != 0) fail(Err::protocol, "nested lock on same (target, window)");
  fab_.window(target, wid).lock.acquire(kind, fab_);
  slot = kind == LockKind::exclusive ? 2 : 1;
  fab_.st_locks_.fetch_add(1, std::memory_order_relaxed);
}

void Endpoint::unlock(int target, int wid) {
  uint8_t& slot = held_slot(target, wid);
  if (slot == 0) fail(Err::protocol, "unlock without matching lock");
  LockKind kind = slot == 2 ? LockKind::exclusive : LockKind::shared;
  slot = 0;
  fab_.window(target, wid).lock.release(kind);
}

bool Endpoint::holds_lock(int target, int wid) const {
  if (held_.empty() || target < 0 || target >= fab_.num_workers_ || wid < 0 || wid >= kMaxWindows)
    return false;
  return held_[static_cast<size_t>(target) * kMaxWindows + static_cast<size_t>(wid)] != 0;
}

void Endpoint::barrier() { fab_.barrier_arrive(); }

}  // namespace osmr
