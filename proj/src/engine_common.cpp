#include "engine_common.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "codec.hpp"

namespace osmr {

// ---- FileReader ----

FileReader::FileReader(const std::string& path) {
  fd_ = ::open(path.c_str(), O_RDONLY);
  if (fd_ < 0) fail(Err::io, "open " + path + ": " + std::strerror(errno));
  struct stat st{};
  if (::fstat(fd_, &st) != 0) fail(Err::io, "fstat " + path);
  size_ = static_cast<uint64_t>(st.st_size);
}

FileReader::~FileReader() {
  if (fd_ >= 0) ::close(fd_);
}

void FileReader::read(uint64_t off, uint64_t len, uint8_t* dst) const {
  while (len > 0) {
    ssize_t n = ::pread(fd_, dst, len, static_cast<off_t>(off));
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(Err::io, std::string("pread: ") + std::strerror(errno));
    }
    if (n == 0) fail(Err::io, "pread: unexpected end of file");
    off += static_cast<uint64_t>(n);
    dst += n;
    len -= static_cast<uint64_t>(n);
  }
}

TaskRead read_task(const FileReader& file, const TaskDescriptor& desc) {
  TaskRead tr;
  tr.desc = desc;
  tr.lead = desc.offset > 0 ? 1 : 0;
  tr.nominal = desc.length;
  uint64_t begin = desc.offset - tr.lead;
  uint64_t end = std::min(file.size(), desc.offset + desc.length + kTaskOverscan);
  tr.data.resize(end - begin);
  file.read(begin, end - begin, tr.data.data());
  return tr;
}

// ---- PrefetchReader ----

PrefetchReader::PrefetchReader(const FileReader& file, uint32_t delay_ms)
    : file_(file), delay_ms_(delay_ms), th_([this] { loop(); }) {}

PrefetchReader::~PrefetchReader() {
  {
    std::lock_guard lk(m_);
    stop_ = true;
  }
  cv_.notify_all();
  th_.join();
}

void PrefetchReader::loop() {
  std::unique_lock lk(m_);
  for (;;) {
    cv_.wait(lk, [this] { return has_req_ || stop_; });
    if (stop_) return;
    TaskDescriptor d = req_;
    has_req_ = false;
    lk.unlock();
    if (delay_ms_) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
    TaskRead r = read_task(file_, d);
    lk.lock();
    res_ = std::move(r);
    has_res_ = true;
    cv_.notify_all();
  }
}

void PrefetchReader::request(const TaskDescriptor& desc) {
  if (pending_) fail(Err::usage, "prefetch: a read is already outstanding");
  {
    std::lock_guard lk(m_);
    req_ = desc;
    has_req_ = true;
  }
  cv_.notify_all();
  pending_ = true;
}

TaskRead PrefetchReader::wait() {
  if (!pending_) fail(Err::usage, "prefetch: nothing requested");
  std::unique_lock lk(m_);
  cv_.wait(lk, [this] { return has_res_; });
  has_res_ = false;
  pending_ = false;
  return std::move(res_);
}

// ---- status words ----

void publish_status(WorkerCtx& ctx, uint64_t status) {
  ctx.ep.atomic_replace(ctx.rank, kWinStatus, 0, status);
}

uint64_t fetch_status(WorkerCtx& ctx, int worker) {
  return ctx.ep.atomic_fetch(worker, kWinStatus, 0);
}

// ---- map / drain ----

namespace {

struct TableEmitter final : Emitter {
  explicit TableEmitter(WorkerCtx& c) : ctx(c) {}
  void emit(ByteView key, ByteView value) override {
    ctx.table.insert(key, value, ctx.job.uc, true);
    if (ctx.table.payload_bytes() > ctx.job.cfg.spill_bytes) drain_table(ctx);
  }
  WorkerCtx& ctx;
};

// Imbalance repeats run the full map and aggregation but their output is
// thrown away, so skew changes cost without changing the result.
struct ScratchEmitter final : Emitter {
  explicit ScratchEmitter(WorkerCtx& c) : ctx(c) {}
  void emit(ByteView key, ByteView value) override {
    ctx.scratch.insert(key, value, ctx.job.uc, true);
  }
  WorkerCtx& ctx;
};

}  // namespace

void map_task(WorkerCtx& ctx, const TaskRead& tr) {
  TaskInput in = tr.input();
  const auto& cfg = ctx.job.cfg;
  {
    TableEmitter out(ctx);
    ctx.job.uc.map(in, out);
  }
  if (cfg.debug.map_delay_ms)
    std::this_thread::sleep_for(std::chrono::milliseconds(cfg.debug.map_delay_ms));
  for (uint32_t rep = 1; rep < tr.desc.repeat; rep++) {
    ScratchEmitter out(ctx);
    ctx.job.uc.map(in, out);
    if (cfg.debug.map_delay_ms)
      std::this_thread::sleep_for(std::chrono::milliseconds(cfg.debug.map_delay_ms));
    ctx.scratch.clear();
    ctx.ep.check_abort();
  }
  ctx.tasks_mapped++;
  drain_table(ctx);
}

void drain_table(WorkerCtx& ctx) {
  int P = ctx.P();
  if (ctx.target_sealed.empty()) ctx.target_sealed.assign(static_cast<size_t>(P), 0);
  // Statuses are re-checked once per drain; a target at Reduce or later is
  // treated as sealed without touching its chain.
  std::vector<uint8_t> checked(static_cast<size_t>(P), 0);
  ReduceTable kept;
  ctx.table.for_each([&](ReduceTable::EntryRef e) {
    int t = static_cast<int>(e.hash % static_cast<uint64_t>(P));
    bool keep = false;
    if (ctx.seal_aware) {
      if (!ctx.target_sealed[t] && !checked[t]) {
        checked[t] = 1;
        if (fetch_status(ctx, t) >= kStatusReduce) ctx.target_sealed[t] = 1;
      }
      keep = ctx.target_sealed[t] != 0;
    }
    if (!keep) {
      ctx.encode_buf.clear();
      encode_record(ctx.encode_buf, e.key, e.val.view());
      if (append_record(ctx.ep, ctx.job.lay, t, ctx.encode_buf) == AppendResult::sealed) {
        ctx.target_sealed[t] = 1;
        keep = true;
      } else {
        ctx.records_appended++;
      }
    }
    if (keep) kept.adopt(e.hash, e.key, std::move(e.val));
  });
  ctx.stray_records = kept.size();
  ctx.table = std::move(kept);
}

// ---- reduce fold ----

void fold_records(WorkerCtx& ctx, ByteView span) {
  iterate_records(span, [&](const RecordView& rv) {
    ctx.table.insert(rv.key_view(), rv.value_view(), ctx.job.uc, false);
  });
}

void fold_chains(WorkerCtx& ctx) {
  for (int e = 0; e < ctx.P(); e++) {
    auto buckets = seal_chain(ctx.ep, ctx.job.lay, e);
    bool self = e == ctx.rank;
    // The worker holds a shared epoch on its own kv window for the whole run.
    if (!self) ctx.ep.lock(e, kWinKv, LockKind::shared);
    for (const auto& b : buckets) {
      if (b.committed == 0) continue;
      ctx.bucket_buf.clear();
      read_bucket(ctx.ep, ctx.job.lay, e, b, ctx.job.cfg.chunk_size, ctx.bucket_buf);
      fold_records(ctx, ctx.bucket_buf);
    }
    if (!self) ctx.ep.unlock(e, kWinKv);
    ctx.ep.check_abort();
  }
}

// ---- combine ----

uint64_t write_run(WorkerCtx& ctx, ByteView run) {
  if (run.empty()) return 0;
  bool held = ctx.ep.holds_lock(ctx.rank, kWinCombine);
  if (!held) ctx.ep.lock(ctx.rank, kWinCombine, LockKind::exclusive);
  uint64_t disp = ctx.ep.attach_region(kWinCombine, run.size());
  uint64_t chunk = ctx.job.cfg.chunk_size;
  for (uint64_t off = 0; off < run.size(); off += chunk) {
    uint64_t n = std::min(chunk, run.size() - off);
    ctx.ep.put(ctx.rank, kWinCombine, disp + off, run.subspan(off, n));
  }
  if (!held) ctx.ep.unlock(ctx.rank, kWinCombine);
  return disp;
}

void publish_run(WorkerCtx& ctx, uint64_t disp, uint64_t len) {
  ctx.ep.atomic_replace(ctx.rank, kWinCombineDir, kRunDispOff, disp);
  ctx.ep.atomic_replace(ctx.rank, kWinCombineDir, kRunLenOff, len);
}

Bytes fetch_run(WorkerCtx& ctx, int partner, LockKind kind) {
  ctx.ep.lock(partner, kWinCombine, kind);
  uint64_t disp = ctx.ep.atomic_fetch(partner, kWinCombineDir, kRunDispOff);
  uint64_t len = ctx.ep.atomic_fetch(partner, kWinCombineDir, kRunLenOff);
  Bytes out(len);
  if (len) ctx.ep.get_chunked(partner, kWinCombine, disp, len, ctx.job.cfg.chunk_size, out.data());
  ctx.ep.unlock(partner, kWinCombine);
  return out;
}

int combine_levels(int num_workers) {
  int l = 0;
  while ((1 << l) < num_workers) l++;
  return l;
}

Bytes combine_tree(WorkerCtx& ctx, Bytes run0, uint64_t run0_disp, bool one_sided) {
  Bytes cur = std::move(run0);
  uint64_t cur_disp = run0_disp;
  bool in_window = true;  // run0 was written to the combine window by the caller
  int levels = combine_levels(ctx.P());

  auto hand_off = [&] {
    if (!in_window) cur_disp = write_run(ctx, cur);
    publish_run(ctx, cur_disp, cur.size());
    if (one_sided)
      ctx.ep.unlock(ctx.rank, kWinCombine);  // held since init; release is the hand-off
    else
      ctx.ep.atomic_replace(ctx.rank, kWinCombineDir, kRunReadyOff, 1);
  };

  for (int lvl = 1; lvl <= levels; lvl++) {
    int step = 1 << lvl;
    int half = 1 << (lvl - 1);
    if (ctx.rank % step == 0) {
      int partner = ctx.rank + half;
      if (partner >= ctx.P()) continue;  // no partner at this level: pass through
      if (!one_sided) {
        while (ctx.ep.atomic_fetch(partner, kWinCombineDir, kRunReadyOff) == 0) {
          ctx.ep.check_abort();
          std::this_thread::sleep_for(std::chrono::microseconds(50));
        }
      }
      Bytes partner_run =
          fetch_run(ctx, partner, one_sided ? LockKind::exclusive : LockKind::shared);
      Bytes merged;
      merge_runs(cur, partner_run, ctx.job.uc, merged);
      if (ctx.job.cfg.debug.validate_runs && !run_strictly_sorted(merged))
        fail(Err::verify, "combine produced an out-of-order run");
      cur = std::move(merged);
      in_window = false;
    } else {
      hand_off();
      return {};
    }
  }
  hand_off();  // rank 0: the published run is the job result
  return cur;
}

// ---- worker thread driver ----

JobSummary run_workers(JobContext& job, Fabric& fab,
                       const std::function<void(WorkerCtx&)>& body) {
  int P = job.num_workers;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(P));
  for (int r = 0; r < P; r++) {
    threads.emplace_back([&, r] {
      try {
        WorkerCtx ctx(job, fab.endpoint(r));
        body(ctx);
      } catch (...) {
        fab.abort(std::current_exception());
      }
    });
  }
  for (auto& t : threads) t.join();
  fab.rethrow_abort_cause();

  JobSummary s;
  s.num_workers = P;
  s.corpus_bytes = job.file.size();
  s.task_size = job.task_size;
  s.chunk_size = job.cfg.chunk_size;
  s.bucket_size = job.bucket_size;
  s.total_tasks = job.tasks.size();
  s.timelines = job.timelines;
  for (const auto& tl : job.timelines) {
    s.t_map = std::max(s.t_map, tl.map_end);
    s.t_reduce = std::max(s.t_reduce, tl.reduce_end);
    s.t_combine = std::max(s.t_combine, tl.combine_end);
  }
  s.t_total = job.t_result;
  s.result = std::move(job.result);
  s.result_digest = fnv1a64(s.result.data(), s.result.size());
  iterate_records(s.result, [&](const RecordView&) { s.result_records++; });
  FabricStats st = fab.stats();
  s.barrier_episodes = fab.barrier_episodes();
  s.lock_acquires = st.lock_acquires;
  s.transfers = st.transfers;
  s.put_bytes = st.put_bytes;
  s.get_bytes = st.get_bytes;
  return s;
}

}  // namespace osmr
