#include "checkpoint.hpp"

#include <array>

#include "codec.hpp"

namespace osmr {

namespace {

constexpr uint64_t kMetaMagic = 0x3154454d524d534full;

constexpr uint64_t kFlagReduceDone = 1ull << 0;
constexpr uint64_t kFlagDone = 1ull << 1;

struct Cursor {
  ByteView in;
  size_t pos = 0;

  const uint8_t* take(size_t n) {
    if (pos + n > in.size()) fail(Err::corruption, "recovery metadata truncated");
    const uint8_t* p = in.data() + pos;
    pos += n;
    return p;
  }
  uint64_t u64() { return load_u64le(take(8)); }
  uint32_t u32() { return load_u32le(take(4)); }
};

void put_u64(Bytes& out, uint64_t v) {
  size_t n = out.size();
  out.resize(n + 8);
  store_u64le(out.data() + n, v);
}

void put_u32(Bytes& out, uint32_t v) {
  size_t n = out.size();
  out.resize(n + 4);
  store_u32le(out.data() + n, v);
}

}  // namespace

Bytes encode_ckpt_meta(const CkptMeta& m) {
  Bytes out;
  put_u64(out, kMetaMagic);
  put_u32(out, m.num_workers);
  put_u32(out, m.rank);
  put_u64(out, m.corpus_bytes);
  put_u64(out, m.task_size);
  put_u64(out, m.total_tasks);
  put_u64(out, (m.reduce_done ? kFlagReduceDone : 0) | (m.done ? kFlagDone : 0));
  put_u64(out, m.run0_disp);
  put_u64(out, m.run0_len);
  put_u64(out, m.final_disp);
  put_u64(out, m.final_len);
  put_u64(out, m.task_done.size());
  out.insert(out.end(), m.task_done.begin(), m.task_done.end());
  put_u32(out, static_cast<uint32_t>(m.watermarks.size()));
  for (const auto& [n, tail] : m.watermarks) {
    put_u64(out, n);
    put_u64(out, tail);
  }
  put_u64(out, m.strays.size());
  out.insert(out.end(), m.strays.begin(), m.strays.end());
  return out;
}

CkptMeta decode_ckpt_meta(ByteView in) {
  Cursor c{in};
  if (c.u64() != kMetaMagic) fail(Err::corruption, "recovery metadata has a bad magic");
  CkptMeta m;
  m.num_workers = c.u32();
  m.rank = c.u32();
  m.corpus_bytes = c.u64();
  m.task_size = c.u64();
  m.total_tasks = c.u64();
  uint64_t flags = c.u64();
  m.reduce_done = (flags & kFlagReduceDone) != 0;
  m.done = (flags & kFlagDone) != 0;
  m.run0_disp = c.u64();
  m.run0_len = c.u64();
  m.final_disp = c.u64();
  m.final_len = c.u64();
  uint64_t bl = c.u64();
  const uint8_t* bp = c.take(bl);
  m.task_done.assign(bp, bp + bl);
  uint32_t wc = c.u32();
  m.watermarks.reserve(wc);
  for (uint32_t i = 0; i < wc; i++) {
    uint64_t n = c.u64();
    uint64_t tail = c.u64();
    m.watermarks.emplace_back(n, tail);
  }
  uint64_t sl = c.u64();
  const uint8_t* sp = c.take(sl);
  m.strays.assign(sp, sp + sl);
  return m;
}

std::string ckpt_path(const std::string& dir, int rank, int wid) {
  static const std::array<const char*, 5> names = {"status", "kv", "combine", "kvdir", "cbdir"};
  const char* name = nullptr;
  switch (wid) {
    case kWinStatus: name = names[0]; break;
    case kWinKv: name = names[1]; break;
    case kWinCombine: name = names[2]; break;
    case kWinKvDir: name = names[3]; break;
    case kWinCombineDir: name = names[4]; break;
    default: fail(Err::usage, "no storage mapping for window " + std::to_string(wid));
  }
  return dir + "/w" + std::to_string(rank) + "-" + name + ".win";
}

const std::vector<int>& ckpt_windows() {
  static const std::vector<int> ids = {kWinStatus, kWinKv, kWinCombine, kWinKvDir,
                                       kWinCombineDir};
  return ids;
}

namespace {

// Drops chain bytes past the owner's last committed task boundary. Appends
// are strictly ordered per chain, so trimming the published bucket count and
// the tail's committed length is exact. Seal bits survive: a seal observed by
// a peer must stay observed.
void rollback_chains(RecoveredWorker& rw, int num_workers) {
  Bytes& dir = rw.images.at(kWinKvDir).bytes;
  Bytes& kv = rw.images.at(kWinKv).bytes;
  if (rw.meta.watermarks.size() != static_cast<size_t>(num_workers))
    fail(Err::corruption, "watermark count does not match the worker count");
  for (int t = 0; t < num_workers; t++) {
    auto [n, tail] = rw.meta.watermarks[static_cast<size_t>(t)];
    uint64_t coff = ChainLayout::count_off(t);
    if (coff + 8 > dir.size()) fail(Err::corruption, "chain directory image too small");
    uint64_t cur = load_u64le(dir.data() + coff);
    uint64_t n_img = cur & kCountMask;
    uint64_t seal = cur & kSealBit;
    if (n > n_img) fail(Err::corruption, "chain image behind its committed watermark");
    if (n_img > n) store_u64le(dir.data() + coff, n | seal);
    if (n == 0) continue;
    uint64_t soff = ChainLayout::slot_off(t, static_cast<int>(n - 1));
    if (soff + 16 > dir.size()) fail(Err::corruption, "chain directory image too small");
    uint64_t disp = load_u64le(dir.data() + soff);
    if (disp + 8 > kv.size()) fail(Err::corruption, "bucket control outside the kv image");
    uint64_t ctl = load_u64le(kv.data() + disp);
    uint64_t committed = ctl & kCountMask;
    uint64_t cseal = ctl & kSealBit;
    if (tail > committed) fail(Err::corruption, "bucket image behind its committed watermark");
    if (committed > tail) store_u64le(kv.data() + disp, tail | cseal);
  }
}

}  // namespace

ResumePlan plan_resume(const JobConfig& cfg, uint64_t corpus_bytes, uint64_t task_size,
                       uint64_t total_tasks, int num_workers) {
  ResumePlan plan;
  if (!cfg.checkpoint.resume) return plan;

  auto cold = [&](std::string why) {
    ResumePlan p;
    p.note = std::move(why);
    return p;
  };

  std::vector<RecoveredWorker> ws(static_cast<size_t>(num_workers));
  for (int r = 0; r < num_workers; r++) {
    RecoveredWorker& rw = ws[static_cast<size_t>(r)];
    for (int wid : ckpt_windows()) {
      std::string path = ckpt_path(cfg.checkpoint.dir, r, wid);
      auto img = StorageFile::load(path);
      if (!img) return cold("no clean image at " + path);
      if (img->window_id != static_cast<uint32_t>(wid))
        return cold("window identity mismatch at " + path);
      rw.images[wid] = std::move(*img);
    }
    try {
      rw.meta = decode_ckpt_meta(rw.images.at(kWinStatus).meta);
    } catch (const Error&) {
      return cold("undecodable recovery metadata for worker " + std::to_string(r));
    }
    if (rw.meta.num_workers != static_cast<uint32_t>(num_workers))
      fail(Err::config, "resume requires the original worker count (" +
                            std::to_string(rw.meta.num_workers) + ")");
    if (rw.meta.rank != static_cast<uint32_t>(r)) return cold("worker files out of place");
    if (rw.meta.corpus_bytes != corpus_bytes || rw.meta.task_size != task_size ||
        rw.meta.total_tasks != total_tasks)
      fail(Err::config, "resume with a different corpus or task geometry");
  }

  try {
    for (auto& rw : ws) rollback_chains(rw, num_workers);
  } catch (const Error&) {
    return cold("inconsistent chain images");
  }

  bool all_done = true, all_reduced = true;
  for (const auto& rw : ws) {
    all_done = all_done && rw.meta.done;
    all_reduced = all_reduced && (rw.meta.reduce_done || rw.meta.done);
  }
  plan.floor = all_done     ? ResumeFloor::done
               : all_reduced ? ResumeFloor::combine
                             : ResumeFloor::map;

  for (auto& rw : ws) {
    // Worker statuses are runtime coordination state; every resume restarts
    // them from idle.
    rw.images.at(kWinStatus).bytes.assign(8, 0);
    if (plan.floor == ResumeFloor::map) {
      // Level-0 runs predate the re-run map tasks; they get recomputed. The
      // directory keeps its fixed shape, only its fields reset.
      rw.images.at(kWinCombine).bytes.clear();
      rw.images.at(kWinCombineDir).bytes.assign(kCombineDirSize, 0);
    }
  }
  plan.workers = std::move(ws);
  return plan;
}

namespace {

void sync_all(CkptState& ck, WorkerCtx& ctx) {
  ctx.ep.set_window_meta(kWinStatus, encode_ckpt_meta(ck.meta));
  // Status last: its clean header commits the boundary.
  ctx.ep.win_sync(kWinKv);
  ctx.ep.win_sync(kWinKvDir);
  ctx.ep.win_sync(kWinCombine);
  ctx.ep.win_sync(kWinCombineDir);
  ctx.ep.win_sync(kWinStatus);
}

}  // namespace

void ckpt_init(CkptState& ck, WorkerCtx& ctx, uint64_t corpus_bytes, uint64_t total_tasks,
               const CkptMeta* recovered) {
  ck.enabled = ctx.job.cfg.checkpoint.enabled;
  if (!ck.enabled) return;
  if (recovered) {
    ck.meta = *recovered;
  } else {
    ck.meta.num_workers = static_cast<uint32_t>(ctx.P());
    ck.meta.rank = static_cast<uint32_t>(ctx.rank);
    ck.meta.corpus_bytes = corpus_bytes;
    ck.meta.task_size = ctx.job.task_size;
    ck.meta.total_tasks = total_tasks;
    ck.meta.task_done.assign((total_tasks + 7) / 8, 0);
    ck.meta.watermarks.assign(static_cast<size_t>(ctx.P()), {0, 0});
  }
  sync_all(ck, ctx);
}

void ckpt_mark_task(CkptState& ck, WorkerCtx& ctx, uint64_t task_index) {
  if (!ck.enabled) return;
  ck.meta.set_task_bit(task_index);
  for (int t = 0; t < ctx.P(); t++) {
    uint64_t cnt = ctx.ep.atomic_fetch(ctx.rank, kWinKvDir, ChainLayout::count_off(t));
    uint64_t n = ctl_count(cnt);
    uint64_t tail = 0;
    if (n > 0) {
      uint64_t disp =
          ctx.ep.atomic_fetch(ctx.rank, kWinKvDir, ChainLayout::slot_off(t, static_cast<int>(n - 1)));
      tail = ctl_count(ctx.ep.atomic_fetch(ctx.rank, kWinKv, disp));
    }
    ck.meta.watermarks[static_cast<size_t>(t)] = {n, tail};
  }
  // After a drain the table holds exactly the stray records; they transfer
  // ownership across a restart through the metadata blob.
  ck.meta.strays.clear();
  ctx.table.for_each([&](ReduceTable::EntryRef e) {
    encode_record(ck.meta.strays, e.key, e.val.view());
  });
  sync_all(ck, ctx);
  ck.completed_this_run++;
  const auto& kc = ctx.job.cfg.checkpoint;
  if (kc.kill_worker == ctx.rank && kc.kill_after_tasks != 0 &&
      ck.completed_this_run == kc.kill_after_tasks)
    fail(Err::killed, "fault injection: worker " + std::to_string(ctx.rank) +
                          " killed after task " + std::to_string(task_index));
}

void ckpt_mark_reduce(CkptState& ck, WorkerCtx& ctx, uint64_t run0_disp, uint64_t run0_len) {
  if (!ck.enabled) return;
  ck.meta.reduce_done = true;
  ck.meta.run0_disp = run0_disp;
  ck.meta.run0_len = run0_len;
  sync_all(ck, ctx);
}

void ckpt_mark_done(CkptState& ck, WorkerCtx& ctx, uint64_t final_disp, uint64_t final_len) {
  if (!ck.enabled) return;
  ck.meta.done = true;
  ck.meta.final_disp = final_disp;
  ck.meta.final_len = final_len;
  sync_all(ck, ctx);
}

}  // namespace osmr
