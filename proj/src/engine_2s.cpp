#include <algorithm>
#include <chrono>
#include <thread>

#include "codec.hpp"
#include "engine_common.hpp"
#include "engines.hpp"

namespace osmr {

namespace {

// Task slot written by rank 0: {index+1 (0 = idle round), offset, length,
// repeat}, one word each.
constexpr uint64_t kTaskSlotSize = 32;

void two_sided_worker(WorkerCtx& ctx) {
  auto& job = ctx.job;
  const auto& cfg = job.cfg;
  auto& ep = ctx.ep;
  const int P = ctx.P();
  const int r = ctx.rank;
  ctx.seal_aware = false;  // chains are never sealed here; drains always land

  ep.create_window(kWinStatus, 8);
  ep.create_window(kWinKv, 0);
  ep.create_window(kWinCombine, 0);
  ep.create_window(kWinKvDir, ChainLayout::dir_size(P));
  ep.create_window(kWinCombineDir, kCombineDirSize);
  ep.create_window(kWinTask, kTaskSlotSize);
  ep.create_window(kWinCounts, static_cast<uint64_t>(P) * 8);
  ep.create_window(kWinExchange, 0);
  ep.create_window(kWinExchangeDir, 8);

  ep.lock(r, kWinKv, LockKind::shared);
  if (r == 0) job.t0 = std::chrono::steady_clock::now();
  ep.barrier();  // init

  publish_status(ctx, kStatusMap);
  ctx.tl().map_start = job.now();

  // Master-slave map: one task per worker per round, fenced on both sides.
  uint64_t total = job.tasks.size();
  uint64_t rounds = (total + static_cast<uint64_t>(P) - 1) / static_cast<uint64_t>(P);
  for (uint64_t k = 0; k < rounds; k++) {
    if (r == 0) {
      for (int w = 0; w < P; w++) {
        uint64_t idx = k * static_cast<uint64_t>(P) + static_cast<uint64_t>(w);
        uint64_t vals[4] = {0, 0, 0, 0};
        if (idx < total) {
          const TaskDescriptor& d = job.tasks[idx];
          vals[0] = idx + 1;
          vals[1] = d.offset;
          vals[2] = d.length;
          vals[3] = d.repeat;
        }
        for (int j = 0; j < 4; j++)
          ep.atomic_replace(w, kWinTask, static_cast<uint64_t>(j) * 8, vals[j]);
      }
    }
    ep.barrier();  // scatter visible
    uint64_t tag = ep.atomic_fetch(r, kWinTask, 0);
    if (tag) {
      TaskDescriptor d;
      d.index = tag - 1;
      d.offset = ep.atomic_fetch(r, kWinTask, 8);
      d.length = ep.atomic_fetch(r, kWinTask, 16);
      d.repeat = static_cast<uint32_t>(ep.atomic_fetch(r, kWinTask, 24));
      if (cfg.debug.read_delay_ms)
        std::this_thread::sleep_for(std::chrono::milliseconds(cfg.debug.read_delay_ms));
      TaskRead tr = read_task(job.file, d);
      map_task(ctx, tr);
    }
    ep.barrier();  // round complete
    ep.check_abort();
  }
  ctx.tl().map_end = job.now();
  ep.barrier();  // map phase fence

  publish_status(ctx, kStatusReduce);
  ctx.tl().reduce_start = job.now();

  // Exchange: publish per-target byte counts, carve landing zones, then push
  // in synchronized pairwise rounds.
  std::vector<std::vector<SealedBucket>> snaps(static_cast<size_t>(P));
  std::vector<uint64_t> send_bytes(static_cast<size_t>(P), 0);
  for (int t = 0; t < P; t++) {
    snaps[static_cast<size_t>(t)] = snapshot_chain(ep, job.lay, t);
    for (const auto& b : snaps[static_cast<size_t>(t)])
      send_bytes[static_cast<size_t>(t)] += b.committed;
  }
  for (int t = 0; t < P; t++)
    ep.atomic_replace(r, kWinCounts, static_cast<uint64_t>(t) * 8,
                      t == r ? 0 : send_bytes[static_cast<size_t>(t)]);
  ep.barrier();  // counts visible

  std::vector<uint64_t> incoming(static_cast<size_t>(P), 0);
  uint64_t recv_total = 0;
  for (int o = 0; o < P; o++) {
    if (o == r) continue;
    incoming[static_cast<size_t>(o)] =
        ep.atomic_fetch(o, kWinCounts, static_cast<uint64_t>(r) * 8);
    recv_total += incoming[static_cast<size_t>(o)];
  }
  uint64_t xdisp = recv_total ? ep.attach_region(kWinExchange, recv_total) : 0;
  ep.atomic_replace(r, kWinExchangeDir, 0, xdisp);
  ep.barrier();  // landing zones ready

  // Every unordered pair {a,b} has exactly one step == a xor b, which can
  // reach next_pow2(P)-1 when P is not a power of two.
  int xor_steps = 1;
  while (xor_steps < P) xor_steps <<= 1;
  for (int step = 1; step < xor_steps; step++) {
    int partner = r ^ step;
    if (partner < P && send_bytes[static_cast<size_t>(partner)]) {
      // Landing slots are ordered by source rank inside each zone.
      uint64_t dest = ep.atomic_fetch(partner, kWinExchangeDir, 0);
      for (int o = 0; o < r; o++)
        dest += ep.atomic_fetch(o, kWinCounts, static_cast<uint64_t>(partner) * 8);
      ep.lock(partner, kWinExchange, LockKind::shared);
      for (const auto& b : snaps[static_cast<size_t>(partner)]) {
        if (!b.committed) continue;
        ctx.bucket_buf.clear();
        read_bucket(ep, job.lay, r, b, cfg.chunk_size, ctx.bucket_buf);
        for (uint64_t off = 0; off < b.committed; off += cfg.chunk_size) {
          uint64_t n = std::min(cfg.chunk_size, b.committed - off);
          ep.put(partner, kWinExchange, dest + off, ByteView(ctx.bucket_buf).subspan(off, n));
        }
        dest += b.committed;
      }
      ep.unlock(partner, kWinExchange);
    }
    ep.barrier();  // pairwise rounds run in lockstep
  }

  // Fold: own chain locally, then each received span in source order.
  for (const auto& b : snaps[static_cast<size_t>(r)]) {
    if (!b.committed) continue;
    ctx.bucket_buf.clear();
    read_bucket(ep, job.lay, r, b, cfg.chunk_size, ctx.bucket_buf);
    fold_records(ctx, ctx.bucket_buf);
  }
  if (recv_total) {
    ep.lock(r, kWinExchange, LockKind::shared);
    uint64_t base = xdisp;
    for (int o = 0; o < P; o++) {
      uint64_t n = incoming[static_cast<size_t>(o)];
      if (!n) continue;
      ctx.bucket_buf.resize(n);
      ep.get_chunked(r, kWinExchange, base, n, cfg.chunk_size, ctx.bucket_buf.data());
      fold_records(ctx, ctx.bucket_buf);
      base += n;
    }
    ep.unlock(r, kWinExchange);
  }
  Bytes run0;
  ctx.table.sort_into(run0);
  ctx.table.clear();
  uint64_t run0_disp = write_run(ctx, run0);
  ctx.tl().reduce_end = job.now();
  ep.barrier();  // reduce phase fence

  publish_status(ctx, kStatusCombine);
  ctx.tl().combine_start = job.now();
  Bytes fin = combine_tree(ctx, std::move(run0), run0_disp, false);
  ctx.tl().combine_end = job.now();
  if (r == 0) {
    job.result = std::move(fin);
    job.t_result = job.now();
  }
  publish_status(ctx, kStatusDone);
  ctx.tl().done = job.now();
  ep.unlock(r, kWinKv);
  ep.barrier();  // final
}

}  // namespace

JobSummary run_two_sided(const JobConfig& cfg) {
  if (cfg.checkpoint.enabled)
    fail(Err::config, "checkpointing requires the decoupled engine");
  FileReader file(cfg.corpus_path);
  auto uc = find_usecase(cfg.usecase);
  JobContext job(cfg, *uc, file);
  job.num_workers = cfg.num_workers;
  job.task_size = resolve_task_size(cfg.task_size, file.size(), cfg.num_workers);
  job.bucket_size = resolve_bucket_size(cfg.bucket_size, file.size(), cfg.num_workers);
  job.tasks = split_tasks(file.size(), job.task_size);
  for (auto& t : job.tasks) t.repeat = cfg.skew.repeat_for(t.index, cfg.num_workers);
  job.lay = ChainLayout{kWinKv, kWinKvDir, job.bucket_size};
  job.timelines.assign(static_cast<size_t>(cfg.num_workers), {});

  Fabric fab(cfg.num_workers);
  JobSummary s = run_workers(job, fab, [&](WorkerCtx& ctx) { two_sided_worker(ctx); });
  s.engine = EngineKind::two_sided;
  return s;
}

}  // namespace osmr
