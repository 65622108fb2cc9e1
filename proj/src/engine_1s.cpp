#include <chrono>

#include "checkpoint.hpp"
#include "codec.hpp"
#include "engine_common.hpp"
#include "engines.hpp"

namespace osmr {

namespace {

// Optional stress knob: cycles every own lock the protocol does not actually
// need, to keep any hidden reliance on lock-based visibility from creeping
// in. The own combine lock stays held; releasing it is the combine
// rendezvous and must happen exactly once.
void cycle_own_locks(WorkerCtx& ctx) {
  auto& ep = ctx.ep;
  for (int wid : {kWinStatus, kWinKvDir, kWinCombineDir}) {
    ep.lock(ctx.rank, wid, LockKind::shared);
    ep.unlock(ctx.rank, wid);
  }
  ep.unlock(ctx.rank, kWinKv);
  ep.lock(ctx.rank, kWinKv, LockKind::shared);
}

void one_sided_worker(WorkerCtx& ctx, const ResumePlan& plan, uint64_t corpus_bytes) {
  auto& job = ctx.job;
  const auto& cfg = job.cfg;
  auto& ep = ctx.ep;
  const int P = ctx.P();
  const int r = ctx.rank;
  ctx.seal_aware = true;

  const RecoveredWorker* rec =
      plan.floor != ResumeFloor::cold ? &plan.workers[static_cast<size_t>(r)] : nullptr;

  if (cfg.checkpoint.enabled) {
    if (rec) {
      for (int wid : ckpt_windows())
        ep.create_window_recovered(wid, rec->images.at(wid), ckpt_path(cfg.checkpoint.dir, r, wid));
    } else {
      auto path = [&](int wid) { return ckpt_path(cfg.checkpoint.dir, r, wid); };
      ep.create_window_storage(kWinStatus, 8, path(kWinStatus));
      ep.create_window_storage(kWinKv, 0, path(kWinKv));
      ep.create_window_storage(kWinCombine, 0, path(kWinCombine));
      ep.create_window_storage(kWinKvDir, ChainLayout::dir_size(P), path(kWinKvDir));
      ep.create_window_storage(kWinCombineDir, kCombineDirSize, path(kWinCombineDir));
    }
  } else {
    ep.create_window(kWinStatus, 8);
    ep.create_window(kWinKv, 0);
    ep.create_window(kWinCombine, 0);
    ep.create_window(kWinKvDir, ChainLayout::dir_size(P));
    ep.create_window(kWinCombineDir, kCombineDirSize);
  }

  CkptState ck;
  ckpt_init(ck, ctx, corpus_bytes, job.tasks.size(), rec ? &rec->meta : nullptr);

  // Rendezvous guard, held until this worker's run is handed to its merge
  // partner (rank 0: until the result is published).
  ep.lock(r, kWinCombine, LockKind::exclusive);
  // Epoch covering every put into and read from the worker's own buckets.
  ep.lock(r, kWinKv, LockKind::shared);

  if (r == 0) job.t0 = std::chrono::steady_clock::now();
  ep.barrier();  // first of exactly two

  auto finalize = [&](Bytes fin) {
    if (r == 0) {
      job.result = std::move(fin);
      job.t_result = job.now();
    }
    publish_status(ctx, kStatusDone);
    ctx.tl().done = job.now();
    if (ck.enabled) {
      uint64_t fd = ep.atomic_fetch(r, kWinCombineDir, kRunDispOff);
      uint64_t fl = ep.atomic_fetch(r, kWinCombineDir, kRunLenOff);
      ckpt_mark_done(ck, ctx, fd, fl);
    }
    ep.unlock(r, kWinKv);
    ep.barrier();  // second
  };

  if (plan.floor == ResumeFloor::done) {
    // Nothing to recompute; rank 0 re-emits the persisted result.
    auto& tl = ctx.tl();
    tl.map_start = tl.map_end = tl.reduce_start = tl.reduce_end = tl.combine_start = job.now();
    Bytes fin;
    if (r == 0 && rec->meta.final_len) {
      fin.resize(rec->meta.final_len);
      ep.get_chunked(r, kWinCombine, rec->meta.final_disp, rec->meta.final_len, cfg.chunk_size,
                     fin.data());
    }
    publish_run(ctx, rec->meta.final_disp, rec->meta.final_len);
    ep.unlock(r, kWinCombine);
    tl.combine_end = job.now();
    finalize(std::move(fin));
    return;
  }

  if (plan.floor == ResumeFloor::combine) {
    // Every worker persisted its level-0 run; only the merge tree reruns.
    auto& tl = ctx.tl();
    tl.map_start = tl.map_end = tl.reduce_start = tl.reduce_end = job.now();
    publish_status(ctx, kStatusCombine);
    tl.combine_start = job.now();
    Bytes run0(rec->meta.run0_len);
    if (rec->meta.run0_len)
      ep.get_chunked(r, kWinCombine, rec->meta.run0_disp, rec->meta.run0_len, cfg.chunk_size,
                     run0.data());
    Bytes fin = combine_tree(ctx, std::move(run0), rec->meta.run0_disp, true);
    tl.combine_end = job.now();
    finalize(std::move(fin));
    return;
  }

  // Records whose target sealed before a pre-crash drain still belong to
  // this worker; they rejoin the table and flow through the normal path.
  if (rec && !rec->meta.strays.empty()) fold_records(ctx, rec->meta.strays);

  publish_status(ctx, kStatusMap);
  ctx.tl().map_start = job.now();
  std::vector<TaskDescriptor> mine;
  for (uint64_t i = static_cast<uint64_t>(r); i < job.tasks.size(); i += static_cast<uint64_t>(P))
    if (!rec || !rec->meta.task_bit(i)) mine.push_back(job.tasks[i]);
  {
    PrefetchReader reader(job.file, cfg.debug.read_delay_ms);
    if (!mine.empty()) reader.request(mine.front());
    for (size_t k = 0; k < mine.size(); k++) {
      TaskRead tr = reader.wait();
      // Keep exactly one read in flight behind the current task's compute.
      if (k + 1 < mine.size()) reader.request(mine[k + 1]);
      map_task(ctx, tr);
      ckpt_mark_task(ck, ctx, tr.desc.index);
      if (cfg.redundant_lock_opt) cycle_own_locks(ctx);
      ep.check_abort();
    }
  }
  ctx.tl().map_end = job.now();

  publish_status(ctx, kStatusReduce);
  ctx.tl().reduce_start = job.now();
  fold_chains(ctx);
  Bytes run0;
  ctx.table.sort_into(run0);
  ctx.table.clear();
  uint64_t run0_disp = write_run(ctx, run0);
  ckpt_mark_reduce(ck, ctx, run0_disp, run0.size());
  if (cfg.redundant_lock_opt) cycle_own_locks(ctx);
  ctx.tl().reduce_end = job.now();

  publish_status(ctx, kStatusCombine);
  ctx.tl().combine_start = job.now();
  Bytes fin = combine_tree(ctx, std::move(run0), run0_disp, true);
  ctx.tl().combine_end = job.now();
  finalize(std::move(fin));
}

}  // namespace

JobSummary run_one_sided(const JobConfig& cfg) {
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

  ResumePlan plan;
  if (cfg.checkpoint.enabled)
    plan = plan_resume(cfg, file.size(), job.task_size, job.tasks.size(), cfg.num_workers);

  Fabric fab(cfg.num_workers);
  JobSummary s = run_workers(job, fab,
                             [&](WorkerCtx& ctx) { one_sided_worker(ctx, plan, file.size()); });
  s.engine = EngineKind::one_sided;
  s.resumed = plan.floor != ResumeFloor::cold;
  return s;
}

}  // namespace osmr
