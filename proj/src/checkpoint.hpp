#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "engine_common.hpp"
#include "storage.hpp"

namespace osmr {

// Per-worker recovery metadata, carried in the status-window file. The
// watermarks pin each chain to the owner's last committed task boundary so a
// kv image that ran ahead of the task bitmap can be rolled back instead of
// double-counting re-run tasks.
struct CkptMeta {
  uint32_t num_workers = 0;
  uint32_t rank = 0;
  uint64_t corpus_bytes = 0;
  uint64_t task_size = 0;
  uint64_t total_tasks = 0;
  bool reduce_done = false;
  bool done = false;
  uint64_t run0_disp = 0, run0_len = 0;
  uint64_t final_disp = 0, final_len = 0;
  std::vector<uint8_t> task_done;  // bit per global task index; only own bits set
  std::vector<std::pair<uint64_t, uint64_t>> watermarks;  // per target {chain len, tail committed}
  Bytes strays;  // encoded records whose target sealed before they drained

  bool task_bit(uint64_t i) const {
    return i / 8 < task_done.size() && (task_done[i / 8] >> (i % 8)) & 1;
  }
  void set_task_bit(uint64_t i) {
    if (i / 8 >= task_done.size()) task_done.resize(i / 8 + 1, 0);
    task_done[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
  }
};

Bytes encode_ckpt_meta(const CkptMeta& m);
CkptMeta decode_ckpt_meta(ByteView in);  // Err::corruption on malformed input

std::string ckpt_path(const std::string& dir, int rank, int wid);
const std::vector<int>& ckpt_windows();

enum class ResumeFloor { cold, map, combine, done };

struct RecoveredWorker {
  std::map<int, LoadedImage> images;  // by window id, post-rollback
  CkptMeta meta;
};

struct ResumePlan {
  ResumeFloor floor = ResumeFloor::cold;
  std::vector<RecoveredWorker> workers;  // one per rank when floor != cold
  std::string note;                      // cold-start reason, if any
};

// Loads every worker's window files and decides where the job resumes.
// All-or-nothing: one missing or invalid file cold-starts the whole job.
// A geometry mismatch (worker count, corpus, task size) is a config error.
ResumePlan plan_resume(const JobConfig& cfg, uint64_t corpus_bytes, uint64_t task_size,
                       uint64_t total_tasks, int num_workers);

struct CkptState {
  bool enabled = false;
  CkptMeta meta;
  uint64_t completed_this_run = 0;
};

// Seeds meta (fresh or recovered) and commits an initial image so every file
// carries valid metadata from the start of the run.
void ckpt_init(CkptState& ck, WorkerCtx& ctx, uint64_t corpus_bytes, uint64_t total_tasks,
               const CkptMeta* recovered);

// Persists one completed task: bitmap bit, chain watermarks, strays, then a
// sync of every window with the status file last as the commit point. Honors
// the kill_after fault injection.
void ckpt_mark_task(CkptState& ck, WorkerCtx& ctx, uint64_t task_index);

void ckpt_mark_reduce(CkptState& ck, WorkerCtx& ctx, uint64_t run0_disp, uint64_t run0_len);

void ckpt_mark_done(CkptState& ck, WorkerCtx& ctx, uint64_t final_disp, uint64_t final_len);

}  // namespace osmr
