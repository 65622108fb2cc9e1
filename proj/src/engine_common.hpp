#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "bucket.hpp"
#include "job.hpp"
#include "reduce_table.hpp"
#include "rma.hpp"
#include "usecase.hpp"

namespace osmr {

class FileReader {
 public:
  explicit FileReader(const std::string& path);
  ~FileReader();
  FileReader(const FileReader&) = delete;
  FileReader& operator=(const FileReader&) = delete;

  uint64_t size() const { return size_; }
  void read(uint64_t off, uint64_t len, uint8_t* dst) const;

 private:
  int fd_ = -1;
  uint64_t size_ = 0;
};

// Bytes handed to map: one preceding context byte when the task does not
// start the file, plus a bounded overscan tail so a record straddling the
// nominal end can be finished by the owning task.
inline constexpr uint64_t kTaskOverscan = 64ull << 10;

struct TaskRead {
  TaskDescriptor desc;
  Bytes data;
  uint32_t lead = 0;
  uint64_t nominal = 0;

  TaskInput input() const { return TaskInput{ByteView(data), lead, nominal}; }
};

TaskRead read_task(const FileReader& file, const TaskDescriptor& desc);

// Background reader owning at most one outstanding request, so the engine can
// overlap the next task's read with the current task's compute.
class PrefetchReader {
 public:
  PrefetchReader(const FileReader& file, uint32_t delay_ms);
  ~PrefetchReader();

  void request(const TaskDescriptor& desc);
  bool pending() const { return pending_; }
  TaskRead wait();

 private:
  void loop();

  const FileReader& file_;
  uint32_t delay_ms_;
  bool pending_ = false;  // engine-thread view, enforces the one-request cap

  std::mutex m_;
  std::condition_variable cv_;
  bool has_req_ = false;
  bool has_res_ = false;
  bool stop_ = false;
  TaskDescriptor req_{};
  TaskRead res_;
  std::thread th_;
};

// State shared by all workers of one job.
struct JobContext {
  JobContext(const JobConfig& cfg_, const UseCase& uc_, FileReader& file_)
      : cfg(cfg_), uc(uc_), file(file_) {}

  const JobConfig& cfg;
  const UseCase& uc;
  FileReader& file;
  std::vector<TaskDescriptor> tasks;
  uint64_t task_size = 0;
  uint64_t bucket_size = 0;
  ChainLayout lay{};
  int num_workers = 0;

  // Common clock base: stamped by rank 0 just before the init barrier.
  std::chrono::steady_clock::time_point t0{};

  std::vector<WorkerTimeline> timelines;  // slot per rank, owner-written
  Bytes result;                           // rank 0's final run
  double t_result = 0;

  double now() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

struct WorkerCtx {
  WorkerCtx(JobContext& job_, Endpoint& ep_) : job(job_), ep(ep_), rank(ep_.rank()) {}

  JobContext& job;
  Endpoint& ep;
  int rank;

  ReduceTable table;    // live aggregation state; holds strays after a drain
  ReduceTable scratch;  // imbalance repeats aggregate here and are discarded
  Bytes encode_buf;
  Bytes bucket_buf;

  // One flag per target: set once an append observed the seal (or the target
  // was already reducing); later drains keep those keys local.
  std::vector<uint8_t> target_sealed;
  bool seal_aware = false;  // decoupled engine: check statuses, expect seals

  uint64_t tasks_mapped = 0;
  uint64_t records_appended = 0;
  uint64_t stray_records = 0;

  WorkerTimeline& tl() { return job.timelines[static_cast<size_t>(rank)]; }
  int P() const { return job.num_workers; }
};

void publish_status(WorkerCtx& ctx, uint64_t status);
uint64_t fetch_status(WorkerCtx& ctx, int worker);

// Runs map over one task (including any imbalance repeats), then drains the
// table into the per-target bucket chains. Keys routed to sealed targets stay
// in the table as strays.
void map_task(WorkerCtx& ctx, const TaskRead& tr);

// Flushes every table entry it can; used at spill points and task ends.
void drain_table(WorkerCtx& ctx);

// Seals every emitter's chain for this worker and folds the records into the
// table. Ascending emitter rank; own chain included.
void fold_chains(WorkerCtx& ctx);

// Folds one contiguous span of encoded records into the table.
void fold_records(WorkerCtx& ctx, ByteView span);

// Copies a run into this worker's combine window; returns its displacement.
// Takes a brief exclusive self-epoch unless the caller already holds one.
uint64_t write_run(WorkerCtx& ctx, ByteView run);

void publish_run(WorkerCtx& ctx, uint64_t disp, uint64_t len);

// Reads a partner's published run. The caller handles the rendezvous; this
// takes the partner combine epoch of the given kind around the read.
Bytes fetch_run(WorkerCtx& ctx, int partner, LockKind kind);

// Merge levels above level 0 for this fan-in.
int combine_levels(int num_workers);

// Walks the binomial combine tree from this worker's level-0 run. Returns the
// top-level run on rank 0 and an empty buffer on workers whose run was
// consumed by a partner. `one_sided` selects the rendezvous: release of the
// pre-held own combine lock versus the ready flag.
Bytes combine_tree(WorkerCtx& ctx, Bytes run0, uint64_t run0_disp, bool one_sided);

// Runs `body` on one thread per worker, propagating the first failure to
// every peer through the fabric abort flag, then assembles the measured
// summary. The caller pre-fills job geometry and tags the engine afterwards.
JobSummary run_workers(JobContext& job, Fabric& fab, const std::function<void(WorkerCtx&)>& body);

}  // namespace osmr
