#pragma once

#include <string>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"

namespace osmr {

enum class EngineKind { one_sided, two_sided };

const char* engine_name(EngineKind e);

// Window ids, fixed across both engines so checkpoint images and tooling can
// name them. The two-sided engine uses the extra coordination windows.
inline constexpr int kWinStatus = 0;      // one status word
inline constexpr int kWinKv = 1;          // bucket payload regions
inline constexpr int kWinCombine = 2;     // sorted runs
inline constexpr int kWinKvDir = 3;       // per-target bucket chain directory
inline constexpr int kWinCombineDir = 4;  // published run {disp, len, ready}
inline constexpr int kWinTask = 5;        // two-sided: master-written task slot
inline constexpr int kWinCounts = 6;      // two-sided: per-target send byte counts
inline constexpr int kWinExchange = 7;    // two-sided: landing zone for pushed records
inline constexpr int kWinExchangeDir = 8; // two-sided: landing zone displacement

// Worker status words, monotically increasing per worker.
inline constexpr uint64_t kStatusMap = 1;
inline constexpr uint64_t kStatusReduce = 2;
inline constexpr uint64_t kStatusCombine = 3;
inline constexpr uint64_t kStatusDone = 4;

// Published-run slot layout in the combine directory window.
inline constexpr uint64_t kRunDispOff = 0;
inline constexpr uint64_t kRunLenOff = 8;
inline constexpr uint64_t kRunReadyOff = 16;  // two-sided rendezvous flag
inline constexpr uint64_t kCombineDirSize = 24;

struct CheckpointConfig {
  bool enabled = false;
  std::string dir;
  bool resume = false;
  // Fault injection: worker `kill_worker` raises Err::killed right after its
  // n-th completed task of this run has been persisted.
  int kill_worker = -1;
  uint64_t kill_after_tasks = 0;
};

struct DebugConfig {
  uint32_t read_delay_ms = 0;   // extra latency per task read, in the reader
  uint32_t map_delay_ms = 0;    // extra compute per map invocation
  bool validate_runs = false;   // re-scan runs for strict key order
};

struct JobConfig {
  std::string corpus_path;
  std::string usecase = "wordcount";
  EngineKind engine = EngineKind::one_sided;
  int num_workers = 1;
  // Zero means auto: scaled from the corpus size at job start.
  uint64_t task_size = 0;
  uint64_t chunk_size = 1ull << 20;
  uint64_t bucket_size = 0;
  uint64_t spill_bytes = 64ull << 20;  // local table drain threshold
  bool redundant_lock_opt = false;
  SkewProfile skew;
  CheckpointConfig checkpoint;
  DebugConfig debug;
};

// Seconds since the post-initialization barrier; -1 until reached.
struct WorkerTimeline {
  double map_start = -1, map_end = -1;
  double reduce_start = -1, reduce_end = -1;
  double combine_start = -1, combine_end = -1;
  double done = -1;
};

struct JobSummary {
  EngineKind engine = EngineKind::one_sided;
  int num_workers = 0;
  uint64_t corpus_bytes = 0;
  uint64_t task_size = 0;
  uint64_t chunk_size = 0;
  uint64_t bucket_size = 0;
  uint64_t total_tasks = 0;

  double t_map = 0;      // latest map_end
  double t_reduce = 0;   // latest reduce_end
  double t_combine = 0;  // latest combine_end
  double t_total = 0;    // result emission time on rank 0
  std::vector<WorkerTimeline> timelines;

  Bytes result;  // rank 0's top-level run: sorted encoded records
  uint64_t result_records = 0;
  uint64_t result_digest = 0;

  uint64_t barrier_episodes = 0;
  uint64_t lock_acquires = 0;
  uint64_t transfers = 0;
  uint64_t put_bytes = 0;
  uint64_t get_bytes = 0;

  bool resumed = false;
  bool peak_mem_known = false;
  uint64_t peak_mem_bytes = 0;  // filled by the caller's sampler, not the engines
};

// Task-size / bucket-size resolution for the auto (zero) settings.
uint64_t resolve_task_size(uint64_t requested, uint64_t corpus_bytes, int num_workers);
uint64_t resolve_bucket_size(uint64_t requested, uint64_t corpus_bytes, int num_workers);

}  // namespace osmr
