#ifndef OSMR_H
#define OSMR_H

/* One-sided MapReduce runtime, C surface. Handles are opaque; every call
 * returns a status code and leaves a human-readable message for the calling
 * thread retrievable via osmr_last_error(). */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum osmr_status {
  OSMR_OK = 0,
  OSMR_ERR_USAGE = 1,
  OSMR_ERR_IO = 2,
  OSMR_ERR_PROTOCOL = 3,
  OSMR_ERR_CORRUPTION = 4,
  OSMR_ERR_RESOURCE = 5,
  OSMR_ERR_CONFIG = 6,
  OSMR_ERR_VERIFY = 7,
  OSMR_ERR_KILLED = 8,
  OSMR_ERR_ABORT = 9
} osmr_status;

/* Message for the last failing call on this thread; empty string if none. */
const char* osmr_last_error(void);

/* ---- corpus generation ---- */

typedef struct osmr_corpus_spec {
  uint64_t size_bytes;
  uint64_t vocab_size;
  double zipf_s;    /* 0 draws words uniformly */
  uint64_t seed;
  uint32_t word_min; /* 0 keeps the default */
  uint32_t word_max; /* 0 keeps the default */
} osmr_corpus_spec;

typedef struct osmr_corpus_report {
  uint64_t corpus_bytes;
  uint64_t token_count;
  uint64_t distinct_words;
  uint64_t oracle_digest;
} osmr_corpus_report;

/* Writes the corpus and its exact-count oracle csv; report may be NULL. */
osmr_status osmr_generate_corpus(const osmr_corpus_spec* spec, const char* corpus_path,
                                 const char* oracle_csv_path, osmr_corpus_report* report);

/* ---- jobs ---- */

typedef struct osmr_job osmr_job;

osmr_job* osmr_job_new(void);
void osmr_job_free(osmr_job* job);

osmr_status osmr_job_set_corpus(osmr_job* job, const char* path);
/* engine is "1s" (decoupled) or "2s" (coupled baseline) */
osmr_status osmr_job_set_engine(osmr_job* job, const char* engine);
osmr_status osmr_job_set_workers(osmr_job* job, int num_workers);
/* zero keeps a value automatic / at its default */
osmr_status osmr_job_set_sizes(osmr_job* job, uint64_t task_size, uint64_t chunk_size,
                               uint64_t bucket_size);
/* "none" or "worker<N>x<K>": worker N repeats each of its map tasks K times */
osmr_status osmr_job_set_skew(osmr_job* job, const char* skew);
osmr_status osmr_job_set_checkpoint(osmr_job* job, const char* dir, int resume);
/* fault injection: worker raises OSMR_ERR_KILLED after its n-th persisted task */
osmr_status osmr_job_set_kill_after(osmr_job* job, int worker, uint64_t tasks);

osmr_status osmr_job_run(osmr_job* job);

/* ---- results; valid after a successful run ---- */

typedef struct osmr_job_stats {
  double t_map_s;
  double t_reduce_s;
  double t_combine_s;
  double t_total_s;
  uint64_t result_records;
  uint64_t result_digest;
  uint64_t barrier_episodes;
  uint64_t peak_mem_bytes;
  int peak_mem_known;
  int num_workers;
  uint64_t corpus_bytes;
  uint64_t task_size;
  uint64_t chunk_size;
  uint64_t bucket_size;
  int resumed;
} osmr_job_stats;

osmr_status osmr_job_stats_get(const osmr_job* job, osmr_job_stats* out);

/* Per-worker phase stamps, seconds since the init barrier:
 * [0] map start, [1] map end, [2] reduce start, [3] reduce end,
 * [4] combine start, [5] combine end, [6] done. */
osmr_status osmr_job_timeline(const osmr_job* job, int worker, double out_stamps[7]);

osmr_status osmr_job_write_result_csv(const osmr_job* job, const char* path);

/* OSMR_ERR_VERIFY when the result differs from the oracle. */
osmr_status osmr_job_verify(const osmr_job* job, const char* oracle_csv_path);

#ifdef __cplusplus
}
#endif

#endif /* OSMR_H */
