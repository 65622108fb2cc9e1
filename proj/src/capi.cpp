#include "osmr.h"

#include <new>
#include <optional>
#include <string>

#include "dataset.hpp"
#include "job.hpp"
#include "runner.hpp"

using namespace osmr;

struct osmr_job {
  JobConfig cfg;
  std::optional<JobSummary> summary;
};

namespace {

thread_local std::string t_last_error;

osmr_status status_of(Err e) {
  switch (e) {
    case Err::ok: return OSMR_OK;
    case Err::usage: return OSMR_ERR_USAGE;
    case Err::io: return OSMR_ERR_IO;
    case Err::protocol: return OSMR_ERR_PROTOCOL;
    case Err::corruption: return OSMR_ERR_CORRUPTION;
    case Err::resource: return OSMR_ERR_RESOURCE;
    case Err::config: return OSMR_ERR_CONFIG;
    case Err::verify: return OSMR_ERR_VERIFY;
    case Err::killed: return OSMR_ERR_KILLED;
    case Err::abort: return OSMR_ERR_ABORT;
  }
  return OSMR_ERR_ABORT;
}

template <typename Fn>
osmr_status guarded(Fn&& fn) {
  try {
    fn();
    t_last_error.clear();
    return OSMR_OK;
  } catch (const Error& e) {
    t_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return OSMR_ERR_ABORT;
  }
}

osmr_status need(bool ok, const char* msg) {
  if (ok) return OSMR_OK;
  t_last_error = msg;
  return OSMR_ERR_USAGE;
}

}  // namespace

extern "C" {

const char* osmr_last_error(void) { return t_last_error.c_str(); }

osmr_status osmr_generate_corpus(const osmr_corpus_spec* spec, const char* corpus_path,
                                 const char* oracle_csv_path, osmr_corpus_report* report) {
  if (osmr_status s = need(spec && corpus_path && oracle_csv_path, "null argument")) return s;
  return guarded([&] {
    CorpusSpec cs;
    cs.size_bytes = spec->size_bytes;
    cs.vocab_size = spec->vocab_size;
    cs.zipf_s = spec->zipf_s;
    cs.seed = spec->seed;
    if (spec->word_min) cs.word_min = spec->word_min;
    if (spec->word_max) cs.word_max = spec->word_max;
    GenerationReport r = generate_corpus(cs, corpus_path, oracle_csv_path);
    if (report) {
      report->corpus_bytes = r.corpus_bytes;
      report->token_count = r.token_count;
      report->distinct_words = r.distinct_words;
      report->oracle_digest = r.oracle_digest;
    }
  });
}

osmr_job* osmr_job_new(void) { return new (std::nothrow) osmr_job(); }

void osmr_job_free(osmr_job* job) { delete job; }

osmr_status osmr_job_set_corpus(osmr_job* job, const char* path) {
  if (osmr_status s = need(job && path, "null argument")) return s;
  job->cfg.corpus_path = path;
  return OSMR_OK;
}

osmr_status osmr_job_set_engine(osmr_job* job, const char* engine) {
  if (osmr_status s = need(job && engine, "null argument")) return s;
  std::string e = engine;
  if (e == "1s")
    job->cfg.engine = EngineKind::one_sided;
  else if (e == "2s")
    job->cfg.engine = EngineKind::two_sided;
  else
    return need(false, "engine must be 1s or 2s");
  return OSMR_OK;
}

osmr_status osmr_job_set_workers(osmr_job* job, int num_workers) {
  if (osmr_status s = need(job != nullptr, "null argument")) return s;
  if (osmr_status s = need(num_workers >= 1, "num_workers must be at least 1")) return s;
  job->cfg.num_workers = num_workers;
  return OSMR_OK;
}

osmr_status osmr_job_set_sizes(osmr_job* job, uint64_t task_size, uint64_t chunk_size,
                               uint64_t bucket_size) {
  if (osmr_status s = need(job != nullptr, "null argument")) return s;
  job->cfg.task_size = task_size;
  if (chunk_size) job->cfg.chunk_size = chunk_size;
  job->cfg.bucket_size = bucket_size;
  return OSMR_OK;
}

osmr_status osmr_job_set_skew(osmr_job* job, const char* skew) {
  if (osmr_status s = need(job && skew, "null argument")) return s;
  return guarded([&] { parse_skew(skew, job->cfg.skew); });
}

osmr_status osmr_job_set_checkpoint(osmr_job* job, const char* dir, int resume) {
  if (osmr_status s = need(job && dir, "null argument")) return s;
  job->cfg.checkpoint.enabled = true;
  job->cfg.checkpoint.dir = dir;
  job->cfg.checkpoint.resume = resume != 0;
  return OSMR_OK;
}

osmr_status osmr_job_set_kill_after(osmr_job* job, int worker, uint64_t tasks) {
  if (osmr_status s = need(job != nullptr, "null argument")) return s;
  job->cfg.checkpoint.kill_worker = worker;
  job->cfg.checkpoint.kill_after_tasks = tasks;
  return OSMR_OK;
}

osmr_status osmr_job_run(osmr_job* job) {
  if (osmr_status s = need(job != nullptr, "null argument")) return s;
  return guarded([&] { job->summary = run_job(job->cfg); });
}

osmr_status osmr_job_stats_get(const osmr_job* job, osmr_job_stats* out) {
  if (osmr_status s = need(job && out, "null argument")) return s;
  if (osmr_status s = need(job->summary.has_value(), "job has not run")) return s;
  const JobSummary& j = *job->summary;
  *out = osmr_job_stats{};
  out->t_map_s = j.t_map;
  out->t_reduce_s = j.t_reduce;
  out->t_combine_s = j.t_combine;
  out->t_total_s = j.t_total;
  out->result_records = j.result_records;
  out->result_digest = j.result_digest;
  out->barrier_episodes = j.barrier_episodes;
  out->peak_mem_bytes = j.peak_mem_bytes;
  out->peak_mem_known = j.peak_mem_known ? 1 : 0;
  out->num_workers = j.num_workers;
  out->corpus_bytes = j.corpus_bytes;
  out->task_size = j.task_size;
  out->chunk_size = j.chunk_size;
  out->bucket_size = j.bucket_size;
  out->resumed = j.resumed ? 1 : 0;
  return OSMR_OK;
}

osmr_status osmr_job_timeline(const osmr_job* job, int worker, double out_stamps[7]) {
  if (osmr_status s = need(job && out_stamps, "null argument")) return s;
  if (osmr_status s = need(job->summary.has_value(), "job has not run")) return s;
  const auto& tls = job->summary->timelines;
  if (osmr_status s =
          need(worker >= 0 && static_cast<size_t>(worker) < tls.size(), "worker out of range"))
    return s;
  const WorkerTimeline& tl = tls[static_cast<size_t>(worker)];
  out_stamps[0] = tl.map_start;
  out_stamps[1] = tl.map_end;
  out_stamps[2] = tl.reduce_start;
  out_stamps[3] = tl.reduce_end;
  out_stamps[4] = tl.combine_start;
  out_stamps[5] = tl.combine_end;
  out_stamps[6] = tl.done;
  return OSMR_OK;
}

osmr_status osmr_job_write_result_csv(const osmr_job* job, const char* path) {
  if (osmr_status s = need(job && path, "null argument")) return s;
  if (osmr_status s = need(job->summary.has_value(), "job has not run")) return s;
  return guarded([&] { write_result_csv(job->summary->result, path); });
}

osmr_status osmr_job_verify(const osmr_job* job, const char* oracle_csv_path) {
  if (osmr_status s = need(job && oracle_csv_path, "null argument")) return s;
  if (osmr_status s = need(job->summary.has_value(), "job has not run")) return s;
  return guarded([&] {
    VerifyReport rep = verify_against_oracle(job->summary->result, oracle_csv_path);
    if (!rep.ok) fail(Err::verify, rep.detail.empty() ? "result differs from oracle" : rep.detail);
  });
}

}  // extern "C"
