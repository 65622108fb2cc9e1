// Command-line driver for the one-sided mapreduce runtime. Talks to the
// runtime exclusively through the public C surface.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 verification
// failure, 3 engine failure.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "osmr.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerify = 2;
constexpr int kExitEngine = 3;

int exit_code_for(osmr_status s) {
  switch (s) {
    case OSMR_OK: return kExitOk;
    case OSMR_ERR_USAGE:
    case OSMR_ERR_CONFIG: return kExitUsage;
    case OSMR_ERR_VERIFY: return kExitVerify;
    default: return kExitEngine;
  }
}

int complain(osmr_status s, const char* what) {
  std::fprintf(stderr, "osmr: %s: %s\n", what, osmr_last_error());
  return exit_code_for(s);
}

// Accepts plain byte counts and binary suffixes: 64KiB, 64k, 1MiB, 2G.
bool parse_size(const std::string& text, uint64_t& out) {
  if (text.empty()) return false;
  size_t i = 0;
  uint64_t v = 0;
  while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
    v = v * 10 + static_cast<uint64_t>(text[i] - '0');
    i++;
  }
  if (i == 0) return false;
  std::string suffix = text.substr(i);
  for (auto& c : suffix) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  uint64_t mult = 1;
  if (suffix.empty())
    mult = 1;
  else if (suffix == "k" || suffix == "kib")
    mult = 1ull << 10;
  else if (suffix == "m" || suffix == "mib")
    mult = 1ull << 20;
  else if (suffix == "g" || suffix == "gib")
    mult = 1ull << 30;
  else
    return false;
  out = v * mult;
  return true;
}

uint64_t size_option(const std::string& text, const char* name) {
  uint64_t v = 0;
  if (!parse_size(text, v)) {
    std::fprintf(stderr, "osmr: %s: cannot parse size '%s'\n", name, text.c_str());
    std::exit(kExitUsage);
  }
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= s.size()) {
    size_t comma = s.find(',', start);
    if (comma == std::string::npos) comma = s.size();
    if (comma > start) out.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

struct JobHandle {
  osmr_job* p = osmr_job_new();
  ~JobHandle() { osmr_job_free(p); }
};

struct RunSettings {
  std::string corpus;
  std::string engine = "1s";
  int workers = 1;
  uint64_t task_size = 0;
  uint64_t chunk_size = 0;
  uint64_t bucket_size = 0;
  std::string skew = "none";
  std::string checkpoint_dir;
  bool resume = false;
  int kill_worker = -1;
  uint64_t kill_tasks = 0;
  int reps = 1;
  std::string csv_path;
  std::string result_csv;
  std::string verify_oracle;
  bool quiet = false;
};

struct RepStats {
  osmr_job_stats s{};
};

void csv_header_if_needed(FILE* f) {
  long pos = std::ftell(f);
  if (pos == 0)
    std::fprintf(f,
                 "engine,workers,corpus_bytes,task_size,chunk_size,skew,checkpoint,rep,"
                 "t_map_s,t_reduce_s,t_combine_s,t_total_s,peak_mem_bytes,result_digest\n");
}

void csv_row(FILE* f, const RunSettings& rs, const osmr_job_stats& st, const std::string& rep,
             const char* t_map, const char* t_reduce, const char* t_combine, const char* t_total,
             const std::string& peak, const std::string& digest) {
  std::fprintf(f, "%s,%d,%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%s,%d,%s,%s,%s,%s,%s,%s,%s\n",
               rs.engine.c_str(), st.num_workers, st.corpus_bytes, st.task_size, st.chunk_size,
               rs.skew.c_str(), rs.checkpoint_dir.empty() ? 0 : 1, rep.c_str(), t_map, t_reduce,
               t_combine, t_total, peak.c_str(), digest.c_str());
}

std::string fmt_secs(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string fmt_digest(uint64_t d) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, d);
  return buf;
}

int run_series(const RunSettings& rs) {
  FILE* csv = nullptr;
  if (!rs.csv_path.empty()) {
    csv = std::fopen(rs.csv_path.c_str(), "a");
    if (!csv) {
      std::fprintf(stderr, "osmr: cannot open %s\n", rs.csv_path.c_str());
      return kExitUsage;
    }
    csv_header_if_needed(csv);
  }
  std::vector<osmr_job_stats> reps;
  int rc = kExitOk;
  for (int rep = 1; rep <= rs.reps && rc == kExitOk; rep++) {
    JobHandle job;
    osmr_status s = OSMR_OK;
    auto step = [&](osmr_status v, const char* what) {
      if (s == OSMR_OK && v != OSMR_OK) {
        rc = complain(v, what);
        s = v;
      }
    };
    step(osmr_job_set_corpus(job.p, rs.corpus.c_str()), "corpus");
    step(osmr_job_set_engine(job.p, rs.engine.c_str()), "engine");
    step(osmr_job_set_workers(job.p, rs.workers), "workers");
    step(osmr_job_set_sizes(job.p, rs.task_size, rs.chunk_size, rs.bucket_size), "sizes");
    step(osmr_job_set_skew(job.p, rs.skew.c_str()), "skew");
    if (!rs.checkpoint_dir.empty())
      step(osmr_job_set_checkpoint(job.p, rs.checkpoint_dir.c_str(), rs.resume ? 1 : 0),
           "checkpoint");
    if (rs.kill_worker >= 0)
      step(osmr_job_set_kill_after(job.p, rs.kill_worker, rs.kill_tasks), "kill-after");
    if (s != OSMR_OK) break;
    if ((s = osmr_job_run(job.p)) != OSMR_OK) {
      rc = complain(s, "run");
      break;
    }
    osmr_job_stats st{};
    if ((s = osmr_job_stats_get(job.p, &st)) != OSMR_OK) {
      rc = complain(s, "stats");
      break;
    }
    reps.push_back(st);
    if (!rs.quiet)
      std::printf("engine=%s workers=%d rep=%d t_total=%.6fs records=%" PRIu64 " digest=%s%s\n",
                  rs.engine.c_str(), st.num_workers, rep, st.t_total_s, st.result_records,
                  fmt_digest(st.result_digest).c_str(), st.resumed ? " (resumed)" : "");
    if (csv) {
      std::string peak = st.peak_mem_known ? std::to_string(st.peak_mem_bytes) : "";
      csv_row(*&csv, rs, st, std::to_string(rep), fmt_secs(st.t_map_s).c_str(),
              fmt_secs(st.t_reduce_s).c_str(), fmt_secs(st.t_combine_s).c_str(),
              fmt_secs(st.t_total_s).c_str(), peak, fmt_digest(st.result_digest));
    }
    if (!rs.result_csv.empty() && rep == 1) {
      if ((s = osmr_job_write_result_csv(job.p, rs.result_csv.c_str())) != OSMR_OK)
        rc = complain(s, "result-csv");
    }
    if (rc == kExitOk && !rs.verify_oracle.empty()) {
      s = osmr_job_verify(job.p, rs.verify_oracle.c_str());
      if (s == OSMR_ERR_VERIFY) {
        std::fprintf(stderr, "osmr: verification failed: %s\n", osmr_last_error());
        rc = kExitVerify;
      } else if (s != OSMR_OK) {
        rc = complain(s, "verify");
      } else if (!rs.quiet) {
        std::printf("verification ok (%" PRIu64 " records)\n", st.result_records);
      }
    }
  }
  if (csv && rc == kExitOk && rs.reps > 1 && !reps.empty()) {
    // Summary rows: mean and sample standard deviation of the timings.
    auto agg = [&](auto pick) {
      double mean = 0, var = 0;
      for (const auto& st : reps) mean += pick(st);
      mean /= static_cast<double>(reps.size());
      for (const auto& st : reps) {
        double d = pick(st) - mean;
        var += d * d;
      }
      var = reps.size() > 1 ? var / static_cast<double>(reps.size() - 1) : 0;
      return std::make_pair(mean, std::sqrt(var));
    };
    auto [m_map, s_map] = agg([](const osmr_job_stats& s) { return s.t_map_s; });
    auto [m_red, s_red] = agg([](const osmr_job_stats& s) { return s.t_reduce_s; });
    auto [m_com, s_com] = agg([](const osmr_job_stats& s) { return s.t_combine_s; });
    auto [m_tot, s_tot] = agg([](const osmr_job_stats& s) { return s.t_total_s; });
    bool same_digest = true;
    for (const auto& st : reps) same_digest &= st.result_digest == reps[0].result_digest;
    std::string digest = same_digest ? fmt_digest(reps[0].result_digest) : "";
    csv_row(csv, rs, reps[0], "mean", fmt_secs(m_map).c_str(), fmt_secs(m_red).c_str(),
            fmt_secs(m_com).c_str(), fmt_secs(m_tot).c_str(), "", digest);
    csv_row(csv, rs, reps[0], "sigma", fmt_secs(s_map).c_str(), fmt_secs(s_red).c_str(),
            fmt_secs(s_com).c_str(), fmt_secs(s_tot).c_str(), "", "");
  }
  if (csv) std::fclose(csv);
  return rc;
}

int cmd_gen(const std::string& out, const std::string& oracle, const std::string& size,
            uint64_t vocab, double zipf, uint64_t seed, uint32_t word_min, uint32_t word_max) {
  osmr_corpus_spec spec{};
  spec.size_bytes = size_option(size, "--size");
  spec.vocab_size = vocab;
  spec.zipf_s = zipf;
  spec.seed = seed;
  spec.word_min = word_min;
  spec.word_max = word_max;
  osmr_corpus_report rep{};
  osmr_status s = osmr_generate_corpus(&spec, out.c_str(), oracle.c_str(), &rep);
  if (s != OSMR_OK) return complain(s, "gen");
  std::printf("corpus_bytes=%" PRIu64 " tokens=%" PRIu64 " distinct=%" PRIu64 " oracle_digest=%s\n",
              rep.corpus_bytes, rep.token_count, rep.distinct_words,
              fmt_digest(rep.oracle_digest).c_str());
  return kExitOk;
}

int cmd_verify_csv(const std::string& result_path, const std::string& oracle_path) {
  // Both files are sorted "word,count" rows; equality is exact.
  FILE* a = std::fopen(result_path.c_str(), "rb");
  if (!a) {
    std::fprintf(stderr, "osmr: cannot open %s\n", result_path.c_str());
    return kExitUsage;
  }
  FILE* b = std::fopen(oracle_path.c_str(), "rb");
  if (!b) {
    std::fclose(a);
    std::fprintf(stderr, "osmr: cannot open %s\n", oracle_path.c_str());
    return kExitUsage;
  }
  char la[4096], lb[4096];
  uint64_t row = 0;
  int rc = kExitOk;
  for (;;) {
    char* ra = std::fgets(la, sizeof(la), a);
    char* rb = std::fgets(lb, sizeof(lb), b);
    if (!ra && !rb) break;
    row++;
    if (!ra || !rb || std::strcmp(la, lb) != 0) {
      std::fprintf(stderr, "verification failed at row %" PRIu64 "\n", row);
      rc = kExitVerify;
      break;
    }
  }
  std::fclose(a);
  std::fclose(b);
  if (rc == kExitOk) std::printf("verification ok (%" PRIu64 " rows)\n", row);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-sided mapreduce runtime"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a corpus and its oracle csv");
  std::string g_out, g_oracle, g_size;
  uint64_t g_vocab = 200000, g_seed = 1;
  double g_zipf = 0;
  uint32_t g_wmin = 0, g_wmax = 0;
  gen->add_option("--out", g_out, "corpus path")->required();
  gen->add_option("--oracle", g_oracle, "oracle csv path")->required();
  gen->add_option("--size", g_size, "target corpus size, e.g. 64MiB")->required();
  gen->add_option("--vocab", g_vocab, "vocabulary size");
  gen->add_option("--zipf", g_zipf, "zipf exponent; 0 = uniform");
  gen->add_option("--seed", g_seed, "rng seed");
  gen->add_option("--word-min", g_wmin, "minimum word length");
  gen->add_option("--word-max", g_wmax, "maximum word length");

  // run
  auto* run = app.add_subcommand("run", "run one configuration");
  RunSettings rs;
  std::string r_task = "0", r_chunk = "0", r_bucket = "0", r_kill;
  run->add_option("--corpus", rs.corpus, "corpus path")->required();
  run->add_option("--engine", rs.engine, "1s or 2s");
  run->add_option("--workers", rs.workers, "worker count");
  run->add_option("--task-size", r_task, "map task size (0 = auto)");
  run->add_option("--chunk-size", r_chunk, "transfer chunk cap (0 = default)");
  run->add_option("--bucket-size", r_bucket, "initial bucket capacity (0 = auto)");
  run->add_option("--skew", rs.skew, "none or worker<N>x<K>");
  run->add_option("--checkpoint-dir", rs.checkpoint_dir, "enable checkpointing into this directory");
  run->add_flag("--resume", rs.resume, "resume from the checkpoint directory");
  run->add_option("--kill-after", r_kill, "fault injection W:N, kill worker W after N tasks");
  run->add_option("--reps", rs.reps, "repetitions");
  run->add_option("--csv", rs.csv_path, "append measurement rows to this csv");
  run->add_option("--result-csv", rs.result_csv, "write the result as word,count rows");
  run->add_option("--verify", rs.verify_oracle, "compare the result against this oracle csv");
  run->add_flag("--quiet", rs.quiet, "suppress progress output");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a configuration matrix");
  std::string s_corpus, s_engines = "1s,2s", s_workers = "1,2,4,8", s_chunks = "1MiB",
              s_skews = "none", s_csv, s_verify, s_task = "0", s_bucket = "0";
  int s_reps = 1;
  sweep->add_option("--corpus", s_corpus, "corpus path")->required();
  sweep->add_option("--engines", s_engines, "comma list of engines");
  sweep->add_option("--workers", s_workers, "comma list of worker counts");
  sweep->add_option("--chunk-sizes", s_chunks, "comma list of chunk caps");
  sweep->add_option("--skews", s_skews, "comma list of skew profiles");
  sweep->add_option("--task-size", s_task, "map task size (0 = auto)");
  sweep->add_option("--bucket-size", s_bucket, "initial bucket capacity (0 = auto)");
  sweep->add_option("--reps", s_reps, "repetitions per point");
  sweep->add_option("--csv", s_csv, "append measurement rows to this csv")->required();
  sweep->add_option("--verify", s_verify, "verify every run against this oracle csv");

  // verify
  auto* verify = app.add_subcommand("verify", "compare two word,count csv files");
  std::string v_result, v_oracle;
  verify->add_option("--result", v_result, "result csv")->required();
  verify->add_option("--oracle", v_oracle, "oracle csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (gen->parsed())
    return cmd_gen(g_out, g_oracle, g_size, g_vocab, g_zipf, g_seed, g_wmin, g_wmax);

  if (run->parsed()) {
    rs.task_size = size_option(r_task, "--task-size");
    rs.chunk_size = size_option(r_chunk, "--chunk-size");
    rs.bucket_size = size_option(r_bucket, "--bucket-size");
    if (!r_kill.empty()) {
      size_t colon = r_kill.find(':');
      if (colon == std::string::npos) {
        std::fprintf(stderr, "osmr: --kill-after expects W:N\n");
        return kExitUsage;
      }
      rs.kill_worker = std::atoi(r_kill.substr(0, colon).c_str());
      rs.kill_tasks = std::strtoull(r_kill.c_str() + colon + 1, nullptr, 10);
    }
    return run_series(rs);
  }

  if (sweep->parsed()) {
    for (const auto& engine : split_list(s_engines))
      for (const auto& workers : split_list(s_workers))
        for (const auto& chunk : split_list(s_chunks))
          for (const auto& skew : split_list(s_skews)) {
            RunSettings one;
            one.corpus = s_corpus;
            one.engine = engine;
            one.workers = std::atoi(workers.c_str());
            one.task_size = size_option(s_task, "--task-size");
            one.chunk_size = size_option(chunk, "--chunk-sizes");
            one.bucket_size = size_option(s_bucket, "--bucket-size");
            one.skew = skew;
            one.reps = s_reps;
            one.csv_path = s_csv;
            one.verify_oracle = s_verify;
            one.quiet = false;
            int rc = run_series(one);
            if (rc != kExitOk) return rc;
          }
    return kExitOk;
  }

  if (verify->parsed()) return cmd_verify_csv(v_result, v_oracle);
  return kExitUsage;
}
