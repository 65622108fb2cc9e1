#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "osmr.h"

namespace {

struct TmpDir {
  std::string path;
  TmpDir() {
    char tmpl[] = "/tmp/osmr_ca_XXXXXX";
    path = mkdtemp(tmpl);
  }
  ~TmpDir() { std::filesystem::remove_all(path); }
  std::string file(const char* name) const { return path + "/" + name; }
};

}  // namespace

TEST_CASE("c api end to end") {
  TmpDir tmp;
  osmr_corpus_spec spec{};
  spec.size_bytes = 128 << 10;
  spec.vocab_size = 800;
  spec.zipf_s = 1.2;
  spec.seed = 5;
  osmr_corpus_report rep{};
  REQUIRE(osmr_generate_corpus(&spec, tmp.file("c.bin").c_str(), tmp.file("c.csv").c_str(),
                               &rep) == OSMR_OK);
  // Whole words only: the request is an upper bound, short by at most a word.
  CHECK(rep.corpus_bytes <= (128u << 10));
  CHECK(rep.corpus_bytes >= (128u << 10) - 13);
  CHECK(rep.token_count > 0);
  CHECK(rep.distinct_words > 0);
  CHECK(rep.oracle_digest != 0);

  osmr_job* job = osmr_job_new();
  REQUIRE(job != nullptr);
  CHECK(osmr_job_set_corpus(job, tmp.file("c.bin").c_str()) == OSMR_OK);
  CHECK(osmr_job_set_engine(job, "1s") == OSMR_OK);
  CHECK(osmr_job_set_workers(job, 3) == OSMR_OK);
  CHECK(osmr_job_set_sizes(job, 16 << 10, 64 << 10, 4 << 10) == OSMR_OK);
  CHECK(osmr_job_set_skew(job, "none") == OSMR_OK);
  REQUIRE(osmr_job_run(job) == OSMR_OK);

  osmr_job_stats st{};
  REQUIRE(osmr_job_stats_get(job, &st) == OSMR_OK);
  CHECK(st.num_workers == 3);
  CHECK(st.corpus_bytes == rep.corpus_bytes);
  CHECK(st.result_records == rep.distinct_words);
  CHECK(st.result_digest == rep.oracle_digest);
  CHECK(st.t_total_s > 0);
  CHECK(st.barrier_episodes == 2);
  CHECK(!st.resumed);

  double stamps[7];
  REQUIRE(osmr_job_timeline(job, 0, stamps) == OSMR_OK);
  CHECK(stamps[0] >= 0);                  // map start
  CHECK(stamps[6] >= stamps[0]);          // done after start
  CHECK(osmr_job_timeline(job, 3, stamps) == OSMR_ERR_USAGE);

  CHECK(osmr_job_verify(job, tmp.file("c.csv").c_str()) == OSMR_OK);

  REQUIRE(osmr_job_write_result_csv(job, tmp.file("out.csv").c_str()) == OSMR_OK);
  // The emitted rows are byte-identical to the oracle.
  auto slurp = [](const std::string& p) {
    FILE* f = fopen(p.c_str(), "rb");
    REQUIRE(f);
    std::string s;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof(buf), f)) > 0) s.append(buf, n);
    fclose(f);
    return s;
  };
  CHECK(slurp(tmp.file("out.csv")) == slurp(tmp.file("c.csv")));

  // A wrong oracle is a verification error with a message.
  REQUIRE(osmr_job_write_result_csv(job, tmp.file("bad.csv").c_str()) == OSMR_OK);
  {
    FILE* f = fopen(tmp.file("bad.csv").c_str(), "rb+");
    REQUIRE(f);
    char c0 = 0;
    REQUIRE(fread(&c0, 1, 1, f) == 1);
    fseek(f, 0, SEEK_SET);
    c0 = c0 == 'z' ? 'y' : 'z';
    fwrite(&c0, 1, 1, f);
    fclose(f);
  }
  CHECK(osmr_job_verify(job, tmp.file("bad.csv").c_str()) == OSMR_ERR_VERIFY);
  CHECK(std::strlen(osmr_last_error()) > 0);

  osmr_job_free(job);
}

TEST_CASE("c api argument validation") {
  CHECK(osmr_generate_corpus(nullptr, "x", "y", nullptr) == OSMR_ERR_USAGE);
  CHECK(osmr_job_set_corpus(nullptr, "p") == OSMR_ERR_USAGE);
  CHECK(osmr_job_run(nullptr) == OSMR_ERR_USAGE);

  osmr_job* job = osmr_job_new();
  REQUIRE(job != nullptr);
  CHECK(osmr_job_set_engine(job, "bogus") == OSMR_ERR_USAGE);
  CHECK(std::strlen(osmr_last_error()) > 0);
  CHECK(osmr_job_set_workers(job, 0) == OSMR_ERR_USAGE);
  CHECK(osmr_job_set_skew(job, "workerx") == OSMR_ERR_USAGE);

  osmr_job_stats st{};
  CHECK(osmr_job_stats_get(job, &st) == OSMR_ERR_USAGE);  // no completed run

  // Running with no corpus path is a usage error, not a crash.
  CHECK(osmr_job_run(job) == OSMR_ERR_USAGE);
  osmr_job_free(job);
  osmr_job_free(nullptr);  // must be a no-op
}

TEST_CASE("c api fault injection and resume") {
  TmpDir tmp;
  osmr_corpus_spec spec{};
  spec.size_bytes = 128 << 10;
  spec.vocab_size = 500;
  spec.zipf_s = 0.0;
  spec.seed = 9;
  osmr_corpus_report rep{};
  REQUIRE(osmr_generate_corpus(&spec, tmp.file("c.bin").c_str(), tmp.file("c.csv").c_str(),
                               &rep) == OSMR_OK);

  auto configure = [&](osmr_job* j, int resume) {
    CHECK(osmr_job_set_corpus(j, tmp.file("c.bin").c_str()) == OSMR_OK);
    CHECK(osmr_job_set_engine(j, "1s") == OSMR_OK);
    CHECK(osmr_job_set_workers(j, 2) == OSMR_OK);
    CHECK(osmr_job_set_sizes(j, 8 << 10, 0, 2 << 10) == OSMR_OK);
    CHECK(osmr_job_set_checkpoint(j, tmp.file("ck").c_str(), resume) == OSMR_OK);
  };

  osmr_job* j1 = osmr_job_new();
  configure(j1, 0);
  CHECK(osmr_job_set_kill_after(j1, 1, 2) == OSMR_OK);
  CHECK(osmr_job_run(j1) == OSMR_ERR_KILLED);
  osmr_job_free(j1);

  osmr_job* j2 = osmr_job_new();
  configure(j2, 1);
  REQUIRE(osmr_job_run(j2) == OSMR_OK);
  osmr_job_stats st{};
  REQUIRE(osmr_job_stats_get(j2, &st) == OSMR_OK);
  CHECK(st.resumed);
  CHECK(st.result_digest == rep.oracle_digest);
  CHECK(osmr_job_verify(j2, tmp.file("c.csv").c_str()) == OSMR_OK);
  osmr_job_free(j2);

  // The coupled baseline refuses checkpointing.
  osmr_job* j3 = osmr_job_new();
  configure(j3, 0);
  CHECK(osmr_job_set_engine(j3, "2s") == OSMR_OK);
  CHECK(osmr_job_run(j3) == OSMR_ERR_CONFIG);
  osmr_job_free(j3);
}
