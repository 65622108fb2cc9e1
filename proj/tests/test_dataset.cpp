#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dataset.hpp"
#include "runner.hpp"

using namespace osmr;

namespace {

Bytes slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct TmpDir {
  std::string path;
  TmpDir() {
    char tmpl[] = "/tmp/osmr_ds_XXXXXX";
    path = mkdtemp(tmpl);
  }
  ~TmpDir() { std::filesystem::remove_all(path); }
  std::string file(const char* name) const { return path + "/" + name; }
};

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  TmpDir tmp;
  CorpusSpec spec;
  spec.size_bytes = 1 << 20;
  spec.vocab_size = 2000;
  spec.zipf_s = 1.2;
  spec.seed = 99;

  auto r1 = generate_corpus(spec, tmp.file("a.bin"), tmp.file("a.csv"));
  auto r2 = generate_corpus(spec, tmp.file("b.bin"), tmp.file("b.csv"));
  CHECK(r1.corpus_bytes == r2.corpus_bytes);
  CHECK(r1.oracle_digest == r2.oracle_digest);
  CHECK(slurp(tmp.file("a.bin")) == slurp(tmp.file("b.bin")));
  CHECK(slurp(tmp.file("a.csv")) == slurp(tmp.file("b.csv")));

  spec.seed = 100;
  auto r3 = generate_corpus(spec, tmp.file("c.bin"), tmp.file("c.csv"));
  CHECK(r3.oracle_digest != r1.oracle_digest);
  CHECK(slurp(tmp.file("c.bin")) != slurp(tmp.file("a.bin")));

  CHECK(r1.corpus_bytes == std::filesystem::file_size(tmp.file("a.bin")));
  // Whole words only: the tail may fall short of the request by one word.
  CHECK(r1.corpus_bytes <= (1 << 20));
  CHECK(r1.corpus_bytes >= (1 << 20) - spec.word_max - 1);
}

TEST_CASE("oracle matches an independent recount") {
  TmpDir tmp;
  for (double zipf : {0.0, 1.2}) {
    CorpusSpec spec;
    spec.size_bytes = 1 << 20;
    spec.vocab_size = 3000;
    spec.zipf_s = zipf;
    spec.seed = 7;
    auto rep = generate_corpus(spec, tmp.file("c.bin"), tmp.file("c.csv"));

    // Recount the corpus with a from-scratch tokenizer and compare rows.
    Bytes counted = reference_result(tmp.file("c.bin"));
    VerifyReport vr = verify_against_oracle(ByteView(counted), tmp.file("c.csv"));
    CHECK(vr.ok);
    CHECK(vr.actual_records == rep.distinct_words);

    // The published digest is the digest of the verified byte stream.
    CHECK(rep.oracle_digest == fnv1a64(counted.data(), counted.size()));

    // Token bookkeeping agrees with the oracle column sums.
    uint64_t csv_total = 0, rows = 0;
    std::ifstream in(tmp.file("c.csv"));
    std::string line;
    while (std::getline(in, line)) {
      auto comma = line.rfind(',');
      REQUIRE(comma != std::string::npos);
      csv_total += std::stoull(line.substr(comma + 1));
      rows++;
    }
    CHECK(csv_total == rep.token_count);
    CHECK(rows == rep.distinct_words);
  }
}

TEST_CASE("zipf skews the frequency mass") {
  TmpDir tmp;
  CorpusSpec spec;
  spec.size_bytes = 1 << 20;
  spec.vocab_size = 5000;
  spec.seed = 11;

  spec.zipf_s = 0.0;
  generate_corpus(spec, tmp.file("u.bin"), tmp.file("u.csv"));
  spec.zipf_s = 1.2;
  generate_corpus(spec, tmp.file("z.bin"), tmp.file("z.csv"));

  auto max_count = [&](const std::string& csv) {
    uint64_t best = 0, total = 0;
    std::ifstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
      uint64_t n = std::stoull(line.substr(line.rfind(',') + 1));
      best = std::max(best, n);
      total += n;
    }
    return std::pair(best, total);
  };
  auto [u_best, u_total] = max_count(tmp.file("u.csv"));
  auto [z_best, z_total] = max_count(tmp.file("z.csv"));
  // Uniform: the hottest word is a sliver. Zipf 1.2: a large bite.
  CHECK(static_cast<double>(u_best) / u_total < 0.01);
  CHECK(static_cast<double>(z_best) / z_total > 0.05);
}

TEST_CASE("oracle verification flags divergence") {
  TmpDir tmp;
  CorpusSpec spec;
  spec.size_bytes = 64 << 10;
  spec.vocab_size = 500;
  spec.seed = 3;
  generate_corpus(spec, tmp.file("c.bin"), tmp.file("c.csv"));
  Bytes counted = reference_result(tmp.file("c.bin"));

  // Perturb one count in the oracle; verification must notice.
  Bytes csv = slurp(tmp.file("c.csv"));
  auto comma = std::find(csv.begin(), csv.end(), ',');
  REQUIRE(comma != csv.end());
  *(comma + 1) = (*(comma + 1) == '1') ? '2' : '1';
  std::ofstream out(tmp.file("bad.csv"), std::ios::binary);
  out.write(reinterpret_cast<const char*>(csv.data()), static_cast<std::streamsize>(csv.size()));
  out.close();

  VerifyReport vr = verify_against_oracle(ByteView(counted), tmp.file("bad.csv"));
  CHECK(!vr.ok);
  CHECK(!vr.detail.empty());
}
