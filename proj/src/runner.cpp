#include "runner.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "codec.hpp"
#include "engines.hpp"

namespace osmr {

namespace {

// Polls resident-set size while a job runs; 20 ms keeps short phases visible.
class RssSampler {
 public:
  RssSampler() : th_([this] { loop(); }) {}
  ~RssSampler() { stop(); }

  void stop() {
    bool expected = false;
    if (!stopped_.compare_exchange_strong(expected, true)) return;
    th_.join();
  }

  bool known() const { return known_; }
  uint64_t peak() const { return peak_; }

 private:
  void loop() {
    long page = ::sysconf(_SC_PAGESIZE);
    while (!stopped_.load(std::memory_order_relaxed)) {
      FILE* f = std::fopen("/proc/self/statm", "r");
      if (f) {
        unsigned long long total = 0, resident = 0;
        if (std::fscanf(f, "%llu %llu", &total, &resident) == 2) {
          uint64_t rss = static_cast<uint64_t>(resident) * static_cast<uint64_t>(page);
          if (rss > peak_) peak_ = rss;
          known_ = true;
        }
        std::fclose(f);
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }

  std::atomic<bool> stopped_{false};
  std::atomic<uint64_t> peak_{0};
  std::atomic<bool> known_{false};
  std::thread th_;
};

void validate_config(const JobConfig& cfg) {
  if (cfg.corpus_path.empty()) fail(Err::usage, "no corpus path");
  if (cfg.num_workers < 1 || cfg.num_workers > 1024)
    fail(Err::usage, "num_workers out of range");
  if (cfg.chunk_size == 0) fail(Err::usage, "chunk_size must be positive");
  if (cfg.checkpoint.enabled && cfg.checkpoint.dir.empty())
    fail(Err::usage, "checkpointing needs a directory");
}

}  // namespace

JobSummary run_job(const JobConfig& cfg) {
  validate_config(cfg);
  if (cfg.checkpoint.enabled) std::filesystem::create_directories(cfg.checkpoint.dir);
  RssSampler sampler;
  JobSummary s =
      cfg.engine == EngineKind::one_sided ? run_one_sided(cfg) : run_two_sided(cfg);
  sampler.stop();
  s.peak_mem_known = sampler.known();
  s.peak_mem_bytes = sampler.peak();
  return s;
}

Bytes reference_result(const std::string& corpus_path) {
  FILE* f = std::fopen(corpus_path.c_str(), "rb");
  if (!f) fail(Err::io, "open " + corpus_path);
  std::unordered_map<std::string, uint64_t> counts;
  std::string word;
  std::vector<char> buf(1 << 20);
  for (;;) {
    size_t n = std::fread(buf.data(), 1, buf.size(), f);
    for (size_t i = 0; i < n; i++) {
      unsigned char c = static_cast<unsigned char>(buf[i]);
      if (std::isalnum(c)) {
        word.push_back(static_cast<char>(std::tolower(c)));
      } else if (!word.empty()) {
        counts[word]++;
        word.clear();
      }
    }
    if (n < buf.size()) break;
  }
  std::fclose(f);
  if (!word.empty()) counts[word]++;

  std::vector<std::pair<std::string, uint64_t>> rows(counts.begin(), counts.end());
  std::sort(rows.begin(), rows.end());
  Bytes out;
  uint8_t v[8];
  for (const auto& [w, c] : rows) {
    store_u64le(v, c);
    encode_record(out, ByteView(reinterpret_cast<const uint8_t*>(w.data()), w.size()),
                  ByteView(v, 8));
  }
  return out;
}

VerifyReport verify_against_oracle(ByteView result, const std::string& oracle_csv_path) {
  VerifyReport rep;
  FILE* f = std::fopen(oracle_csv_path.c_str(), "rb");
  if (!f) fail(Err::io, "open " + oracle_csv_path);
  Bytes expected;
  char line[4096];
  while (std::fgets(line, sizeof(line), f)) {
    std::string_view sv(line);
    while (!sv.empty() && (sv.back() == '\n' || sv.back() == '\r')) sv.remove_suffix(1);
    if (sv.empty()) continue;
    size_t comma = sv.rfind(',');
    if (comma == std::string_view::npos || comma == 0) {
      std::fclose(f);
      fail(Err::corruption, "oracle row without a count: " + std::string(sv));
    }
    uint64_t count = 0;
    for (size_t i = comma + 1; i < sv.size(); i++) {
      if (sv[i] < '0' || sv[i] > '9') {
        std::fclose(f);
        fail(Err::corruption, "oracle count is not a number: " + std::string(sv));
      }
      count = count * 10 + static_cast<uint64_t>(sv[i] - '0');
    }
    uint8_t v[8];
    store_u64le(v, count);
    encode_record(expected, ByteView(reinterpret_cast<const uint8_t*>(sv.data()), comma),
                  ByteView(v, 8));
    rep.expected_records++;
  }
  std::fclose(f);

  iterate_records(result, [&](const RecordView&) { rep.actual_records++; });
  if (expected.size() == result.size() &&
      std::memcmp(expected.data(), result.data(), result.size()) == 0) {
    rep.ok = true;
    return rep;
  }

  // Walk both streams for the first divergence; sizes may differ.
  size_t pe = 0, pa = 0;
  uint64_t row = 0;
  while (pe < expected.size() && pa < result.size()) {
    RecordView re = decode_record(expected, pe);
    RecordView ra = decode_record(result, pa);
    bool key_eq = re.key_len == ra.key_len && !std::memcmp(re.key, ra.key, re.key_len);
    bool val_eq = re.val_len == ra.val_len && !std::memcmp(re.value, ra.value, re.val_len);
    if (!key_eq || !val_eq) {
      std::string ek(reinterpret_cast<const char*>(re.key), re.key_len);
      std::string ak(reinterpret_cast<const char*>(ra.key), ra.key_len);
      uint64_t ev = re.val_len == 8 ? load_u64le(re.value) : 0;
      uint64_t av = ra.val_len == 8 ? load_u64le(ra.value) : 0;
      rep.detail = "row " + std::to_string(row) + ": expected " + ek + "=" +
                   std::to_string(ev) + ", got " + ak + "=" + std::to_string(av);
      return rep;
    }
    row++;
  }
  if (pe < expected.size())
    rep.detail = "result ends early at row " + std::to_string(row);
  else if (pa < result.size())
    rep.detail = "result has extra rows past row " + std::to_string(row);
  return rep;
}

void write_result_csv(ByteView result, const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) fail(Err::io, "open " + path);
  iterate_records(result, [&](const RecordView& rv) {
    if (rv.val_len != 8) {
      std::fclose(f);
      fail(Err::usage, "result values are not counters");
    }
    std::fprintf(f, "%.*s,%" PRIu64 "\n", static_cast<int>(rv.key_len),
                 reinterpret_cast<const char*>(rv.key), load_u64le(rv.value));
  });
  if (std::fclose(f) != 0) fail(Err::io, "close " + path);
}

}  // namespace osmr
