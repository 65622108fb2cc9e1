#pragma once

#include <map>
#include <string>

#include "common.hpp"

namespace osmr {

struct CorpusSpec {
  uint64_t size_bytes = 0;
  uint32_t vocab_size = 0;
  double zipf_s = 0.0;  // 0 = uniform
  uint64_t seed = 1;
  uint32_t word_min = 4;
  uint32_t word_max = 12;
};

struct GenerationReport {
  uint64_t corpus_bytes = 0;
  uint64_t token_count = 0;
  uint64_t distinct_words = 0;
  uint64_t oracle_digest = 0;  // over encoded (word, count) records, key-sorted
};

// Writes ~size_bytes of space-separated words drawn Zipf(s) over a seeded
// vocabulary, plus the exact per-word counts as `word,count` CSV rows sorted
// by word. Byte-identical output for identical specs.
GenerationReport generate_corpus(const CorpusSpec& spec, const std::string& corpus_path,
                                 const std::string& oracle_csv_path);

struct TaskDescriptor {
  uint64_t index = 0;
  uint64_t offset = 0;
  uint64_t length = 0;
  uint32_t repeat = 1;
};

// ceil(file_len / task_size) contiguous tasks; the last may be short.
std::vector<TaskDescriptor> split_tasks(uint64_t file_len, uint64_t task_size);

// Compute-repeat multipliers, keyed by worker under the static round-robin
// assignment (task i belongs to worker i mod P).
struct SkewProfile {
  std::map<int, uint32_t> worker_repeat;

  uint32_t repeat_for(uint64_t task_index, int num_workers) const {
    auto it = worker_repeat.find(static_cast<int>(task_index % num_workers));
    return it == worker_repeat.end() ? 1 : it->second;
  }
  bool empty() const { return worker_repeat.empty(); }
  std::string describe() const;
};

// Parses "workerNxK" (e.g. "worker0x4") into the profile.
void parse_skew(const std::string& s, SkewProfile& out);

}  // namespace osmr
