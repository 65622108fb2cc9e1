#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "codec.hpp"

namespace osmr {

namespace {

// Substream seeds are part of the frozen output definition; changing them
// changes every generated corpus.
constexpr uint64_t kVocabStream = 0x766f636162ull;   // "vocab"
constexpr uint64_t kDrawStream = 0x6472617773ull;    // "draws"

std::vector<std::string> build_vocab(const CorpusSpec& spec) {
  if (spec.vocab_size == 0) fail(Err::config, "vocab_size must be >= 1");
  if (spec.word_min == 0 || spec.word_min > spec.word_max)
    fail(Err::config, "invalid word length range");
  // Room check so the dedupe loop terminates: distinct words of max length.
  double space = 0;
  for (uint32_t len = spec.word_min; len <= spec.word_max && space < 4e18; len++) {
    double p = 1;
    for (uint32_t i = 0; i < len && p < 4e18; i++) p *= 26;
    space += p;
  }
  if (space < 2.0 * spec.vocab_size)
    fail(Err::config, "word length range too small for vocab_size");

  SplitMix64 rng(spec.seed ^ kVocabStream);
  std::unordered_set<std::string> seen;
  std::vector<std::string> vocab;
  vocab.reserve(spec.vocab_size);
  std::string w;
  while (vocab.size() < spec.vocab_size) {
    uint32_t len = spec.word_min + static_cast<uint32_t>(rng.below(spec.word_max - spec.word_min + 1));
    w.clear();
    for (uint32_t i = 0; i < len; i++) w.push_back(static_cast<char>('a' + rng.below(26)));
    if (seen.insert(w).second) vocab.push_back(w);
  }
  return vocab;
}

class CsvFile {
public:
  explicit CsvFile(const std::string& path) : f_(std::fopen(path.c_str(), "wb")), path_(path) {
    if (!f_) fail(Err::io, "cannot write " + path);
  }
  ~CsvFile() {
    if (f_) std::fclose(f_);
  }
  void row(const std::string& word, uint64_t count) {
    if (std::fprintf(f_, "%s,%llu\n", word.c_str(), static_cast<unsigned long long>(count)) < 0)
      fail(Err::io, "write failed: " + path_);
  }
  void close() {
    if (f_ && std::fclose(f_) != 0) fail(Err::io, "close failed: " + path_);
    f_ = nullptr;
  }

private:
  std::FILE* f_;
  std::string path_;
};

}  // namespace

GenerationReport generate_corpus(const CorpusSpec& spec, const std::string& corpus_path,
                                 const std::string& oracle_csv_path) {
  auto vocab = build_vocab(spec);
  const uint32_t v = spec.vocab_size;

  // Inverse-CDF sampling from a precomputed cumulative table; rank r has
  // weight 1/r^s. s == 0 short-circuits to a uniform draw.
  std::vector<double> cdf;
  if (spec.zipf_s > 0) {
    cdf.resize(v);
    double acc = 0;
    for (uint32_t i = 0; i < v; i++) {
      acc += 1.0 / std::pow(static_cast<double>(i + 1), spec.zipf_s);
      cdf[i] = acc;
    }
    for (uint32_t i = 0; i < v; i++) cdf[i] /= acc;
  }

  SplitMix64 rng(spec.seed ^ kDrawStream);
  auto draw = [&]() -> uint32_t {
    if (spec.zipf_s <= 0) return static_cast<uint32_t>(rng.below(v));
    double u = rng.unit();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<uint32_t>(std::min<size_t>(it - cdf.begin(), v - 1));
  };

  std::FILE* f = std::fopen(corpus_path.c_str(), "wb");
  if (!f) fail(Err::io, "cannot write " + corpus_path);

  std::vector<uint64_t> counts(v, 0);
  GenerationReport rep;
  std::string buf;
  buf.reserve(1 << 22);
  uint64_t written = 0;
  for (;;) {
    uint32_t idx = draw();
    const std::string& w = vocab[idx];
    uint64_t add = w.size() + (written ? 1 : 0);
    if (written + add > spec.size_bytes) break;
    if (written) buf.push_back(' ');
    buf.append(w);
    written += add;
    counts[idx]++;
    rep.token_count++;
    if (buf.size() >= (1 << 22)) {
      if (std::fwrite(buf.data(), 1, buf.size(), f) != buf.size())
        fail(Err::io, "write failed: " + corpus_path);
      buf.clear();
    }
  }
  if (!buf.empty() && std::fwrite(buf.data(), 1, buf.size(), f) != buf.size())
    fail(Err::io, "write failed: " + corpus_path);
  if (std::fclose(f) != 0) fail(Err::io, "close failed: " + corpus_path);
  rep.corpus_bytes = written;

  std::vector<uint32_t> order;
  order.reserve(v);
  for (uint32_t i = 0; i < v; i++)
    if (counts[i]) order.push_back(i);
  std::sort(order.begin(), order.end(),
            [&](uint32_t a, uint32_t b) { return vocab[a] < vocab[b]; });

  CsvFile csv(oracle_csv_path);
  Bytes digest_stream;
  uint8_t cnt[8];
  uint64_t h = kFnvOffset;
  for (uint32_t i : order) {
    csv.row(vocab[i], counts[i]);
    digest_stream.clear();
    store_u64le(cnt, counts[i]);
    encode_record(digest_stream,
                  {reinterpret_cast<const uint8_t*>(vocab[i].data()), vocab[i].size()}, {cnt, 8});
    h = fnv1a64(digest_stream.data(), digest_stream.size(), h);
  }
  csv.close();
  rep.distinct_words = order.size();
  rep.oracle_digest = h;
  return rep;
}

std::vector<TaskDescriptor> split_tasks(uint64_t file_len, uint64_t task_size) {
  if (task_size == 0) fail(Err::config, "task_size must be > 0");
  std::vector<TaskDescriptor> tasks;
  uint64_t n = (file_len + task_size - 1) / task_size;
  tasks.reserve(n);
  for (uint64_t i = 0; i < n; i++) {
    TaskDescriptor t;
    t.index = i;
    t.offset = i * task_size;
    t.length = std::min(task_size, file_len - t.offset);
    tasks.push_back(t);
  }
  return tasks;
}

std::string SkewProfile::describe() const {
  if (worker_repeat.empty()) return "none";
  std::string s;
  for (const auto& [w, k] : worker_repeat) {
    if (!s.empty()) s.push_back('+');
    s += "worker" + std::to_string(w) + "x" + std::to_string(k);
  }
  return s;
}

void parse_skew(const std::string& s, SkewProfile& out) {
  if (s.empty() || s == "none") return;
  size_t x = s.find('x');
  if (s.rfind("worker", 0) != 0 || x == std::string::npos || x <= 6 || x + 1 >= s.size())
    fail(Err::usage, "skew spec must look like worker0x4: " + s);
  int worker;
  uint32_t mult;
  try {
    worker = std::stoi(s.substr(6, x - 6));
    mult = static_cast<uint32_t>(std::stoul(s.substr(x + 1)));
  } catch (const std::exception&) {
    fail(Err::usage, "skew spec must look like worker0x4: " + s);
  }
  if (worker < 0 || mult == 0) fail(Err::usage, "skew spec out of range: " + s);
  out.worker_repeat[worker] = mult;
}

}  // namespace osmr
