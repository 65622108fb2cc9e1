#include "job.hpp"

#include <algorithm>

namespace osmr {

const char* engine_name(EngineKind e) {
  return e == EngineKind::one_sided ? "1s" : "2s";
}

uint64_t resolve_task_size(uint64_t requested, uint64_t corpus_bytes, int num_workers) {
  if (requested) return requested;
  constexpr uint64_t kDefault = 64ull << 20;
  constexpr uint64_t kMin = 64ull << 10;
  if (corpus_bytes >= (1ull << 30)) return kDefault;
  // Small corpora still get a few task rounds per worker.
  return std::max<uint64_t>(corpus_bytes / (4 * static_cast<uint64_t>(num_workers)), kMin);
}

uint64_t resolve_bucket_size(uint64_t requested, uint64_t corpus_bytes, int num_workers) {
  if (requested) return requested;
  constexpr uint64_t kMax = 64ull << 20;
  constexpr uint64_t kMin = 64ull << 10;
  uint64_t p = static_cast<uint64_t>(num_workers);
  return std::clamp<uint64_t>(corpus_bytes / (4 * p * p), kMin, kMax);
}

}  // namespace osmr
