#pragma once

#include <string>

#include "job.hpp"

namespace osmr {

// Validates the configuration, dispatches to the configured engine, and
// samples peak resident memory while the job runs.
JobSummary run_job(const JobConfig& cfg);

// Independent single-pass recount of a small corpus; returns sorted encoded
// records, the same shape a job result has. Deliberately shares no code with
// the engine-side tokenizer.
Bytes reference_result(const std::string& corpus_path);

struct VerifyReport {
  bool ok = false;
  uint64_t expected_records = 0;
  uint64_t actual_records = 0;
  std::string detail;
};

// Exact comparison of a result stream against a "word,count" oracle csv.
VerifyReport verify_against_oracle(ByteView result, const std::string& oracle_csv_path);

// Emits a result stream in the oracle csv shape (sorted "word,count" rows).
void write_result_csv(ByteView result, const std::string& path);

}  // namespace osmr
