#pragma once

#include "job.hpp"

namespace osmr {

// Decoupled runtime: workers coordinate phase hand-offs purely through
// one-sided operations on each other's windows and meet at exactly two
// barriers, one after window setup and one before teardown.
JobSummary run_one_sided(const JobConfig& cfg);

// Coupled baseline: rank 0 scatters tasks round by round, phases are fenced
// with barriers, and intermediate records move in a synchronized pairwise
// exchange before anyone reduces.
JobSummary run_two_sided(const JobConfig& cfg);

}  // namespace osmr
