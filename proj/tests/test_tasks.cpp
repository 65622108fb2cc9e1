#include <doctest.h>

#include "dataset.hpp"

using namespace osmr;

TEST_CASE("split_tasks produces contiguous full-cover tasks") {
  const uint64_t mib = 1ull << 20;
  auto tasks = split_tasks(640 * mib, 64 * mib);
  REQUIRE(tasks.size() == 10);
  uint64_t expect_off = 0;
  for (size_t i = 0; i < tasks.size(); i++) {
    CHECK(tasks[i].index == i);
    CHECK(tasks[i].offset == expect_off);
    CHECK(tasks[i].length == 64 * mib);
    expect_off += tasks[i].length;
  }

  auto uneven = split_tasks(65, 64);
  REQUIRE(uneven.size() == 2);
  CHECK(uneven[0].length == 64);
  CHECK(uneven[1].offset == 64);
  CHECK(uneven[1].length == 1);

  CHECK(split_tasks(0, 64).empty());
  CHECK(split_tasks(63, 64).size() == 1);
}

TEST_CASE("static round-robin assignment") {
  // Task i belongs to worker i mod P; enumerate worker 1's share.
  const uint64_t mib = 1ull << 20;
  auto tasks = split_tasks(640 * mib, 64 * mib);
  std::vector<uint64_t> mine;
  for (const auto& t : tasks)
    if (t.index % 4 == 1) mine.push_back(t.offset);
  REQUIRE(mine.size() == 3);
  CHECK(mine[0] == 64 * mib);
  CHECK(mine[1] == 320 * mib);
  CHECK(mine[2] == 576 * mib);
}

TEST_CASE("skew profile parsing and application") {
  SkewProfile sp;
  parse_skew("worker0x4", sp);
  REQUIRE(!sp.empty());
  CHECK(sp.repeat_for(0, 4) == 4);
  CHECK(sp.repeat_for(4, 4) == 4);
  CHECK(sp.repeat_for(1, 4) == 1);
  CHECK(sp.repeat_for(3, 4) == 1);
  CHECK(sp.describe() == "worker0x4");

  SkewProfile none;
  parse_skew("none", none);
  CHECK(none.empty());
  parse_skew("", none);
  CHECK(none.empty());

  SkewProfile bad;
  CHECK_THROWS_AS(parse_skew("workerx4", bad), Error);
  CHECK_THROWS_AS(parse_skew("worker0", bad), Error);
  CHECK_THROWS_AS(parse_skew("0x4", bad), Error);
  CHECK_THROWS_AS(parse_skew("worker0x0", bad), Error);
}
