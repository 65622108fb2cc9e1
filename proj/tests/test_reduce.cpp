#include <doctest.h>

#include <algorithm>
#include <cstring>

#include "reduce_table.hpp"

using namespace osmr;

namespace {

ByteView bv(const char* s) {
  return {reinterpret_cast<const uint8_t*>(s), std::strlen(s)};
}

Bytes count_val(uint64_t n) {
  Bytes v(8);
  store_u64le(v.data(), n);
  return v;
}

uint64_t val_of(const Value& v) {
  REQUIRE(v.size() == 8);
  return load_u64le(v.data());
}

Bytes sorted_run(std::vector<std::pair<std::string, uint64_t>> rows) {
  std::sort(rows.begin(), rows.end());
  Bytes out;
  for (const auto& [k, n] : rows) {
    Bytes v = count_val(n);
    encode_record(out, bv(k.c_str()), ByteView(v));
  }
  return out;
}

}  // namespace

TEST_CASE("word count reduce is associative and commutative") {
  auto uc = make_wordcount();
  // Fold the same multiset in every order; the accumulator must not care.
  // The first value seeds the accumulator (as the table does on insert);
  // reduce only ever folds into an initialized accumulator.
  std::vector<uint64_t> vals = {3, 11, 40};
  std::sort(vals.begin(), vals.end());
  uint64_t expect = 3 + 11 + 40;
  do {
    Bytes first = count_val(vals[0]);
    Value acc{ByteView(first)};
    for (size_t i = 1; i < vals.size(); i++) {
      Bytes b = count_val(vals[i]);
      uc->reduce(bv("word"), ByteView(b), acc);
    }
    CHECK(val_of(acc) == expect);
  } while (std::next_permutation(vals.begin(), vals.end()));

  // Partial sums combine to the same total.
  Bytes b3 = count_val(3), b11 = count_val(11), b40 = count_val(40);
  Value left{ByteView(b3)};
  uc->reduce(bv("w"), ByteView(b11), left);
  Value right{ByteView(b40)};
  uc->reduce(bv("w"), right.view(), left);
  Value whole{ByteView(b3)};
  uc->reduce(bv("w"), ByteView(b11), whole);
  uc->reduce(bv("w"), ByteView(b40), whole);
  CHECK(val_of(left) == val_of(whole));
}

TEST_CASE("reduce table aggregates and sorts") {
  auto uc = make_wordcount();
  ReduceTable t;
  Bytes one = count_val(1);
  for (int round = 0; round < 3; round++)
    for (const char* w : {"pear", "apple", "pear", "fig"})
      t.insert(bv(w), ByteView(one), *uc, true);

  CHECK(t.size() == 3);
  Bytes run;
  t.sort_into(run);
  CHECK(run_strictly_sorted(ByteView(run)));

  std::vector<std::pair<std::string, uint64_t>> rows;
  iterate_records(ByteView(run), [&](const RecordView& r) {
    rows.emplace_back(std::string(reinterpret_cast<const char*>(r.key), r.key_len),
                      load_u64le(r.value));
  });
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::pair<std::string, uint64_t>("apple", 3));
  CHECK(rows[1] == std::pair<std::string, uint64_t>("fig", 3));
  CHECK(rows[2] == std::pair<std::string, uint64_t>("pear", 6));

  // sort_into leaves the table usable.
  t.insert(bv("apple"), ByteView(one), *uc, true);
  Bytes run2;
  t.sort_into(run2);
  uint64_t apple = 0;
  iterate_records(ByteView(run2), [&](const RecordView& r) {
    if (r.key_len == 5 && std::memcmp(r.key, "apple", 5) == 0) apple = load_u64le(r.value);
  });
  CHECK(apple == 4);
}

TEST_CASE("reduce table growth keeps entries intact") {
  auto uc = make_wordcount();
  ReduceTable t;
  Bytes one = count_val(1);
  constexpr int kKeys = 20000;  // far past the initial capacity
  for (int i = 0; i < kKeys; i++) {
    std::string k = "key" + std::to_string(i % (kKeys / 2));
    t.insert(bv(k.c_str()), ByteView(one), *uc, true);
  }
  CHECK(t.size() == kKeys / 2);
  uint64_t total = 0;
  t.for_each([&](ReduceTable::EntryRef e) { total += load_u64le(e.val.data()); });
  CHECK(total == kKeys);
}

TEST_CASE("adopt moves ownership and rejects duplicates") {
  ReduceTable t;
  Value v(ByteView(count_val(5)));
  t.adopt(hash64(bv("stray")), bv("stray"), std::move(v));
  CHECK(t.size() == 1);

  Value dup(ByteView(count_val(1)));
  CHECK_THROWS_AS(t.adopt(hash64(bv("stray")), bv("stray"), std::move(dup)), Error);

  t.clear();
  CHECK(t.size() == 0);
  Value again(ByteView(count_val(2)));
  t.adopt(hash64(bv("stray")), bv("stray"), std::move(again));
  CHECK(t.size() == 1);
}

TEST_CASE("merge_runs folds equal keys") {
  auto uc = make_wordcount();
  Bytes a = sorted_run({{"apple", 2}, {"cherry", 1}, {"plum", 9}});
  Bytes b = sorted_run({{"apple", 5}, {"banana", 1}, {"plum", 1}, {"quince", 3}});
  Bytes out;
  merge_runs(ByteView(a), ByteView(b), *uc, out);
  CHECK(run_strictly_sorted(ByteView(out)));
  CHECK(out == sorted_run({{"apple", 7}, {"banana", 1}, {"cherry", 1}, {"plum", 10}, {"quince", 3}}));

  // Merging with an empty run is the identity.
  Bytes id;
  merge_runs(ByteView(a), ByteView(id), *uc, id);
  CHECK(id == a);
}

TEST_CASE("run order validation") {
  CHECK(run_strictly_sorted(ByteView{}));
  CHECK(run_strictly_sorted(ByteView(sorted_run({{"a", 1}, {"ab", 1}, {"b", 1}}))));

  Bytes dup = sorted_run({{"x", 1}});
  Bytes twice = dup;
  twice.insert(twice.end(), dup.begin(), dup.end());
  CHECK(!run_strictly_sorted(ByteView(twice)));

  Bytes backwards = sorted_run({{"b", 1}});
  Bytes a = sorted_run({{"a", 1}});
  backwards.insert(backwards.end(), a.begin(), a.end());
  CHECK(!run_strictly_sorted(ByteView(backwards)));
}
