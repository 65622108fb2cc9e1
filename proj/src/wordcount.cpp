#include "usecase.hpp"

#include <array>

namespace osmr {

namespace {

// norm[c] is the lowercased byte for ASCII alphanumerics, 0 for separators.
constexpr std::array<uint8_t, 256> make_norm() {
  std::array<uint8_t, 256> t{};
  for (int c = '0'; c <= '9'; c++) t[c] = static_cast<uint8_t>(c);
  for (int c = 'a'; c <= 'z'; c++) t[c] = static_cast<uint8_t>(c);
  for (int c = 'A'; c <= 'Z'; c++) t[c] = static_cast<uint8_t>(c + 32);
  return t;
}
constexpr auto kNorm = make_norm();

class WordCount final : public UseCase {
public:
  // Boundary ownership: a task owns every token that starts inside its
  // nominal range. A token straddling the start belongs to the previous
  // task (skip it; only possible when a context byte shows the task begins
  // mid-token), and a token straddling the end is followed to completion
  // in the overscan bytes.
  void map(const TaskInput& in, Emitter& out) const override {
    const uint8_t* d = in.bytes.data();
    const size_t n = in.bytes.size();
    const size_t limit = in.lead + in.nominal;
    size_t pos = in.lead;
    if (in.lead && kNorm[d[0]] != 0)
      while (pos < n && kNorm[d[pos]] != 0) pos++;

    uint8_t one[8] = {1, 0, 0, 0, 0, 0, 0, 0};
    Bytes token;
    while (pos < n) {
      while (pos < n && kNorm[d[pos]] == 0) pos++;
      if (pos >= limit || pos >= n) break;
      token.clear();
      while (pos < n && kNorm[d[pos]] != 0) {
        token.push_back(kNorm[d[pos]]);
        pos++;
      }
      out.emit(token, {one, 8});
    }
  }

  void reduce(ByteView key, ByteView incoming, Value& acc) const override {
    (void)key;
    if (incoming.size() != 8 || acc.size() != 8)
      fail(Err::corruption, "wordcount value is not a u64");
    store_u64le(acc.data(), load_u64le(acc.data()) + load_u64le(incoming.data()));
  }
};

}  // namespace

std::unique_ptr<UseCase> make_wordcount() { return std::make_unique<WordCount>(); }

std::unique_ptr<UseCase> find_usecase(const std::string& name) {
  if (name == "wordcount") return make_wordcount();
  fail(Err::config, "unknown use case: " + name);
}

}  // namespace osmr
