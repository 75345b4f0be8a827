#include "minipac/replay.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace minipac {

namespace {
constexpr std::uint32_t kMagic = 0x4252504d;  // "MPRB"
constexpr std::uint32_t kVersion = 1;
}  // namespace

ReplayBuffer::ReplayBuffer(int capacity, int num_heads)
    : capacity_(capacity), num_heads_(num_heads) {
  if (capacity < 1) throw std::invalid_argument("replay: capacity < 1");
  if (num_heads < 1 || num_heads > 64)
    throw std::invalid_argument("replay: num_heads out of [1,64]");
  records_.reserve(capacity);
}

void ReplayBuffer::push(const Frame& s, Action a, RewardClass r,
                        const Frame& s_next, bool done, std::mt19937_64& rng) {
  TransitionRecord rec{s, a, r, s_next, done, 0};
  if (num_heads_ == 1) {
    rec.mask = 1;  // degenerate bootstrap: a single head trains on everything
  } else {
    for (int k = 0; k < num_heads_; ++k)
      rec.mask |= static_cast<std::uint64_t>(rng() & 1) << k;
  }

  if (size() < capacity_) {
    records_.push_back(rec);
  } else {
    records_[head_] = rec;  // evict the oldest
    head_ = (head_ + 1) % capacity_;
  }
}

std::vector<TransitionRecord> ReplayBuffer::sample_minibatch(
    int n, std::mt19937_64& rng) const {
  if (n > size())
    throw std::runtime_error("replay: sample of " + std::to_string(n) +
                             " from buffer of size " + std::to_string(size()));
  // Partial Fisher-Yates over an index vector: without replacement.
  std::vector<int> idx(size());
  for (int i = 0; i < size(); ++i) idx[i] = i;
  std::vector<TransitionRecord> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int j = i + static_cast<int>(draw_bounded(rng, size() - i));
    std::swap(idx[i], idx[j]);
    out.push_back(records_[idx[i]]);
  }
  return out;
}

void ReplayBuffer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("replay: cannot write " + path);
  auto put32 = [&](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  };
  put32(kMagic);
  put32(kVersion);
  put32(static_cast<std::uint32_t>(num_heads_));
  put32(static_cast<std::uint32_t>(capacity_));
  put32(static_cast<std::uint32_t>(size()));
  for (int i = 0; i < size(); ++i) {
    const TransitionRecord& r = at(i);
    out.write(reinterpret_cast<const char*>(r.s.cells.data()), kNumCells);
    out.write(reinterpret_cast<const char*>(r.s_next.cells.data()), kNumCells);
    const std::uint8_t a = static_cast<std::uint8_t>(r.a);
    out.write(reinterpret_cast<const char*>(&a), 1);
    out.write(reinterpret_cast<const char*>(&r.r), 1);
    const std::uint8_t d = r.done ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&d), 1);
    out.write(reinterpret_cast<const char*>(&r.mask), sizeof r.mask);
  }
}

ReplayBuffer ReplayBuffer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("replay: cannot open " + path);
  auto get32 = [&] {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  if (get32() != kMagic) throw std::runtime_error("replay: bad magic");
  if (get32() != kVersion) throw std::runtime_error("replay: bad version");
  const int num_heads = static_cast<int>(get32());
  const int capacity = static_cast<int>(get32());
  const int size = static_cast<int>(get32());
  ReplayBuffer buf(capacity, num_heads);
  for (int i = 0; i < size; ++i) {
    TransitionRecord r;
    in.read(reinterpret_cast<char*>(r.s.cells.data()), kNumCells);
    in.read(reinterpret_cast<char*>(r.s_next.cells.data()), kNumCells);
    std::uint8_t a = 0, d = 0;
    in.read(reinterpret_cast<char*>(&a), 1);
    r.a = static_cast<Action>(a);
    in.read(reinterpret_cast<char*>(&r.r), 1);
    in.read(reinterpret_cast<char*>(&d), 1);
    r.done = d != 0;
    in.read(reinterpret_cast<char*>(&r.mask), sizeof r.mask);
    buf.records_.push_back(r);
  }
  if (!in) throw std::runtime_error("replay: truncated file");
  return buf;
}

}  // namespace minipac
