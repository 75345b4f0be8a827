#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "minipac/types.hpp"

namespace minipac {

// One transition plus its bootstrap mask: bit k set means the transition
// trains head k. The mask is drawn once at push time and never changes.
struct TransitionRecord {
  Frame s;
  Action a = Action::Noop;
  RewardClass r = 1;
  Frame s_next;
  bool done = false;
  std::uint64_t mask = 0;  // K low bits

  bool operator==(const TransitionRecord&) const = default;
};

// FIFO ring buffer of transitions.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, int num_heads);

  // Draws a fresh Bernoulli(0.5) mask of num_heads bits from rng and stores
  // the record, evicting the oldest when full. With a single head the mask
  // is always 1 so the baseline sees the full data stream.
  void push(const Frame& s, Action a, RewardClass r, const Frame& s_next,
            bool done, std::mt19937_64& rng);

  // n records drawn uniformly without replacement. Throws if size() < n.
  std::vector<TransitionRecord> sample_minibatch(int n,
                                                 std::mt19937_64& rng) const;

  int size() const { return static_cast<int>(records_.size()); }
  int capacity() const { return capacity_; }
  int num_heads() const { return num_heads_; }

  // Records in insertion order, oldest first.
  const TransitionRecord& at(int i) const {
    return records_[(head_ + i) % records_.size()];
  }

  // Versioned binary snapshot, decouples data collection from training.
  void save(const std::string& path) const;
  static ReplayBuffer load(const std::string& path);

 private:
  int capacity_;
  int num_heads_;
  int head_ = 0;  // index of the oldest record once full
  std::vector<TransitionRecord> records_;
};

}  // namespace minipac
