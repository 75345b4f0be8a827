#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace minipac {

inline constexpr int kFrameHeight = 15;
inline constexpr int kFrameWidth = 19;
inline constexpr int kNumCells = kFrameHeight * kFrameWidth;

// Stable encoding 0..5, fixed for the life of the project.
enum class CellClass : std::uint8_t {
  Wall = 0,
  Food = 1,
  Eaten = 2,
  PowerPill = 3,
  Pacman = 4,
  Ghost = 5,
};
inline constexpr int kNumCellClasses = 6;

// Stable encoding 0..4.
enum class Action : std::uint8_t {
  Up = 0,
  Down = 1,
  Left = 2,
  Right = 3,
  Noop = 4,
};
inline constexpr int kNumActions = 5;

// Reward is always one of these values; RewardClass is the index into this list.
inline constexpr std::array<int, 5> kRewardValues{-1, 0, 1, 3, 6};
inline constexpr int kNumRewardClasses = 5;
using RewardClass = std::uint8_t;

inline RewardClass reward_class_from_value(int value) {
  for (int i = 0; i < kNumRewardClasses; ++i)
    if (kRewardValues[i] == value) return static_cast<RewardClass>(i);
  return 1;  // value 0
}

struct Pos {
  int row = 0;
  int col = 0;
  bool operator==(const Pos&) const = default;
  bool operator<(const Pos& o) const {
    return row != o.row ? row < o.row : col < o.col;
  }
};

inline int cell_index(int row, int col) { return row * kFrameWidth + col; }
inline int cell_index(Pos p) { return cell_index(p.row, p.col); }

// A 15x19 grid of cell classes: the observation and prediction unit.
struct Frame {
  std::array<CellClass, kNumCells> cells{};

  CellClass at(int row, int col) const { return cells[cell_index(row, col)]; }
  CellClass at(Pos p) const { return cells[cell_index(p)]; }
  void set(int row, int col, CellClass c) { cells[cell_index(row, col)] = c; }
  void set(Pos p, CellClass c) { cells[cell_index(p)] = c; }

  int count(CellClass c) const {
    int n = 0;
    for (auto v : cells) n += (v == c);
    return n;
  }

  std::vector<Pos> positions_of(CellClass c) const {
    std::vector<Pos> out;
    for (int r = 0; r < kFrameHeight; ++r)
      for (int col = 0; col < kFrameWidth; ++col)
        if (at(r, col) == c) out.push_back({r, col});
    return out;
  }

  bool operator==(const Frame&) const = default;
};

inline constexpr int kInputChannels = kNumCellClasses + kNumActions;  // 11

// One-hot cell class (channels 0..5) concatenated with the previous action
// one-hot broadcast over every cell (channels 6..10). Layout is row-major
// [15][19][11] (channels last).
std::vector<double> encode_input(const Frame& frame, Action prev_action);

// Deterministic helpers over the engine's RNG stream (avoids the
// implementation-defined behaviour of std::uniform_int_distribution).
inline std::uint64_t draw_bounded(std::mt19937_64& rng, std::uint64_t n) {
  // rejection sampling over the top range
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

inline double draw_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline Action draw_action(std::mt19937_64& rng) {
  return static_cast<Action>(draw_bounded(rng, kNumActions));
}

}  // namespace minipac
