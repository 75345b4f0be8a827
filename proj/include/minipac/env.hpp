#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "minipac/types.hpp"

namespace minipac {

struct EnvConfig {
  std::string maze_path;      // empty -> built-in default maze
  double chase_prob = 0.75;   // ghost greedy-move probability
  int pill_duration = 20;     // agent steps the power pill stays active
  int episode_cap = 500;      // done after this many steps
};

// Static maze layout parsed from the ASCII asset.
// Characters: '#' wall, '.' food, 'o' power pill, 'P' pacman start,
// 'G' ghost start, ' ' eaten/empty.
struct MazeLayout {
  std::array<CellClass, kNumCells> base{};  // Wall/Food/Eaten/PowerPill only
  Pos pacman_start;
  Pos ghost_start;

  static MazeLayout from_text(const std::string& text);
  static MazeLayout from_file(const std::string& path);
};

// Plain value; safe to copy and step independently. The RNG stream is owned
// per-state so clones diverge without cross-talk.
struct GameState {
  std::array<CellClass, kNumCells> base{};  // underlying cells (no actors)
  Pos pacman;
  Pos ghost;
  Pos ghost_home;
  int power_timer = 0;
  int step_count = 0;
  int score = 0;
  bool done = false;
  std::mt19937_64 rng;

  Frame frame() const;             // base with pacman/ghost overlaid
  int food_remaining() const;      // Food + PowerPill cells in base
  bool ghost_covers_food() const;  // ghost currently standing on food/pill

  bool operator==(const GameState& o) const {
    return base == o.base && pacman == o.pacman && ghost == o.ghost &&
           ghost_home == o.ghost_home && power_timer == o.power_timer &&
           step_count == o.step_count && score == o.score && done == o.done &&
           rng == o.rng;
  }
};

struct StepResult {
  int reward_value = 0;
  RewardClass reward_class = 1;
  bool done = false;
};

const std::string& default_maze_text();

class Env {
 public:
  explicit Env(EnvConfig cfg = {});
  Env(EnvConfig cfg, MazeLayout maze) : cfg_(std::move(cfg)), maze_(maze) {}

  GameState reset(std::uint64_t seed) const;

  // Applies the pacman move, resolves reward events, moves the ghost per the
  // semi-random chase policy and decrements the power timer. Throws
  // std::logic_error when called on a done state.
  StepResult step(GameState& state, Action action) const;

  static GameState clone_state(const GameState& state) { return state; }

  const MazeLayout& maze() const { return maze_; }
  const EnvConfig& config() const { return cfg_; }

 private:
  void move_ghost(GameState& s, StepResult& result) const;

  EnvConfig cfg_;
  MazeLayout maze_;
};

}  // namespace minipac
