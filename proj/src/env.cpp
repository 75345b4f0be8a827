#include "minipac/env.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace minipac {

std::vector<double> encode_input(const Frame& frame, Action prev_action) {
  std::vector<double> x(kNumCells * kInputChannels, 0.0);
  const int a = static_cast<int>(prev_action);
  for (int i = 0; i < kNumCells; ++i) {
    x[i * kInputChannels + static_cast<int>(frame.cells[i])] = 1.0;
    x[i * kInputChannels + kNumCellClasses + a] = 1.0;
  }
  return x;
}

const std::string& default_maze_text() {
  static const std::string maze =
      "###################\n"
      "#........#........#\n"
      "#.##.###.#.###.##.#\n"
      "#o.......G......o.#\n"
      "#.##.#.#####.#.##.#\n"
      "#....#...#...#....#\n"
      "####.###.#.###.####\n"
      "#........P........#\n"
      "####.###.#.###.####\n"
      "#....#...#...#....#\n"
      "#.##.#.#####.#.##.#\n"
      "#o.......#......o.#\n"
      "#.##.###.#.###.##.#\n"
      "#.................#\n"
      "###################\n";
  return maze;
}

MazeLayout MazeLayout::from_text(const std::string& text) {
  MazeLayout m;
  std::istringstream in(text);
  std::string line;
  int row = 0;
  bool have_pacman = false, have_ghost = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= kFrameHeight) throw std::runtime_error("maze: too many rows");
    if (static_cast<int>(line.size()) != kFrameWidth)
      throw std::runtime_error("maze: row " + std::to_string(row) +
                               " has width " + std::to_string(line.size()));
    for (int col = 0; col < kFrameWidth; ++col) {
      CellClass c;
      switch (line[col]) {
        case '#': c = CellClass::Wall; break;
        case '.': c = CellClass::Food; break;
        case 'o': c = CellClass::PowerPill; break;
        case ' ': c = CellClass::Eaten; break;
        case 'P':
          c = CellClass::Eaten;
          m.pacman_start = {row, col};
          have_pacman = true;
          break;
        case 'G':
          c = CellClass::Eaten;
          m.ghost_start = {row, col};
          have_ghost = true;
          break;
        default:
          throw std::runtime_error(std::string("maze: bad character '") +
                                   line[col] + "'");
      }
      m.base[cell_index(row, col)] = c;
    }
    ++row;
  }
  if (row != kFrameHeight) throw std::runtime_error("maze: too few rows");
  if (!have_pacman || !have_ghost)
    throw std::runtime_error("maze: missing P or G start cell");
  return m;
}

MazeLayout MazeLayout::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("maze: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

Frame GameState::frame() const {
  Frame f;
  f.cells = base;
  f.set(ghost, CellClass::Ghost);
  f.set(pacman, CellClass::Pacman);
  return f;
}

int GameState::food_remaining() const {
  int n = 0;
  for (auto c : base) n += (c == CellClass::Food || c == CellClass::PowerPill);
  return n;
}

bool GameState::ghost_covers_food() const {
  auto c = base[cell_index(ghost)];
  return c == CellClass::Food || c == CellClass::PowerPill;
}

Env::Env(EnvConfig cfg) : cfg_(std::move(cfg)) {
  maze_ = cfg_.maze_path.empty() ? MazeLayout::from_text(default_maze_text())
                                 : MazeLayout::from_file(cfg_.maze_path);
}

GameState Env::reset(std::uint64_t seed) const {
  GameState s;
  s.base = maze_.base;
  s.pacman = maze_.pacman_start;
  s.ghost = maze_.ghost_start;
  s.ghost_home = maze_.ghost_start;
  s.rng.seed(seed);
  return s;
}

namespace {

Pos action_target(Pos p, Action a) {
  switch (a) {
    case Action::Up: return {p.row - 1, p.col};
    case Action::Down: return {p.row + 1, p.col};
    case Action::Left: return {p.row, p.col - 1};
    case Action::Right: return {p.row, p.col + 1};
    case Action::Noop: return p;
  }
  return p;
}

int manhattan(Pos a, Pos b) {
  return std::abs(a.row - b.row) + std::abs(a.col - b.col);
}

// Ghost respawn cell; steps aside when pacman sits on the home cell.
Pos respawn_pos(const GameState& s, Pos pacman_pos) {
  if (s.ghost_home != pacman_pos) return s.ghost_home;
  for (Action a : {Action::Up, Action::Down, Action::Left, Action::Right}) {
    Pos p = action_target(s.ghost_home, a);
    if (s.base[cell_index(p)] != CellClass::Wall && p != pacman_pos) return p;
  }
  return s.ghost_home;
}

}  // namespace

StepResult Env::step(GameState& s, Action action) const {
  if (s.done) throw std::logic_error("Env::step: state is done");

  StepResult result;
  bool ghost_eaten = false;

  // Pacman move; walls block.
  Pos target = action_target(s.pacman, action);
  if (s.base[cell_index(target)] == CellClass::Wall) target = s.pacman;

  if (target != s.pacman) {
    if (target == s.ghost) {
      if (s.power_timer > 0) {
        result.reward_value = 6;
        s.ghost = respawn_pos(s, target);
        ghost_eaten = true;
      } else {
        // Fatal collision: pacman never completes the move, so emitted
        // frames keep pacman and ghost on distinct cells.
        result.reward_value = -1;
        s.done = true;
        target = s.pacman;
      }
    } else {
      const CellClass c = s.base[cell_index(target)];
      if (c == CellClass::Food) {
        result.reward_value = 1;
      } else if (c == CellClass::PowerPill) {
        result.reward_value = 3;
        s.power_timer = cfg_.pill_duration;
      }
    }
    s.base[cell_index(target)] = CellClass::Eaten;  // vacated/entered cells
    s.pacman = target;
  }

  // Ghost move (its respawn consumes the move when it was just eaten).
  if (!s.done && !ghost_eaten) move_ghost(s, result);

  if (s.power_timer > 0) --s.power_timer;

  // Level regeneration once every food/pill is consumed.
  if (!s.done && s.food_remaining() == 0) {
    for (int i = 0; i < kNumCells; ++i) {
      const CellClass c = maze_.base[i];
      if (c == CellClass::Food || c == CellClass::PowerPill) s.base[i] = c;
    }
    s.base[cell_index(s.pacman)] = CellClass::Eaten;
  }

  ++s.step_count;
  if (s.step_count >= cfg_.episode_cap) s.done = true;

  s.score += result.reward_value;
  result.reward_class = reward_class_from_value(result.reward_value);
  result.done = s.done;
  return result;
}

void Env::move_ghost(GameState& s, StepResult& result) const {
  std::array<Pos, 4> neighbors;
  int n_legal = 0;
  for (Action a : {Action::Up, Action::Down, Action::Left, Action::Right}) {
    Pos p = action_target(s.ghost, a);
    if (s.base[cell_index(p)] != CellClass::Wall) neighbors[n_legal++] = p;
  }
  if (n_legal == 0) return;

  Pos next;
  if (draw_unit(s.rng) < cfg_.chase_prob) {
    // Greedy: chase pacman, or flee while the power pill is active.
    const bool flee = s.power_timer > 0;
    int best = flee ? -1 : 1 << 30;
    std::array<Pos, 4> tied;
    int n_tied = 0;
    for (int i = 0; i < n_legal; ++i) {
      const int d = manhattan(neighbors[i], s.pacman);
      if ((flee && d > best) || (!flee && d < best)) {
        best = d;
        tied[0] = neighbors[i];
        n_tied = 1;
      } else if (d == best) {
        tied[n_tied++] = neighbors[i];
      }
    }
    next = tied[n_tied == 1 ? 0 : draw_bounded(s.rng, n_tied)];
  } else {
    next = neighbors[draw_bounded(s.rng, n_legal)];
  }

  if (next == s.pacman) {
    if (s.power_timer > 0) {
      result.reward_value = 6;  // overrides any food/pill event this step
      s.ghost = respawn_pos(s, s.pacman);
    } else {
      // Fatal for pacman; the ghost holds its cell so the terminal frame
      // still shows both actors.
      result.reward_value = -1;
      s.done = true;
    }
  } else {
    s.ghost = next;
  }
}

}  // namespace minipac
