#pragma once

#include <utility>

#include "minipac/ensemble.hpp"
#include "minipac/types.hpp"

namespace minipac {

// Expected per-class element counts, captured from the last real observation
// at rollout start. Pacman and Ghost are the tracked classes.
struct ConstraintSet {
  std::array<int, kNumCellClasses> expected{};

  int count(CellClass c) const { return expected[static_cast<int>(c)]; }

  static ConstraintSet from_frame(const Frame& f) {
    ConstraintSet cs;
    cs.expected[static_cast<int>(CellClass::Pacman)] =
        f.count(CellClass::Pacman);
    cs.expected[static_cast<int>(CellClass::Ghost)] =
        f.count(CellClass::Ghost);
    return cs;
  }
};

// Rolling per-rollout context: last (real or imagined) element positions and
// the last substituted element, used as fallbacks when the heads are silent.
struct RolloutMemory {
  std::array<Pos, kNumCellClasses> last_pos{};
  std::array<bool, kNumCellClasses> has_pos{};
  CellClass last_elem = CellClass::Eaten;

  Pos pos(CellClass c) const { return last_pos[static_cast<int>(c)]; }
  void set_pos(CellClass c, Pos p) {
    last_pos[static_cast<int>(c)] = p;
    has_pos[static_cast<int>(c)] = true;
  }

  static RolloutMemory from_frame(const Frame& f) {
    RolloutMemory m;
    for (CellClass c : {CellClass::Pacman, CellClass::Ghost}) {
      auto pos = f.positions_of(c);
      if (!pos.empty()) m.set_pos(c, pos.front());
    }
    return m;
  }
};

// Missing-element filter: inserts `element` at the position most supported by
// the heads (mode for Average/Voting, a draw for Sampling), falling back to
// the last remembered position when no head predicts the element. No-op when
// the count already meets the constraint.
Frame correct_missing(const Frame& unified, const EnsemblePrediction& heads,
                      CellClass element, int constraint, RolloutMemory& memory,
                      ConsolidationMode mode, std::mt19937_64& rng);

// Additional-element filter: keeps the duplicate most supported by the heads
// and substitutes every other duplicate with the heads' alternative classes
// at those cells (fallback: memory.last_elem). When no duplicate has head
// support the frame is left alone. No-op when the count is within constraint.
Frame correct_additional(const Frame& unified, const EnsemblePrediction& heads,
                         CellClass element, int constraint,
                         RolloutMemory& memory, ConsolidationMode mode,
                         std::mt19937_64& rng);

// Runs both filters for Pacman, then Ghost. Surplus pacmen additionally obey
// the eaten-cell rule: a duplicate sitting at the previously remembered pacman
// position becomes Eaten, and such a duplicate is discarded even when no head
// predicts it. Counts are re-checked afterwards and corrections re-run when an
// insertion overwrote the other tracked element.
std::pair<Frame, RolloutMemory> apply_corrections(
    const Frame& unified, const EnsemblePrediction& heads,
    const ConstraintSet& constraints, RolloutMemory memory,
    ConsolidationMode mode, std::mt19937_64& rng);

}  // namespace minipac
