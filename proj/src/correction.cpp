#include "minipac/correction.hpp"

#include <algorithm>
#include <map>
#include <optional>

namespace minipac {

namespace {

// All positions (with multiplicity across heads) where a head's argmax frame
// contains `element`, in head-major scan order.
std::vector<Pos> head_positions(const EnsemblePrediction& heads,
                                CellClass element) {
  std::vector<Pos> p;
  for (int k = 0; k < heads.num_heads; ++k)
    for (int r = 0; r < kFrameHeight; ++r)
      for (int c = 0; c < kFrameWidth; ++c)
        if (heads.head_cell(k, cell_index(r, c)) == element)
          p.push_back({r, c});
  return p;
}

// Mode with lowest-(row,col) tie-breaking, or a uniform draw for Sampling.
Pos select_pos(const std::vector<Pos>& p, ConsolidationMode mode,
               std::mt19937_64& rng) {
  if (mode == ConsolidationMode::Sampling)
    return p[draw_bounded(rng, p.size())];
  std::map<Pos, int> counts;
  for (const Pos& q : p) ++counts[q];
  Pos best = p.front();
  int best_n = 0;
  for (const auto& [q, n] : counts)
    if (n > best_n) {  // map iterates in (row,col) order
      best = q;
      best_n = n;
    }
  return best;
}

CellClass select_class(const std::vector<CellClass>& v, ConsolidationMode mode,
                       std::mt19937_64& rng) {
  if (mode == ConsolidationMode::Sampling)
    return v[draw_bounded(rng, v.size())];
  std::array<int, kNumCellClasses> counts{};
  for (CellClass c : v) ++counts[static_cast<int>(c)];
  int arg = 0;
  for (int i = 1; i < kNumCellClasses; ++i)
    if (counts[i] > counts[arg]) arg = i;
  return static_cast<CellClass>(arg);
}

// Shared surplus routine. The keeper is the duplicate most supported by the
// heads; every other duplicate is substituted. With no head support at all the
// frame is left alone, except under `pacman_rule`, which also turns a
// duplicate at the remembered pacman position into an eaten cell (the food
// there is gone). `constraints`, when given, stops a substitution from
// re-inserting an avatar class already at its own constraint.
Frame surplus_correct(Frame frame, const EnsemblePrediction& heads,
                      CellClass element, int constraint, RolloutMemory& memory,
                      ConsolidationMode mode, std::mt19937_64& rng,
                      bool pacman_rule, const ConstraintSet* constraints) {
  if (frame.count(element) <= constraint) return frame;

  const std::vector<Pos> a = frame.positions_of(element);
  const std::vector<Pos> p = head_positions(heads, element);
  std::vector<Pos> g;  // multiset: head votes that land on a unified duplicate
  for (const Pos& q : p)
    if (std::find(a.begin(), a.end(), q) != a.end()) g.push_back(q);

  std::optional<Pos> keeper;
  if (!g.empty())
    keeper = select_pos(g, mode, rng);
  else if (pacman_rule)
    keeper = select_pos(a, mode, rng);
  if (g.empty() && !pacman_rule) return frame;  // algorithm as written

  // Unique discard positions in scan order.
  std::vector<Pos> discards;
  auto add_discard = [&](Pos q) {
    if (keeper && q == *keeper) return;
    if (std::find(discards.begin(), discards.end(), q) == discards.end())
      discards.push_back(q);
  };
  // Everything not chosen gets substituted; g only gates the no-op above and
  // supplies the keeper.
  for (const Pos& q : a) add_discard(q);
  const bool have_last =
      memory.has_pos[static_cast<int>(element)];
  if (pacman_rule && have_last) {
    const Pos lp = memory.pos(element);
    if (std::find(a.begin(), a.end(), lp) != a.end()) add_discard(lp);
  }

  const auto banned = [&](CellClass c) {
    if (!constraints) return false;
    if (c != CellClass::Pacman && c != CellClass::Ghost) return false;
    return frame.count(c) >= constraints->count(c);
  };
  for (const Pos& d : discards) {
    if (pacman_rule && have_last && d == memory.pos(element)) {
      frame.set(d, CellClass::Eaten);  // food there has been eaten
      continue;
    }
    std::vector<CellClass> v;
    for (int k = 0; k < heads.num_heads; ++k) {
      const CellClass hc = heads.head_cell(k, cell_index(d));
      if (hc != element && !banned(hc)) v.push_back(hc);
    }
    CellClass sub = v.empty() ? memory.last_elem : select_class(v, mode, rng);
    if (sub == element || banned(sub)) sub = CellClass::Eaten;
    frame.set(d, sub);
    memory.last_elem = sub;
  }
  return frame;
}

}  // namespace

Frame correct_missing(const Frame& unified, const EnsemblePrediction& heads,
                      CellClass element, int constraint, RolloutMemory& memory,
                      ConsolidationMode mode, std::mt19937_64& rng) {
  Frame frame = unified;
  while (frame.count(element) < constraint) {
    const std::vector<Pos> p = head_positions(heads, element);
    Pos target;
    if (!p.empty()) {
      target = select_pos(p, mode, rng);
    } else if (memory.has_pos[static_cast<int>(element)]) {
      target = memory.pos(element);
    } else {
      break;  // nothing to anchor the insertion on
    }
    const int before = frame.count(element);
    frame.set(target, element);
    memory.set_pos(element, target);
    if (frame.count(element) == before) break;  // insertion did not add one
  }
  return frame;
}

Frame correct_additional(const Frame& unified, const EnsemblePrediction& heads,
                         CellClass element, int constraint,
                         RolloutMemory& memory, ConsolidationMode mode,
                         std::mt19937_64& rng) {
  return surplus_correct(unified, heads, element, constraint, memory, mode,
                         rng, /*pacman_rule=*/false, nullptr);
}

std::pair<Frame, RolloutMemory> apply_corrections(
    const Frame& unified, const EnsemblePrediction& heads,
    const ConstraintSet& constraints, RolloutMemory memory,
    ConsolidationMode mode, std::mt19937_64& rng) {
  Frame frame = unified;

  // An insertion may overwrite the other tracked element; re-check and re-run
  // a bounded number of times.
  for (int pass = 0; pass < 3; ++pass) {
    bool ok = true;
    for (CellClass cls : {CellClass::Pacman, CellClass::Ghost}) {
      const int expected = constraints.count(cls);
      const int n = frame.count(cls);
      if (n < expected) {
        frame = correct_missing(frame, heads, cls, expected, memory, mode, rng);
      } else if (n > expected) {
        frame = surplus_correct(frame, heads, cls, expected, memory, mode, rng,
                                cls == CellClass::Pacman, &constraints);
      }
      if (frame.count(cls) != expected) ok = false;
    }
    if (ok && frame.count(CellClass::Pacman) ==
                  constraints.count(CellClass::Pacman) &&
        frame.count(CellClass::Ghost) == constraints.count(CellClass::Ghost))
      break;
  }

  // Refresh remembered positions where the class is uniquely present.
  for (CellClass cls : {CellClass::Pacman, CellClass::Ghost}) {
    const auto pos = frame.positions_of(cls);
    if (pos.size() == 1) memory.set_pos(cls, pos.front());
  }
  return {frame, memory};
}

}  // namespace minipac
