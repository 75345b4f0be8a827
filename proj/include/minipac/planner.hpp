#pragma once

#include <functional>
#include <optional>

#include "minipac/correction.hpp"
#include "minipac/env.hpp"
#include "minipac/model.hpp"

namespace minipac {

struct PlannerConfig {
  int horizon = 10;           // T
  int population = 10;        // P
  double mutation_rate = 0.9; // per-gene redraw probability
  bool shift_buffer = true;
  bool use_correction = false;
  ConsolidationMode consolidation = ConsolidationMode::Voting;
};

using ActionSequence = std::vector<Action>;

struct RolloutResult {
  ActionSequence sequence;
  double fitness = 0.0;  // sum of per-step reward values
};

// Previous best sequence shifted one step left, with a fresh uniform action
// appended to preserve the length.
ActionSequence shift_buffer(const ActionSequence& prev, std::mt19937_64& rng);

// Each gene independently redrawn uniformly with probability mu (the redraw
// may equal the original).
ActionSequence mutate(const ActionSequence& seq, double mu,
                      std::mt19937_64& rng);

ActionSequence random_sequence(int length, std::mt19937_64& rng);

// Imagined rollout on the learned ensemble: consolidate (and optionally
// error-correct) each step and accumulate reward values. The model has no
// done-head, so all T steps contribute.
RolloutResult evaluate_sequence_learned(const Frame& start_frame,
                                        const ActionSequence& seq,
                                        const EnsembleModel& model,
                                        const PlannerConfig& cfg,
                                        const ConstraintSet& constraints,
                                        std::mt19937_64& rng);

// Ground-truth rollout on a cloned state; stops accumulating at termination.
RolloutResult evaluate_sequence_perfect(const Env& env, const GameState& state,
                                        const ActionSequence& seq);

// Fitness of one candidate sequence; owns a private rng stream.
using SequenceEvaluator =
    std::function<double(const ActionSequence&, std::mt19937_64&)>;

struct PlanOutcome {
  Action action = Action::Noop;
  ActionSequence best_sequence;
  double fitness = 0.0;
};

// One RHE decision: individual 0 is the shifted previous best (or a fresh
// uniform sequence), individuals 1..P-1 are mutations of it; the fittest
// sequence wins (ties: lowest population index).
PlanOutcome plan(const SequenceEvaluator& evaluate,
                 const std::optional<ActionSequence>& prev_best,
                 const PlannerConfig& cfg, std::mt19937_64& rng);

// Evaluator factories binding plan() to the two forward models.
SequenceEvaluator make_learned_evaluator(const EnsembleModel& model,
                                         const PlannerConfig& cfg,
                                         const Frame& start_frame);
SequenceEvaluator make_perfect_evaluator(const Env& env,
                                         const GameState& state);

}  // namespace minipac
