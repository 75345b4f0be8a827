#include "minipac/planner.hpp"

namespace minipac {

ActionSequence shift_buffer(const ActionSequence& prev, std::mt19937_64& rng) {
  ActionSequence out(prev.size());
  for (size_t i = 0; i + 1 < prev.size(); ++i) out[i] = prev[i + 1];
  out.back() = draw_action(rng);
  return out;
}

ActionSequence mutate(const ActionSequence& seq, double mu,
                      std::mt19937_64& rng) {
  ActionSequence out = seq;
  for (Action& a : out)
    if (draw_unit(rng) < mu) a = draw_action(rng);
  return out;
}

ActionSequence random_sequence(int length, std::mt19937_64& rng) {
  ActionSequence out(length);
  for (Action& a : out) a = draw_action(rng);
  return out;
}

RolloutResult evaluate_sequence_learned(const Frame& start_frame,
                                        const ActionSequence& seq,
                                        const EnsembleModel& model,
                                        const PlannerConfig& cfg,
                                        const ConstraintSet& constraints,
                                        std::mt19937_64& rng) {
  RolloutResult result{seq, 0.0};
  Frame frame = start_frame;
  RolloutMemory memory = RolloutMemory::from_frame(start_frame);
  for (Action a : seq) {
    const auto heads = model.forward_all_heads(frame, a);
    const auto pred = EnsemblePrediction::from_head_outputs(heads);
    UnifiedPrediction u = consolidate(pred, cfg.consolidation, rng);
    if (cfg.use_correction) {
      auto [corrected, mem] = apply_corrections(u.frame, pred, constraints,
                                                memory, cfg.consolidation, rng);
      u.frame = corrected;
      memory = mem;
    } else {
      memory = RolloutMemory::from_frame(u.frame);
    }
    result.fitness += kRewardValues[u.reward];
    frame = u.frame;
  }
  return result;
}

RolloutResult evaluate_sequence_perfect(const Env& env, const GameState& state,
                                        const ActionSequence& seq) {
  RolloutResult result{seq, 0.0};
  GameState s = Env::clone_state(state);
  for (Action a : seq) {
    if (s.done) break;
    result.fitness += env.step(s, a).reward_value;
  }
  return result;
}

PlanOutcome plan(const SequenceEvaluator& evaluate,
                 const std::optional<ActionSequence>& prev_best,
                 const PlannerConfig& cfg, std::mt19937_64& rng) {
  std::vector<ActionSequence> population;
  population.reserve(cfg.population);
  if (cfg.shift_buffer && prev_best)
    population.push_back(shift_buffer(*prev_best, rng));
  else
    population.push_back(random_sequence(cfg.horizon, rng));
  for (int i = 1; i < cfg.population; ++i)
    population.push_back(mutate(population[0], cfg.mutation_rate, rng));

  // Private evaluation streams keep results independent of evaluation order.
  std::vector<std::uint64_t> seeds(population.size());
  for (auto& s : seeds) s = rng();

  int best = 0;
  double best_fitness = 0.0;
  for (size_t i = 0; i < population.size(); ++i) {
    std::mt19937_64 eval_rng(seeds[i]);
    const double f = evaluate(population[i], eval_rng);
    if (i == 0 || f > best_fitness) {
      best = static_cast<int>(i);
      best_fitness = f;
    }
  }
  return {population[best][0], population[best], best_fitness};
}

SequenceEvaluator make_learned_evaluator(const EnsembleModel& model,
                                         const PlannerConfig& cfg,
                                         const Frame& start_frame) {
  const ConstraintSet constraints = ConstraintSet::from_frame(start_frame);
  return [&model, cfg, start_frame, constraints](const ActionSequence& seq,
                                                 std::mt19937_64& rng) {
    return evaluate_sequence_learned(start_frame, seq, model, cfg, constraints,
                                     rng)
        .fitness;
  };
}

SequenceEvaluator make_perfect_evaluator(const Env& env,
                                         const GameState& state) {
  return [&env, state](const ActionSequence& seq, std::mt19937_64&) {
    return evaluate_sequence_perfect(env, state, seq).fitness;
  };
}

}  // namespace minipac
