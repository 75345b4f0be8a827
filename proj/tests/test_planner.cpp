#include <doctest.h>

#include <cmath>
#include <map>

#include "minipac/planner.hpp"

using namespace minipac;

TEST_CASE("shift buffer drops the head and appends one fresh gene") {
  const ActionSequence prev{Action::Up, Action::Down, Action::Left,
                            Action::Right};
  std::mt19937_64 rng(1);
  const ActionSequence next = shift_buffer(prev, rng);
  REQUIRE(next.size() == 4);
  CHECK(next[0] == Action::Down);
  CHECK(next[1] == Action::Left);
  CHECK(next[2] == Action::Right);
  // last gene uniform over the action set
  std::map<Action, int> counts;
  for (int i = 0; i < 5000; ++i) counts[shift_buffer(prev, rng)[3]]++;
  for (int a = 0; a < kNumActions; ++a) {
    CHECK(counts[static_cast<Action>(a)] > 800);
    CHECK(counts[static_cast<Action>(a)] < 1200);
  }
}

TEST_CASE("mutation redraws each gene independently with probability mu") {
  std::mt19937_64 rng(2);
  const ActionSequence seq(20, Action::Noop);

  // mu = 0: identity
  CHECK(mutate(seq, 0.0, rng) == seq);

  // mu = 1: every gene redrawn; a redraw can still equal the original, so
  // expect ~4/5 of the genes to change
  int changed = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    const auto m = mutate(seq, 1.0, rng);
    for (int i = 0; i < 20; ++i) changed += m[i] != Action::Noop;
  }
  const double expect = trials * 20 * 0.8;
  const double sigma = std::sqrt(trials * 20 * 0.8 * 0.2);
  CHECK(changed > expect - 4 * sigma);
  CHECK(changed < expect + 4 * sigma);

  // mu = 0.9: changes ~ 0.9 * 4/5 = 0.72 of genes
  changed = 0;
  for (int t = 0; t < trials; ++t) {
    const auto m = mutate(seq, 0.9, rng);
    for (int i = 0; i < 20; ++i) changed += m[i] != Action::Noop;
  }
  const double e2 = trials * 20 * 0.72;
  const double s2 = std::sqrt(trials * 20 * 0.72 * 0.28);
  CHECK(changed > e2 - 4 * s2);
  CHECK(changed < e2 + 4 * s2);
}

TEST_CASE("perfect evaluation sums environment rewards and stops when done") {
  Env env{EnvConfig{}};
  const GameState s = env.reset(17);
  // replay the same sequence manually on a clone
  const ActionSequence seq{Action::Left, Action::Left, Action::Up,
                           Action::Right, Action::Noop};
  const RolloutResult r = evaluate_sequence_perfect(env, s, seq);
  GameState c = Env::clone_state(s);
  double manual = 0;
  for (Action a : seq) {
    const StepResult st = env.step(c, a);
    manual += st.reward_value;
    if (st.done) break;
  }
  CHECK(r.fitness == manual);
  CHECK(r.sequence == seq);
  // the original state is untouched
  CHECK(s.step_count == 0);
}

TEST_CASE("plan with an exhaustive population finds the greedy optimum") {
  // brute-force oracle: with horizon 1 the fittest first action is the one
  // whose immediate expected reward is maximal; against a deterministic
  // corridor this is exact
  Env env{EnvConfig{}};
  const GameState s = env.reset(30);
  // compute one-step rewards per action
  std::array<double, kNumActions> reward{};
  for (int a = 0; a < kNumActions; ++a) {
    GameState c = Env::clone_state(s);
    reward[a] = env.step(c, static_cast<Action>(a)).reward_value;
  }
  const int best = static_cast<int>(
      std::max_element(reward.begin(), reward.end()) - reward.begin());

  PlannerConfig cfg;
  cfg.horizon = 1;
  cfg.population = 200;  // with mu=1, all actions are explored w.h.p.
  cfg.mutation_rate = 1.0;
  cfg.shift_buffer = false;
  std::mt19937_64 rng(5);
  const PlanOutcome out =
      plan(make_perfect_evaluator(env, s), std::nullopt, cfg, rng);
  CHECK(reward[static_cast<int>(out.action)] == reward[best]);
  CHECK(out.fitness == reward[best]);
}

TEST_CASE("plan ties resolve to the lowest population index") {
  // an evaluator that scores everything equally: individual 0 must win
  PlannerConfig cfg;
  cfg.horizon = 3;
  cfg.population = 10;
  cfg.mutation_rate = 0.9;
  cfg.shift_buffer = false;
  std::mt19937_64 rng(8);
  ActionSequence first_seen;
  const SequenceEvaluator flat = [&](const ActionSequence& seq,
                                     std::mt19937_64&) {
    if (first_seen.empty()) first_seen = seq;
    return 1.0;
  };
  const PlanOutcome out = plan(flat, std::nullopt, cfg, rng);
  CHECK(out.best_sequence == first_seen);
  CHECK(out.action == first_seen[0]);
  CHECK(out.fitness == 1.0);
}

TEST_CASE("individual zero carries the shifted previous best unmutated") {
  PlannerConfig cfg;
  cfg.horizon = 4;
  cfg.population = 6;
  cfg.mutation_rate = 1.0;
  cfg.shift_buffer = true;
  const ActionSequence prev{Action::Up, Action::Down, Action::Left,
                            Action::Right};
  ActionSequence first_evaluated;
  bool first = true;
  const SequenceEvaluator capture = [&](const ActionSequence& seq,
                                        std::mt19937_64&) {
    if (first) {
      first_evaluated = seq;
      first = false;
    }
    return 0.0;
  };
  std::mt19937_64 rng(3);
  plan(capture, prev, cfg, rng);
  REQUIRE(first_evaluated.size() == 4);
  CHECK(first_evaluated[0] == Action::Down);
  CHECK(first_evaluated[1] == Action::Left);
  CHECK(first_evaluated[2] == Action::Right);
}

TEST_CASE("planning is deterministic in the rng seed") {
  Env env{EnvConfig{}};
  const GameState s = env.reset(12);
  PlannerConfig cfg;
  cfg.horizon = 10;
  std::mt19937_64 r1(6), r2(6), r3(7);
  const auto a = plan(make_perfect_evaluator(env, s), std::nullopt, cfg, r1);
  const auto b = plan(make_perfect_evaluator(env, s), std::nullopt, cfg, r2);
  const auto c = plan(make_perfect_evaluator(env, s), std::nullopt, cfg, r3);
  CHECK(a.action == b.action);
  CHECK(a.best_sequence == b.best_sequence);
  CHECK(a.fitness == b.fitness);
  // different seed explores different sequences (action may coincide)
  CHECK((a.best_sequence != c.best_sequence || a.fitness == c.fitness));
}

TEST_CASE("learned rollout consolidates and accumulates over all T steps") {
  // a tiny model; we only verify plumbing invariants, not quality:
  // fitness equals the sum of the reward values of the consolidated steps
  ModelConfig mc;
  mc.num_heads = 2;
  mc.trunk_width = 3;
  const EnsembleModel model(mc, 14);
  Env env{EnvConfig{}};
  const GameState s = env.reset(3);
  PlannerConfig cfg;
  cfg.horizon = 4;
  cfg.consolidation = ConsolidationMode::Voting;

  const ActionSequence seq{Action::Up, Action::Left, Action::Down,
                           Action::Right};
  // manual re-run of the imagined rollout
  Frame frame = s.frame();
  double manual = 0;
  std::mt19937_64 mrng(0);
  for (Action a : seq) {
    const auto pred =
        EnsemblePrediction::from_head_outputs(model.forward_all_heads(frame, a));
    const UnifiedPrediction u = consolidate_average(pred);
    manual += kRewardValues[u.reward];
    frame = u.frame;
  }
  cfg.consolidation = ConsolidationMode::Average;
  std::mt19937_64 rng(0);
  const RolloutResult r = evaluate_sequence_learned(
      s.frame(), seq, model, cfg, ConstraintSet::from_frame(s.frame()), rng);
  CHECK(r.fitness == manual);
}

TEST_CASE("corrected rollouts keep exactly one pacman every imagined step") {
  ModelConfig mc;
  mc.num_heads = 3;
  mc.trunk_width = 3;
  const EnsembleModel model(mc, 44);  // untrained: messy frames guaranteed
  Env env{EnvConfig{}};
  const GameState s = env.reset(4);
  PlannerConfig cfg;
  cfg.horizon = 6;
  cfg.use_correction = true;

  // reproduce the rollout's frames through the public pieces
  Frame frame = s.frame();
  RolloutMemory memory = RolloutMemory::from_frame(frame);
  const ConstraintSet constraints = ConstraintSet::from_frame(frame);
  std::mt19937_64 rng(2);
  for (Action a : {Action::Up, Action::Left, Action::Down, Action::Right,
                   Action::Noop, Action::Up}) {
    const auto pred =
        EnsemblePrediction::from_head_outputs(model.forward_all_heads(frame, a));
    const UnifiedPrediction u = consolidate_vote(pred);
    const auto [corrected, next_memory] = apply_corrections(
        u.frame, pred, constraints, memory, ConsolidationMode::Voting, rng);
    CHECK(corrected.count(CellClass::Pacman) == 1);
    frame = corrected;
    memory = next_memory;
  }
}

TEST_CASE("perfect-model planning beats random play") {
  Env env{EnvConfig{}};
  PlannerConfig cfg;
  cfg.horizon = 10;
  std::mt19937_64 rng(100);

  double planned = 0, random_score = 0;
  const int episodes = 3;
  for (int e = 0; e < episodes; ++e) {
    GameState s = env.reset(200 + e);
    std::optional<ActionSequence> prev;
    while (!s.done) {
      const PlanOutcome out =
          plan(make_perfect_evaluator(env, s), prev, cfg, rng);
      env.step(s, out.action);
      prev = out.best_sequence;
    }
    planned += s.score;

    GameState t = env.reset(200 + e);
    while (!t.done) env.step(t, draw_action(rng));
    random_score += t.score;
  }
  CHECK(planned / episodes > random_score / episodes + 20);
}
