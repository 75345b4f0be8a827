#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "minipac/env.hpp"
#include "minipac/model.hpp"
#include "minipac/planner.hpp"
#include "minipac/replay.hpp"

namespace minipac::harness {

struct ExperimentConfig {
  EnvConfig env;
  ModelConfig model;
  PlannerConfig planner;
  int train_steps = 20000;
  int warmup_steps = 1000;
  int buffer_capacity = 100000;
  int log_every = 100;
  int eval_episodes = 100;
  int plan_episodes = 10;
  std::vector<int> horizons{1, 5, 10, 20};
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  // Flat key=value text format; '#' starts a comment.
  static ExperimentConfig from_file(const std::string& path);
  void apply_override(const std::string& key, const std::string& value);
  void write(const std::string& path) const;
  std::string to_text() const;
};

// Sub-stream derivation so independent loops never share an rng.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct TrainResult {
  std::string checkpoint_path;
  std::string loss_log_path;
  double first_logged_loss = 0.0;
  double last_logged_loss = 0.0;
  long steps_trained = 0;
};

// Data-collection/training loop: random behavioural policy, masked pushes,
// one train step per
// environment step after warmup. Writes <out_dir>/<tag>.ckpt and
// <tag>_loss.csv; on divergence the partial log is preserved and the error
// rethrown.
TrainResult train(const ExperimentConfig& cfg, const std::string& tag);

struct AccuracyReport {
  std::map<std::string, double> category_accuracy;  // Food/Eaten/Pacman/Ghost
  double frame_accuracy = 0.0;
  double reward_accuracy = 0.0;
  std::map<std::string, double> constraint_fulfilment;  // Pacman/Ghost/Food
  long steps = 0;
  long total_cells = 0;
  long correct_cells = 0;
};

// Produces K head predictions for the coming transition. The GameState is the
// real current state; implementations must not mutate it.
using Predictor =
    std::function<EnsemblePrediction(const GameState&, Action)>;

// One-step prediction protocol: random-policy episodes, per-step memory reset
// from the real frame, recall-style per-category accuracy.
AccuracyReport eval_accuracy_core(const Predictor& predict, const Env& env,
                                  int episodes, ConsolidationMode mode,
                                  bool error_correction, std::uint64_t seed);

AccuracyReport eval_accuracy(const EnsembleModel& model, const Env& env,
                             int episodes, ConsolidationMode mode,
                             bool error_correction, std::uint64_t seed);

Predictor model_predictor(const EnsembleModel& model);
// Cheating upper-bound predictor: steps a clone of the real state.
Predictor oracle_predictor(const Env& env);

struct ScoreRow {
  std::string variant;
  std::string consolidation;
  bool error_correction = false;
  int horizon = 0;
  std::vector<int> scores;
  double mean = 0.0;
};

struct ScoreReport {
  std::vector<ScoreRow> rows;
};

ScoreRow eval_planning_learned(const EnsembleModel& model, const Env& env,
                               PlannerConfig planner, int horizon,
                               int episodes, std::uint64_t seed,
                               const std::string& variant);
ScoreRow eval_planning_perfect(const Env& env, PlannerConfig planner,
                               int horizon, int episodes, std::uint64_t seed);

// Deterministic CSV writers (fixed formatting, row order as given).
void write_score_csv(const ScoreReport& report, const std::string& path);
void write_accuracy_csv(
    const std::vector<std::pair<std::string, AccuracyReport>>& reports,
    const std::string& path);

struct CompareInputs {
  std::string sh_checkpoint;
  std::string btf_checkpoint;
  std::string rpf_checkpoint;
};

// Runs the accuracy grid {SH, BTF, BTF+RPF} x {Average,Voting,Sampling} x
// {EC on/off} and the planning grid over cfg.horizons, writing a summary
// metrics CSV (7 model columns, '-' for SH EC cells) and a score-grid CSV.
void compare_variants(const ExperimentConfig& cfg, const CompareInputs& in,
                      bool include_planning);

std::string frame_to_ascii(const Frame& f);

}  // namespace minipac::harness
