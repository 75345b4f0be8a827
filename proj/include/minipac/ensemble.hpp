#pragma once

#include <vector>

#include "minipac/model.hpp"
#include "minipac/types.hpp"

namespace minipac {

enum class ConsolidationMode : std::uint8_t { Average = 0, Voting = 1, Sampling = 2 };

ConsolidationMode consolidation_from_string(const std::string& s);
std::string to_string(ConsolidationMode m);

// The bootstrap/predictive distribution: softmaxed per-head class
// probabilities plus the per-head argmax predictions.
struct EnsemblePrediction {
  int num_heads = 0;
  std::vector<double> state_probs;        // [K][285][6]
  std::vector<double> reward_probs;       // [K][5]
  std::vector<std::uint8_t> state_argmax; // [K][285]
  std::vector<std::uint8_t> reward_argmax;// [K]

  double state_prob(int k, int cell, int cls) const {
    return state_probs[(static_cast<size_t>(k) * kNumCells + cell) *
                           kNumCellClasses +
                       cls];
  }
  CellClass head_cell(int k, int cell) const {
    return static_cast<CellClass>(
        state_argmax[static_cast<size_t>(k) * kNumCells + cell]);
  }

  static EnsemblePrediction from_head_outputs(
      const std::vector<HeadOutput>& heads);
};

// Structural game constraints are NOT guaranteed here; that is the error
// correction module's job.
struct UnifiedPrediction {
  Frame frame;
  RewardClass reward = 1;
};

// Argmax of the mean per-class probability (ties: lowest class index).
UnifiedPrediction consolidate_average(const EnsemblePrediction& pred);
// Mode over per-head argmax classes (ties: lowest class index).
UnifiedPrediction consolidate_vote(const EnsemblePrediction& pred);
// One head drawn uniformly; its argmax frame and reward taken jointly so the
// hypothesis stays coherent within the step.
UnifiedPrediction consolidate_sample(const EnsemblePrediction& pred,
                                     std::mt19937_64& rng);

UnifiedPrediction consolidate(const EnsemblePrediction& pred,
                              ConsolidationMode mode, std::mt19937_64& rng);

struct DisagreementStats {
  std::array<double, kNumCells> cell_disagreement{};  // non-modal head fraction
  double mean_reward_entropy = 0.0;                   // nats, averaged over heads
};

DisagreementStats disagreement_stats(const EnsemblePrediction& pred);

}  // namespace minipac
