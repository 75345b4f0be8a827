#pragma once

#include <optional>
#include <string>
#include <vector>

#include "minipac/nn.hpp"
#include "minipac/replay.hpp"
#include "minipac/types.hpp"

namespace minipac {

struct ModelConfig {
  int num_heads = 10;          // K
  double prior_scale = 3.0;    // beta
  bool use_prior = false;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int trunk_width = 12;
  int trunk_layers = 2;
  bool pool_inject = true;

  bool operator==(const ModelConfig&) const = default;
};

// Per-head prediction: cell-major state logits [cell*6 + class] and the
// 5-way reward class logits. Prior contributions (if any) are already added.
struct HeadOutput {
  std::vector<double> state_logits;   // kNumCells * 6
  std::vector<double> reward_logits;  // 5
};

struct TrainStats {
  std::vector<double> state_loss;   // per head, summed over masked items
  std::vector<double> reward_loss;  // per head
  std::vector<int> masked_items;    // per head
  double total_loss = 0.0;
};

// K-headed trainable transition/reward approximator with an optional fixed
// randomized-prior network of the same structure. Training mutates the
// trainable parameters only; a copied snapshot is safe to use concurrently.
class EnsembleModel {
 public:
  EnsembleModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // Head k logits: f_k(x), plus beta * p_k(x) when the prior is enabled.
  // Throws on non-finite activations.
  std::vector<HeadOutput> forward_all_heads(const Frame& frame,
                                            Action action) const;

  // Masked cross-entropy over next-state cells and reward class, one Adam
  // update. Head parameter blocks move only when at least one batch item
  // carries their mask bit. Throws on NaN/Inf loss.
  TrainStats train_step(const std::vector<TransitionRecord>& batch);

  // Objective value and its analytic gradient, no parameter update.
  TrainStats compute_gradients(const std::vector<TransitionRecord>& batch,
                               nn::AlignedVec& grad) const;
  double loss(const std::vector<TransitionRecord>& batch) const;

  nn::AlignedVec& trainable_params() { return net_.params(); }
  const nn::AlignedVec& trainable_params() const { return net_.params(); }
  // Empty when use_prior is false.
  const nn::AlignedVec& prior_params() const;

  const nn::Net& net() const { return net_; }

  void save(const std::string& path) const;
  static EnsembleModel load(const std::string& path);
  // Rejects a checkpoint whose config differs from `expected`.
  static EnsembleModel load_checked(const std::string& path,
                                    const ModelConfig& expected);

 private:
  nn::NetConfig net_config() const;
  TrainStats losses_and_logit_grads(const std::vector<TransitionRecord>& batch,
                                    nn::ForwardCache& cache,
                                    std::vector<nn::Matrix>& d_state,
                                    std::vector<nn::Matrix>& d_reward,
                                    std::vector<bool>& head_active,
                                    const nn::Matrix& X) const;

  ModelConfig cfg_;
  nn::Net net_;
  std::optional<nn::Net> prior_;

  // Lazy Adam: moments and step counter advance per block, only on steps
  // where the block received gradient.
  nn::AlignedVec adam_m_, adam_v_;
  std::vector<long> block_steps_;
};

}  // namespace minipac
