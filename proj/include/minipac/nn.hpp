#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "minipac/types.hpp"

namespace minipac::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
// 64-byte aligned so Eigen picks the same GEMM path on every allocation;
// results stay bitwise reproducible run to run.
using AlignedVec = std::vector<double, Eigen::aligned_allocator<double>>;

// Convolutional trunk shared by K heads. Each head emits per-cell class
// logits (1x1 conv over the trunk features) and reward logits (linear layer
// over max+mean pooled trunk features).
struct NetConfig {
  int in_channels = kInputChannels;
  int width = 12;          // trunk channels
  int trunk_layers = 2;    // number of 3x3 convolutions
  bool pool_inject = true; // broadcast pooled features back after conv 0
  int num_heads = 10;
};

// Contiguous slice of the flat parameter vector. head == -1 for trunk blocks.
struct ParamBlock {
  std::string name;
  int offset = 0;
  int rows = 0;
  int cols = 0;
  int head = -1;
  int size() const { return rows * cols; }
};

// Activations and intermediates for one batched forward pass. Feature maps
// are (channels x B*kNumCells); item b occupies columns [b*285, (b+1)*285).
struct ForwardCache {
  int batch = 0;
  std::vector<Matrix> cols;     // im2col input of each conv layer
  std::vector<Matrix> pre;      // pre-activation of each conv layer
  std::vector<Matrix> act;      // post-ReLU of each conv layer
  Matrix pi_out;                // pool-and-inject output (3W x B*285)
  std::vector<int> pi_max_col;  // argmax column per (item, channel)
  Matrix pooled;                // [max; mean] of trunk features (2W x B)
  std::vector<int> pooled_max_col;
  std::vector<Matrix> state_logits;   // per head: 6 x B*285
  std::vector<Matrix> reward_logits;  // per head: 5 x B
};

class Net {
 public:
  Net() = default;
  Net(const NetConfig& cfg, std::mt19937_64& rng);

  const NetConfig& config() const { return cfg_; }
  AlignedVec& params() { return params_; }
  const AlignedVec& params() const { return params_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(const std::string& name) const;

  // X is (in_channels x B*kNumCells), one-hot encoded input frames.
  void forward(const Matrix& X, ForwardCache& cache) const;

  // Accumulates d(loss)/d(params) into grad (same layout as params()).
  // d_state[k] / d_reward[k] must be zeroed at unmasked (item, head) pairs;
  // heads with no masked item may be skipped via head_active.
  void backward(const Matrix& X, const ForwardCache& cache,
                const std::vector<Matrix>& d_state,
                const std::vector<Matrix>& d_reward,
                const std::vector<bool>& head_active,
                AlignedVec& grad) const;

  static Matrix encode_batch(const Frame* frames, const Action* actions,
                             int batch);

 private:
  Eigen::Map<const Matrix> view(const ParamBlock& b) const {
    return {params_.data() + b.offset, b.rows, b.cols};
  }
  static Eigen::Map<Matrix> view(const ParamBlock& b, AlignedVec& v) {
    return {v.data() + b.offset, b.rows, b.cols};
  }

  int conv_in_channels(int layer) const;

  NetConfig cfg_;
  AlignedVec params_;
  std::vector<ParamBlock> blocks_;
  std::vector<int> conv_w_, conv_b_;            // block indices per conv layer
  std::vector<int> head_sw_, head_sb_, head_rw_, head_rb_;
};

// Zero-padded 3x3 im2col respecting item boundaries:
// X (C x B*285) -> (9C x B*285).
Matrix im2col3x3(const Matrix& X, int batch);
// Transpose operation of im2col3x3 (gradient scatter).
Matrix col2im3x3(const Matrix& cols, int channels, int batch);

}  // namespace minipac::nn
