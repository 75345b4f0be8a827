#include "minipac/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace minipac::nn {

namespace {

double gaussian(std::mt19937_64& rng) {
  // Box-Muller on the engine's raw stream keeps init reproducible across
  // standard library implementations.
  double u1 = draw_unit(rng);
  while (u1 <= 0.0) u1 = draw_unit(rng);
  const double u2 = draw_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

Matrix im2col3x3(const Matrix& X, int batch) {
  const int C = static_cast<int>(X.rows());
  Matrix cols = Matrix::Zero(9 * C, static_cast<long>(batch) * kNumCells);
  for (int b = 0; b < batch; ++b) {
    const long base = static_cast<long>(b) * kNumCells;
    for (int t = 0; t < 9; ++t) {
      const int dr = t / 3 - 1, dc = t % 3 - 1;
      const int r0 = std::max(0, -dr), r1 = kFrameHeight - std::max(0, dr);
      for (int r = r0; r < r1; ++r) {
        // contiguous column run within one row
        const int c0 = std::max(0, -dc), c1 = kFrameWidth - std::max(0, dc);
        cols.block(t * C, base + r * kFrameWidth + c0, C, c1 - c0) =
            X.block(0, base + (r + dr) * kFrameWidth + (c0 + dc), C, c1 - c0);
      }
    }
  }
  return cols;
}

Matrix col2im3x3(const Matrix& cols, int channels, int batch) {
  const int C = channels;
  Matrix X = Matrix::Zero(C, static_cast<long>(batch) * kNumCells);
  for (int b = 0; b < batch; ++b) {
    const long base = static_cast<long>(b) * kNumCells;
    for (int t = 0; t < 9; ++t) {
      const int dr = t / 3 - 1, dc = t % 3 - 1;
      const int r0 = std::max(0, -dr), r1 = kFrameHeight - std::max(0, dr);
      for (int r = r0; r < r1; ++r) {
        const int c0 = std::max(0, -dc), c1 = kFrameWidth - std::max(0, dc);
        X.block(0, base + (r + dr) * kFrameWidth + (c0 + dc), C, c1 - c0) +=
            cols.block(t * C, base + r * kFrameWidth + c0, C, c1 - c0);
      }
    }
  }
  return X;
}

int Net::conv_in_channels(int layer) const {
  if (layer == 0) return cfg_.in_channels;
  if (layer == 1 && cfg_.pool_inject) return 3 * cfg_.width;
  return cfg_.width;
}

Net::Net(const NetConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
  if (cfg_.width < 1 || cfg_.trunk_layers < 1 || cfg_.num_heads < 1)
    throw std::invalid_argument("nn: bad NetConfig");

  int offset = 0;
  auto add = [&](const std::string& name, int rows, int cols, int head) {
    blocks_.push_back({name, offset, rows, cols, head});
    offset += rows * cols;
    return static_cast<int>(blocks_.size()) - 1;
  };
  for (int l = 0; l < cfg_.trunk_layers; ++l) {
    const int in = conv_in_channels(l) * 9;
    conv_w_.push_back(add("conv" + std::to_string(l) + ".w", cfg_.width, in, -1));
    conv_b_.push_back(add("conv" + std::to_string(l) + ".b", cfg_.width, 1, -1));
  }
  for (int k = 0; k < cfg_.num_heads; ++k) {
    const std::string h = "head" + std::to_string(k);
    head_sw_.push_back(add(h + ".state.w", kNumCellClasses, cfg_.width, k));
    head_sb_.push_back(add(h + ".state.b", kNumCellClasses, 1, k));
    head_rw_.push_back(add(h + ".reward.w", kNumRewardClasses, 2 * cfg_.width, k));
    head_rb_.push_back(add(h + ".reward.b", kNumRewardClasses, 1, k));
  }
  params_.assign(offset, 0.0);

  // He-normal weights, zero biases.
  for (const auto& b : blocks_) {
    if (b.cols == 1) continue;
    const double scale = std::sqrt(2.0 / b.cols);
    for (int i = 0; i < b.size(); ++i)
      params_[b.offset + i] = scale * gaussian(rng);
  }
}

const ParamBlock& Net::block(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw std::out_of_range("nn: no block " + name);
}

Matrix Net::encode_batch(const Frame* frames, const Action* actions,
                         int batch) {
  Matrix X = Matrix::Zero(kInputChannels, static_cast<long>(batch) * kNumCells);
  for (int b = 0; b < batch; ++b) {
    const long base = static_cast<long>(b) * kNumCells;
    const int a = kNumCellClasses + static_cast<int>(actions[b]);
    for (int i = 0; i < kNumCells; ++i) {
      X(static_cast<int>(frames[b].cells[i]), base + i) = 1.0;
      X(a, base + i) = 1.0;
    }
  }
  return X;
}

void Net::forward(const Matrix& X, ForwardCache& c) const {
  const int B = static_cast<int>(X.cols() / kNumCells);
  const int W = cfg_.width;
  c.batch = B;
  c.cols.resize(cfg_.trunk_layers);
  c.pre.resize(cfg_.trunk_layers);
  c.act.resize(cfg_.trunk_layers);

  const Matrix* cur = &X;
  for (int l = 0; l < cfg_.trunk_layers; ++l) {
    c.cols[l] = im2col3x3(*cur, B);
    c.pre[l] = (view(blocks_[conv_w_[l]]) * c.cols[l]).colwise() +
               view(blocks_[conv_b_[l]]).col(0);
    c.act[l] = c.pre[l].cwiseMax(0.0);

    if (l == 0 && cfg_.pool_inject && cfg_.trunk_layers > 1) {
      c.pi_out.resize(3 * W, B * kNumCells);
      c.pi_max_col.assign(static_cast<size_t>(B) * W, 0);
      for (int b = 0; b < B; ++b) {
        auto item = c.act[0].middleCols(b * kNumCells, kNumCells);
        c.pi_out.block(0, b * kNumCells, W, kNumCells) = item;
        for (int ch = 0; ch < W; ++ch) {
          int arg = 0;
          const double mx = item.row(ch).maxCoeff(&arg);
          c.pi_max_col[static_cast<size_t>(b) * W + ch] = arg;
          c.pi_out.block(W + ch, b * kNumCells, 1, kNumCells).setConstant(mx);
          c.pi_out.block(2 * W + ch, b * kNumCells, 1, kNumCells)
              .setConstant(item.row(ch).mean());
        }
      }
      cur = &c.pi_out;
    } else {
      cur = &c.act[l];
    }
  }

  const Matrix& trunk = c.act.back();
  c.pooled.resize(2 * W, B);
  c.pooled_max_col.assign(static_cast<size_t>(B) * W, 0);
  for (int b = 0; b < B; ++b) {
    auto item = trunk.middleCols(b * kNumCells, kNumCells);
    for (int ch = 0; ch < W; ++ch) {
      int arg = 0;
      c.pooled(ch, b) = item.row(ch).maxCoeff(&arg);
      c.pooled_max_col[static_cast<size_t>(b) * W + ch] = arg;
      c.pooled(W + ch, b) = item.row(ch).mean();
    }
  }

  c.state_logits.resize(cfg_.num_heads);
  c.reward_logits.resize(cfg_.num_heads);
  for (int k = 0; k < cfg_.num_heads; ++k) {
    c.state_logits[k] = (view(blocks_[head_sw_[k]]) * trunk).colwise() +
                        view(blocks_[head_sb_[k]]).col(0);
    c.reward_logits[k] = (view(blocks_[head_rw_[k]]) * c.pooled).colwise() +
                         view(blocks_[head_rb_[k]]).col(0);
  }
}

void Net::backward(const Matrix& X, const ForwardCache& c,
                   const std::vector<Matrix>& d_state,
                   const std::vector<Matrix>& d_reward,
                   const std::vector<bool>& head_active,
                   AlignedVec& grad) const {
  const int B = c.batch;
  const int W = cfg_.width;
  if (grad.size() != params_.size()) grad.assign(params_.size(), 0.0);

  const Matrix& trunk = c.act.back();
  Matrix d_trunk = Matrix::Zero(W, static_cast<long>(B) * kNumCells);
  Matrix d_pooled = Matrix::Zero(2 * W, B);

  for (int k = 0; k < cfg_.num_heads; ++k) {
    if (!head_active[k]) continue;
    view(blocks_[head_sw_[k]], grad).noalias() += d_state[k] * trunk.transpose();
    view(blocks_[head_sb_[k]], grad).col(0) += d_state[k].rowwise().sum();
    d_trunk.noalias() += view(blocks_[head_sw_[k]]).transpose() * d_state[k];

    view(blocks_[head_rw_[k]], grad).noalias() +=
        d_reward[k] * c.pooled.transpose();
    view(blocks_[head_rb_[k]], grad).col(0) += d_reward[k].rowwise().sum();
    d_pooled.noalias() += view(blocks_[head_rw_[k]]).transpose() * d_reward[k];
  }

  // Pooled features back into the trunk map.
  for (int b = 0; b < B; ++b) {
    auto dblk = d_trunk.middleCols(b * kNumCells, kNumCells);
    for (int ch = 0; ch < W; ++ch) {
      dblk(ch, c.pooled_max_col[static_cast<size_t>(b) * W + ch]) +=
          d_pooled(ch, b);
      dblk.row(ch).array() += d_pooled(W + ch, b) / kNumCells;
    }
  }

  // Trunk conv stack, last layer first.
  Matrix d_out = std::move(d_trunk);
  for (int l = cfg_.trunk_layers - 1; l >= 0; --l) {
    Matrix d_pre = (c.pre[l].array() > 0.0).select(d_out, 0.0);
    view(blocks_[conv_w_[l]], grad).noalias() +=
        d_pre * c.cols[l].transpose();
    view(blocks_[conv_b_[l]], grad).col(0) += d_pre.rowwise().sum();
    if (l == 0) break;  // input gradient not needed

    Matrix d_cols = view(blocks_[conv_w_[l]]).transpose() * d_pre;
    Matrix d_in = col2im3x3(d_cols, conv_in_channels(l), B);

    if (l == 1 && cfg_.pool_inject) {
      // d_in is w.r.t. [act0; max-broadcast; mean-broadcast].
      d_out = d_in.topRows(W);
      for (int b = 0; b < B; ++b) {
        auto dblk = d_out.middleCols(b * kNumCells, kNumCells);
        auto din_b = d_in.middleCols(b * kNumCells, kNumCells);
        for (int ch = 0; ch < W; ++ch) {
          dblk(ch, c.pi_max_col[static_cast<size_t>(b) * W + ch]) +=
              din_b.row(W + ch).sum();
          dblk.row(ch).array() += din_b.row(2 * W + ch).sum() / kNumCells;
        }
      }
    } else {
      d_out = std::move(d_in);
    }
  }
  (void)X;
}

}  // namespace minipac::nn
