#include "minipac/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace minipac {

namespace {

constexpr std::uint32_t kMagic = 0x4b43504d;  // "MPCK"
constexpr std::uint32_t kVersion = 1;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// Column-wise softmax cross-entropy. Returns the summed loss over columns and
// writes softmax(col) - onehot(target) into d (same shape as logits).
double softmax_ce(const nn::Matrix& logits, const int* targets, int n_cols,
                  long col0, nn::Matrix& d, long dcol0) {
  double loss = 0.0;
  const int C = static_cast<int>(logits.rows());
  for (int j = 0; j < n_cols; ++j) {
    const auto col = logits.col(col0 + j);
    const double mx = col.maxCoeff();
    double z = 0.0;
    for (int i = 0; i < C; ++i) z += std::exp(col(i) - mx);
    const double logz = std::log(z) + mx;
    loss += logz - col(targets[j]);
    for (int i = 0; i < C; ++i)
      d(i, dcol0 + j) = std::exp(col(i) - logz);
    d(targets[j], dcol0 + j) -= 1.0;
  }
  return loss;
}

}  // namespace

nn::NetConfig EnsembleModel::net_config() const {
  nn::NetConfig nc;
  nc.width = cfg_.trunk_width;
  nc.trunk_layers = cfg_.trunk_layers;
  nc.pool_inject = cfg_.pool_inject;
  nc.num_heads = cfg_.num_heads;
  return nc;
}

EnsembleModel::EnsembleModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg) {
  if (cfg_.num_heads < 1 || cfg_.num_heads > 64)
    throw std::invalid_argument("model: num_heads out of [1,64]");
  if (cfg_.prior_scale < 0.0)
    throw std::invalid_argument("model: prior_scale < 0");

  std::mt19937_64 rng(seed);
  net_ = nn::Net(net_config(), rng);
  if (cfg_.use_prior) {
    // Independent stream so toggling the prior does not disturb the
    // trainable initialisation.
    std::mt19937_64 prior_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    prior_.emplace(net_config(), prior_rng);
  }
  adam_m_.assign(net_.params().size(), 0.0);
  adam_v_.assign(net_.params().size(), 0.0);
  block_steps_.assign(net_.blocks().size(), 0);
}

const nn::AlignedVec& EnsembleModel::prior_params() const {
  static const nn::AlignedVec empty;
  return prior_ ? prior_->params() : empty;
}

std::vector<HeadOutput> EnsembleModel::forward_all_heads(const Frame& frame,
                                                         Action action) const {
  const nn::Matrix X = nn::Net::encode_batch(&frame, &action, 1);
  nn::ForwardCache c, pc;
  net_.forward(X, c);
  if (prior_) prior_->forward(X, pc);

  std::vector<HeadOutput> out(cfg_.num_heads);
  for (int k = 0; k < cfg_.num_heads; ++k) {
    nn::Matrix s = c.state_logits[k];
    nn::Matrix r = c.reward_logits[k];
    if (prior_) {
      s += cfg_.prior_scale * pc.state_logits[k];
      r += cfg_.prior_scale * pc.reward_logits[k];
    }
    if (!s.allFinite() || !r.allFinite())
      throw std::runtime_error("model: non-finite activations (divergence)");
    out[k].state_logits.resize(kNumCells * kNumCellClasses);
    for (int i = 0; i < kNumCells; ++i)
      for (int cidx = 0; cidx < kNumCellClasses; ++cidx)
        out[k].state_logits[i * kNumCellClasses + cidx] = s(cidx, i);
    out[k].reward_logits.assign(r.data(), r.data() + kNumRewardClasses);
  }
  return out;
}

TrainStats EnsembleModel::losses_and_logit_grads(
    const std::vector<TransitionRecord>& batch, nn::ForwardCache& c,
    std::vector<nn::Matrix>& d_state, std::vector<nn::Matrix>& d_reward,
    std::vector<bool>& head_active, const nn::Matrix& X) const {
  const int B = static_cast<int>(batch.size());
  const int K = cfg_.num_heads;

  net_.forward(X, c);
  nn::ForwardCache pc;
  if (prior_) prior_->forward(X, pc);

  std::vector<int> state_targets(static_cast<size_t>(B) * kNumCells);
  std::vector<int> reward_targets(B);
  for (int b = 0; b < B; ++b) {
    for (int i = 0; i < kNumCells; ++i)
      state_targets[static_cast<size_t>(b) * kNumCells + i] =
          static_cast<int>(batch[b].s_next.cells[i]);
    reward_targets[b] = static_cast<int>(batch[b].r);
  }

  TrainStats stats;
  stats.state_loss.assign(K, 0.0);
  stats.reward_loss.assign(K, 0.0);
  stats.masked_items.assign(K, 0);
  d_state.assign(K, nn::Matrix());
  d_reward.assign(K, nn::Matrix());
  head_active.assign(K, false);

  for (int k = 0; k < K; ++k) {
    nn::Matrix s = c.state_logits[k];
    nn::Matrix r = c.reward_logits[k];
    if (prior_) {
      s += cfg_.prior_scale * pc.state_logits[k];
      r += cfg_.prior_scale * pc.reward_logits[k];
    }
    d_state[k] = nn::Matrix::Zero(kNumCellClasses, s.cols());
    d_reward[k] = nn::Matrix::Zero(kNumRewardClasses, r.cols());
    for (int b = 0; b < B; ++b) {
      if (!(batch[b].mask >> k & 1)) continue;
      head_active[k] = true;
      ++stats.masked_items[k];
      stats.state_loss[k] += softmax_ce(
          s, state_targets.data() + static_cast<size_t>(b) * kNumCells,
          kNumCells, static_cast<long>(b) * kNumCells, d_state[k],
          static_cast<long>(b) * kNumCells);
      stats.reward_loss[k] +=
          softmax_ce(r, reward_targets.data() + b, 1, b, d_reward[k], b);
    }
    stats.total_loss += stats.state_loss[k] + stats.reward_loss[k];
  }
  return stats;
}

TrainStats EnsembleModel::compute_gradients(
    const std::vector<TransitionRecord>& batch,
    nn::AlignedVec& grad) const {
  if (batch.empty()) throw std::invalid_argument("model: empty batch");
  std::vector<Frame> frames(batch.size());
  std::vector<Action> actions(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    frames[i] = batch[i].s;
    actions[i] = batch[i].a;
  }
  const nn::Matrix X = nn::Net::encode_batch(frames.data(), actions.data(),
                                             static_cast<int>(batch.size()));
  nn::ForwardCache c;
  std::vector<nn::Matrix> d_state, d_reward;
  std::vector<bool> head_active;
  TrainStats stats =
      losses_and_logit_grads(batch, c, d_state, d_reward, head_active, X);
  grad.assign(net_.params().size(), 0.0);
  net_.backward(X, c, d_state, d_reward, head_active, grad);
  return stats;
}

double EnsembleModel::loss(const std::vector<TransitionRecord>& batch) const {
  std::vector<Frame> frames(batch.size());
  std::vector<Action> actions(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    frames[i] = batch[i].s;
    actions[i] = batch[i].a;
  }
  const nn::Matrix X = nn::Net::encode_batch(frames.data(), actions.data(),
                                             static_cast<int>(batch.size()));
  nn::ForwardCache c;
  std::vector<nn::Matrix> d_state, d_reward;
  std::vector<bool> head_active;
  return losses_and_logit_grads(batch, c, d_state, d_reward, head_active, X)
      .total_loss;
}

TrainStats EnsembleModel::train_step(
    const std::vector<TransitionRecord>& batch) {
  nn::AlignedVec grad;
  TrainStats stats = compute_gradients(batch, grad);
  if (!std::isfinite(stats.total_loss))
    throw std::runtime_error("model: NaN/Inf loss, aborting training");

  bool any_active = false;
  for (int n : stats.masked_items) any_active |= n > 0;

  auto& params = net_.params();
  const auto& blocks = net_.blocks();
  for (size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& blk = blocks[bi];
    const bool active = blk.head < 0 ? any_active
                                     : stats.masked_items[blk.head] > 0;
    if (!active) continue;
    const long t = ++block_steps_[bi];
    const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
    const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
    for (int i = blk.offset; i < blk.offset + blk.size(); ++i) {
      adam_m_[i] = kAdamBeta1 * adam_m_[i] + (1.0 - kAdamBeta1) * grad[i];
      adam_v_[i] =
          kAdamBeta2 * adam_v_[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
      params[i] -= cfg_.learning_rate * (adam_m_[i] / bc1) /
                   (std::sqrt(adam_v_[i] / bc2) + kAdamEps);
    }
  }
  return stats;
}

void EnsembleModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("model: cannot write " + path);
  auto put32 = [&](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  };
  auto put64f = [&](double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  };
  put32(kMagic);
  put32(kVersion);
  put32(static_cast<std::uint32_t>(cfg_.num_heads));
  put32(cfg_.use_prior ? 1 : 0);
  put32(static_cast<std::uint32_t>(cfg_.trunk_width));
  put32(static_cast<std::uint32_t>(cfg_.trunk_layers));
  put32(cfg_.pool_inject ? 1 : 0);
  put32(static_cast<std::uint32_t>(cfg_.batch_size));
  put64f(cfg_.prior_scale);
  put64f(cfg_.learning_rate);

  auto put_params = [&](const nn::AlignedVec& p) {
    const std::uint64_t n = p.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(p.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
  };
  put_params(net_.params());
  put_params(prior_params());
}

EnsembleModel EnsembleModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("model: cannot open " + path);
  auto get32 = [&] {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  auto get64f = [&] {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  if (get32() != kMagic) throw std::runtime_error("model: bad magic");
  if (get32() != kVersion) throw std::runtime_error("model: bad version");
  ModelConfig cfg;
  cfg.num_heads = static_cast<int>(get32());
  cfg.use_prior = get32() != 0;
  cfg.trunk_width = static_cast<int>(get32());
  cfg.trunk_layers = static_cast<int>(get32());
  cfg.pool_inject = get32() != 0;
  cfg.batch_size = static_cast<int>(get32());
  cfg.prior_scale = get64f();
  cfg.learning_rate = get64f();

  EnsembleModel m(cfg, 0);
  auto get_params = [&](nn::AlignedVec& p) {
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (n != p.size())
      throw std::runtime_error("model: parameter count mismatch");
    in.read(reinterpret_cast<char*>(p.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  };
  get_params(m.net_.params());
  if (cfg.use_prior) {
    get_params(m.prior_->params());
  } else {
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (n != 0) throw std::runtime_error("model: unexpected prior block");
  }
  if (!in) throw std::runtime_error("model: truncated checkpoint");
  return m;
}

EnsembleModel EnsembleModel::load_checked(const std::string& path,
                                          const ModelConfig& expected) {
  EnsembleModel m = load(path);
  if (!(m.cfg_ == expected))
    throw std::runtime_error("model: checkpoint config mismatch for " + path);
  return m;
}

}  // namespace minipac
