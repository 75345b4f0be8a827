#include "minipac/ensemble.hpp"

#include <cmath>
#include <stdexcept>

namespace minipac {

ConsolidationMode consolidation_from_string(const std::string& s) {
  if (s == "average") return ConsolidationMode::Average;
  if (s == "voting") return ConsolidationMode::Voting;
  if (s == "sampling") return ConsolidationMode::Sampling;
  throw std::invalid_argument("unknown consolidation mode: " + s);
}

std::string to_string(ConsolidationMode m) {
  switch (m) {
    case ConsolidationMode::Average: return "average";
    case ConsolidationMode::Voting: return "voting";
    case ConsolidationMode::Sampling: return "sampling";
  }
  return "?";
}

namespace {

// Softmax into `out`; returns the argmax with lowest-index tie-breaking.
int softmax(const double* logits, int n, double* out) {
  double mx = logits[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
  double z = 0.0;
  for (int i = 0; i < n; ++i) z += (out[i] = std::exp(logits[i] - mx));
  int arg = 0;
  for (int i = 0; i < n; ++i) {
    out[i] /= z;
    if (out[i] > out[arg]) arg = i;
  }
  return arg;
}

template <int N>
int argmax_lowest(const std::array<double, N>& v) {
  int arg = 0;
  for (int i = 1; i < N; ++i)
    if (v[i] > v[arg]) arg = i;
  return arg;
}

template <int N>
int mode_lowest(const std::array<int, N>& counts) {
  int arg = 0;
  for (int i = 1; i < N; ++i)
    if (counts[i] > counts[arg]) arg = i;
  return arg;
}

}  // namespace

EnsemblePrediction EnsemblePrediction::from_head_outputs(
    const std::vector<HeadOutput>& heads) {
  EnsemblePrediction p;
  p.num_heads = static_cast<int>(heads.size());
  p.state_probs.resize(static_cast<size_t>(p.num_heads) * kNumCells *
                       kNumCellClasses);
  p.reward_probs.resize(static_cast<size_t>(p.num_heads) * kNumRewardClasses);
  p.state_argmax.resize(static_cast<size_t>(p.num_heads) * kNumCells);
  p.reward_argmax.resize(p.num_heads);
  for (int k = 0; k < p.num_heads; ++k) {
    for (int i = 0; i < kNumCells; ++i) {
      const size_t off =
          (static_cast<size_t>(k) * kNumCells + i) * kNumCellClasses;
      p.state_argmax[static_cast<size_t>(k) * kNumCells + i] =
          static_cast<std::uint8_t>(
              softmax(heads[k].state_logits.data() + i * kNumCellClasses,
                      kNumCellClasses, p.state_probs.data() + off));
    }
    p.reward_argmax[k] = static_cast<std::uint8_t>(softmax(
        heads[k].reward_logits.data(), kNumRewardClasses,
        p.reward_probs.data() + static_cast<size_t>(k) * kNumRewardClasses));
  }
  return p;
}

UnifiedPrediction consolidate_average(const EnsemblePrediction& p) {
  UnifiedPrediction u;
  const double inv_k = 1.0 / p.num_heads;
  for (int i = 0; i < kNumCells; ++i) {
    std::array<double, kNumCellClasses> mean{};
    for (int k = 0; k < p.num_heads; ++k)
      for (int c = 0; c < kNumCellClasses; ++c)
        mean[c] += inv_k * p.state_prob(k, i, c);
    u.frame.cells[i] =
        static_cast<CellClass>(argmax_lowest<kNumCellClasses>(mean));
  }
  std::array<double, kNumRewardClasses> rmean{};
  for (int k = 0; k < p.num_heads; ++k)
    for (int c = 0; c < kNumRewardClasses; ++c)
      rmean[c] +=
          inv_k *
          p.reward_probs[static_cast<size_t>(k) * kNumRewardClasses + c];
  u.reward =
      static_cast<RewardClass>(argmax_lowest<kNumRewardClasses>(rmean));
  return u;
}

UnifiedPrediction consolidate_vote(const EnsemblePrediction& p) {
  UnifiedPrediction u;
  for (int i = 0; i < kNumCells; ++i) {
    std::array<int, kNumCellClasses> counts{};
    for (int k = 0; k < p.num_heads; ++k)
      ++counts[static_cast<int>(p.head_cell(k, i))];
    u.frame.cells[i] =
        static_cast<CellClass>(mode_lowest<kNumCellClasses>(counts));
  }
  std::array<int, kNumRewardClasses> rcounts{};
  for (int k = 0; k < p.num_heads; ++k) ++rcounts[p.reward_argmax[k]];
  u.reward =
      static_cast<RewardClass>(mode_lowest<kNumRewardClasses>(rcounts));
  return u;
}

UnifiedPrediction consolidate_sample(const EnsemblePrediction& p,
                                     std::mt19937_64& rng) {
  UnifiedPrediction u;
  const int k = static_cast<int>(draw_bounded(rng, p.num_heads));
  for (int i = 0; i < kNumCells; ++i) u.frame.cells[i] = p.head_cell(k, i);
  u.reward = p.reward_argmax[k];
  return u;
}

UnifiedPrediction consolidate(const EnsemblePrediction& p,
                              ConsolidationMode mode, std::mt19937_64& rng) {
  switch (mode) {
    case ConsolidationMode::Average: return consolidate_average(p);
    case ConsolidationMode::Voting: return consolidate_vote(p);
    case ConsolidationMode::Sampling: return consolidate_sample(p, rng);
  }
  throw std::logic_error("consolidate: bad mode");
}

DisagreementStats disagreement_stats(const EnsemblePrediction& p) {
  DisagreementStats d;
  for (int i = 0; i < kNumCells; ++i) {
    std::array<int, kNumCellClasses> counts{};
    for (int k = 0; k < p.num_heads; ++k)
      ++counts[static_cast<int>(p.head_cell(k, i))];
    const int modal = counts[mode_lowest<kNumCellClasses>(counts)];
    d.cell_disagreement[i] =
        static_cast<double>(p.num_heads - modal) / p.num_heads;
  }
  double h = 0.0;
  for (int k = 0; k < p.num_heads; ++k) {
    for (int c = 0; c < kNumRewardClasses; ++c) {
      const double q =
          p.reward_probs[static_cast<size_t>(k) * kNumRewardClasses + c];
      if (q > 0.0) h -= q * std::log(q);
    }
  }
  d.mean_reward_entropy = h / p.num_heads;
  return d;
}

}  // namespace minipac
