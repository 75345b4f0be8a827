#include <doctest.h>

#include <cmath>

#include "minipac/ensemble.hpp"

using namespace minipac;

namespace {

// Heads whose logits are log-probabilities, so softmax recovers them exactly.
EnsemblePrediction from_probs(
    const std::vector<std::array<double, 6>>& cell0_probs,
    const std::vector<std::array<double, 5>>& reward_probs) {
  const int K = static_cast<int>(cell0_probs.size());
  std::vector<HeadOutput> heads(K);
  for (int k = 0; k < K; ++k) {
    heads[k].state_logits.assign(kNumCells * 6, 0.0);
    heads[k].reward_logits.assign(5, 0.0);
    for (int c = 0; c < 6; ++c)
      heads[k].state_logits[c] = std::log(cell0_probs[k][c] + 1e-300);
    // remaining cells: all heads certain of Wall
    for (int i = 1; i < kNumCells; ++i) {
      for (int c = 0; c < 6; ++c) heads[k].state_logits[i * 6 + c] = -30.0;
      heads[k].state_logits[i * 6 + 0] = 0.0;
    }
    for (int c = 0; c < 5; ++c)
      heads[k].reward_logits[c] = std::log(reward_probs[k][c] + 1e-300);
  }
  return EnsemblePrediction::from_head_outputs(heads);
}

}  // namespace

TEST_CASE("softmax probabilities are recovered and normalized") {
  const auto pred = from_probs({{0.1, 0.2, 0.3, 0.15, 0.15, 0.1}},
                               {{0.2, 0.2, 0.2, 0.2, 0.2}});
  for (int c = 0; c < 6; ++c)
    CHECK(pred.state_prob(0, 0, c) ==
          doctest::Approx(std::array<double, 6>{0.1, 0.2, 0.3, 0.15, 0.15,
                                                0.1}[c])
              .epsilon(1e-9));
  double sum = 0;
  for (int c = 0; c < 6; ++c) sum += pred.state_prob(0, 0, c);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pred.head_cell(0, 0) == CellClass::Eaten);  // argmax class 2
}

TEST_CASE("average consolidation takes the argmax of the mean") {
  // mean over two heads at cell 0: class1 = (0.6+0.1)/2 = .35,
  // class2 = (0.3+0.8)/2 = .55 -> Eaten wins even though head 0 says Food
  const auto pred = from_probs(
      {{0.05, 0.6, 0.3, 0.02, 0.02, 0.01}, {0.05, 0.1, 0.8, 0.02, 0.02, 0.01}},
      {{0.5, 0.3, 0.1, 0.05, 0.05}, {0.1, 0.2, 0.6, 0.05, 0.05}});
  const UnifiedPrediction u = consolidate_average(pred);
  CHECK(u.frame.cells[0] == CellClass::Eaten);
  CHECK(u.frame.cells[1] == CellClass::Wall);
  // mean reward probs: class0 = .3, class1 = .25, class2 = .35 -> class 2
  CHECK(u.reward == 2);
}

TEST_CASE("average ties resolve to the lowest class index") {
  const auto pred = from_probs({{0.4, 0.4, 0.1, 0.05, 0.03, 0.02}},
                               {{0.3, 0.3, 0.3, 0.05, 0.05}});
  const UnifiedPrediction u = consolidate_average(pred);
  CHECK(u.frame.cells[0] == CellClass::Wall);
  CHECK(u.reward == 0);
}

TEST_CASE("voting takes the modal argmax across heads") {
  // argmaxes: Food, Food, Eaten -> Food despite Eaten's high confidence
  const auto pred = from_probs({{0.0, 0.51, 0.49, 0.0, 0.0, 0.0},
                                {0.0, 0.51, 0.49, 0.0, 0.0, 0.0},
                                {0.0, 0.01, 0.99, 0.0, 0.0, 0.0}},
                               {{0.9, 0.1, 0.0, 0.0, 0.0},
                                {0.1, 0.9, 0.0, 0.0, 0.0},
                                {0.1, 0.9, 0.0, 0.0, 0.0}});
  const UnifiedPrediction u = consolidate_vote(pred);
  CHECK(u.frame.cells[0] == CellClass::Food);
  CHECK(u.reward == 1);
  // average would pick Eaten at cell 0: mean class2 = .657 > class1 = .343
  CHECK(consolidate_average(pred).frame.cells[0] == CellClass::Eaten);
}

TEST_CASE("vote ties resolve to the lowest class index") {
  const auto pred = from_probs(
      {{0.0, 0.9, 0.1, 0.0, 0.0, 0.0}, {0.0, 0.1, 0.9, 0.0, 0.0, 0.0}},
      {{0.9, 0.1, 0.0, 0.0, 0.0}, {0.1, 0.9, 0.0, 0.0, 0.0}});
  const UnifiedPrediction u = consolidate_vote(pred);
  CHECK(u.frame.cells[0] == CellClass::Food);  // classes 1 and 2 tie -> 1
  CHECK(u.reward == 0);
}

TEST_CASE("sampling draws whole heads uniformly and coherently") {
  // head 0 pairs Food with reward 0; head 1 pairs Eaten with reward 1
  const auto pred = from_probs(
      {{0.0, 0.9, 0.1, 0.0, 0.0, 0.0}, {0.0, 0.1, 0.9, 0.0, 0.0, 0.0}},
      {{0.9, 0.1, 0.0, 0.0, 0.0}, {0.1, 0.9, 0.0, 0.0, 0.0}});
  std::mt19937_64 rng(17);
  int food = 0, eaten = 0, incoherent = 0;
  const int trials = 4000;
  for (int i = 0; i < trials; ++i) {
    const UnifiedPrediction u = consolidate_sample(pred, rng);
    if (u.frame.cells[0] == CellClass::Food) {
      ++food;
      incoherent += u.reward != 0;
    } else {
      ++eaten;
      incoherent += u.reward != 1;
    }
  }
  CHECK(incoherent == 0);
  // binomial(4000, .5): 3.5 sigma ~ 111
  CHECK(food > trials / 2 - 111);
  CHECK(food < trials / 2 + 111);
  CHECK(food + eaten == trials);
}

TEST_CASE("unanimous heads make all modes agree") {
  const auto pred = from_probs(
      {{0.0, 0.0, 0.0, 0.0, 0.9, 0.1}, {0.0, 0.0, 0.0, 0.0, 0.8, 0.2}},
      {{0.0, 0.0, 0.7, 0.2, 0.1}, {0.0, 0.0, 0.6, 0.3, 0.1}});
  std::mt19937_64 rng(0);
  const auto a = consolidate(pred, ConsolidationMode::Average, rng);
  const auto v = consolidate(pred, ConsolidationMode::Voting, rng);
  const auto s = consolidate(pred, ConsolidationMode::Sampling, rng);
  CHECK(a.frame.cells == v.frame.cells);
  CHECK(a.frame.cells == s.frame.cells);
  CHECK(a.frame.cells[0] == CellClass::Pacman);
  CHECK(a.reward == 2);
  CHECK(v.reward == 2);
  CHECK(s.reward == 2);
}

TEST_CASE("consolidate dispatcher matches the direct calls") {
  const auto pred = from_probs(
      {{0.1, 0.5, 0.2, 0.1, 0.05, 0.05}, {0.3, 0.1, 0.4, 0.1, 0.05, 0.05}},
      {{0.5, 0.2, 0.1, 0.1, 0.1}, {0.1, 0.2, 0.5, 0.1, 0.1}});
  std::mt19937_64 r1(5), r2(5);
  CHECK(consolidate(pred, ConsolidationMode::Average, r1).frame.cells ==
        consolidate_average(pred).frame.cells);
  CHECK(consolidate(pred, ConsolidationMode::Voting, r1).frame.cells ==
        consolidate_vote(pred).frame.cells);
  std::mt19937_64 r3(9), r4(9);
  CHECK(consolidate(pred, ConsolidationMode::Sampling, r3).frame.cells ==
        consolidate_sample(pred, r4).frame.cells);
}

TEST_CASE("mode string conversions roundtrip") {
  for (auto m : {ConsolidationMode::Average, ConsolidationMode::Voting,
                 ConsolidationMode::Sampling})
    CHECK(consolidation_from_string(to_string(m)) == m);
  CHECK_THROWS(consolidation_from_string("bogus"));
}

TEST_CASE("disagreement stats recount the head votes") {
  // cell 0: argmaxes Food, Food, Eaten -> 1/3 non-modal
  const auto pred = from_probs({{0.0, 0.9, 0.1, 0.0, 0.0, 0.0},
                                {0.0, 0.8, 0.2, 0.0, 0.0, 0.0},
                                {0.0, 0.1, 0.9, 0.0, 0.0, 0.0}},
                               {{1.0, 0.0, 0.0, 0.0, 0.0},
                                {1.0, 0.0, 0.0, 0.0, 0.0},
                                {0.5, 0.5, 0.0, 0.0, 0.0}});
  const DisagreementStats st = disagreement_stats(pred);
  CHECK(st.cell_disagreement[0] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(st.cell_disagreement[1] == 0.0);
  // reward entropy in nats: two certain heads (0) and one fair coin (ln 2)
  CHECK(st.mean_reward_entropy ==
        doctest::Approx(std::log(2.0) / 3).epsilon(1e-9));
}
