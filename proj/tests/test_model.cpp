#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numeric>

#include "minipac/env.hpp"
#include "minipac/model.hpp"

using namespace minipac;

namespace {

ModelConfig tiny_config(int heads = 3) {
  ModelConfig cfg;
  cfg.num_heads = heads;
  cfg.trunk_width = 4;
  cfg.trunk_layers = 2;
  cfg.pool_inject = true;
  return cfg;
}

std::vector<TransitionRecord> collect_batch(int n, std::uint64_t seed,
                                            int num_heads) {
  Env env{EnvConfig{}};
  ReplayBuffer buf(n, num_heads);
  std::mt19937_64 rng(seed);
  GameState s = env.reset(seed);
  Frame prev = s.frame();
  for (int i = 0; i < n; ++i) {
    const Action a = draw_action(rng);
    const StepResult r = env.step(s, a);
    buf.push(prev, a, r.reward_class, s.frame(), r.done, rng);
    prev = s.frame();
    if (r.done) {
      s = env.reset(seed + 1000 + i);
      prev = s.frame();
    }
  }
  std::mt19937_64 srng(seed ^ 1);
  return buf.sample_minibatch(n, srng);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("initialization is deterministic in the seed") {
  const auto cfg = tiny_config();
  EnsembleModel a(cfg, 11), b(cfg, 11), c(cfg, 12);
  CHECK(a.trainable_params() == b.trainable_params());
  CHECK(a.trainable_params() != c.trainable_params());
}

TEST_CASE("output shapes and finiteness") {
  auto cfg = tiny_config(4);
  cfg.use_prior = true;
  const EnsembleModel m(cfg, 3);
  Env env{EnvConfig{}};
  const GameState s = env.reset(0);
  const auto heads = m.forward_all_heads(s.frame(), Action::Left);
  REQUIRE(heads.size() == 4);
  for (const auto& h : heads) {
    REQUIRE(h.state_logits.size() == static_cast<size_t>(kNumCells * 6));
    REQUIRE(h.reward_logits.size() == 5);
    for (double v : h.state_logits) CHECK(std::isfinite(v));
    for (double v : h.reward_logits) CHECK(std::isfinite(v));
  }
}

TEST_CASE("heads differ from each other at initialization") {
  const EnsembleModel m(tiny_config(3), 5);
  Env env{EnvConfig{}};
  const auto heads = m.forward_all_heads(env.reset(0).frame(), Action::Up);
  CHECK(max_abs_diff(heads[0].state_logits, heads[1].state_logits) > 1e-6);
  CHECK(max_abs_diff(heads[1].state_logits, heads[2].state_logits) > 1e-6);
}

TEST_CASE("zero prior scale matches the prior-free model") {
  auto with = tiny_config();
  with.use_prior = true;
  with.prior_scale = 0.0;
  auto without = tiny_config();
  const EnsembleModel a(with, 21), b(without, 21);
  Env env{EnvConfig{}};
  const Frame f = env.reset(4).frame();
  const auto ha = a.forward_all_heads(f, Action::Down);
  const auto hb = b.forward_all_heads(f, Action::Down);
  for (int k = 0; k < 3; ++k) {
    CHECK(max_abs_diff(ha[k].state_logits, hb[k].state_logits) == 0.0);
    CHECK(max_abs_diff(ha[k].reward_logits, hb[k].reward_logits) == 0.0);
  }
}

TEST_CASE("prior shifts logits by beta times the prior network output") {
  auto c1 = tiny_config();
  c1.use_prior = true;
  c1.prior_scale = 1.0;
  auto c2 = c1;
  c2.prior_scale = 2.5;
  auto c0 = c1;
  c0.prior_scale = 0.0;
  const EnsembleModel m0(c0, 8), m1(c1, 8), m2(c2, 8);
  Env env{EnvConfig{}};
  const Frame f = env.reset(6).frame();
  const auto h0 = m0.forward_all_heads(f, Action::Noop);
  const auto h1 = m1.forward_all_heads(f, Action::Noop);
  const auto h2 = m2.forward_all_heads(f, Action::Noop);
  // logits are f + beta*p, so h2 - h0 == 2.5 * (h1 - h0)
  for (size_t i = 0; i < h0[0].state_logits.size(); i += 37) {
    const double d1 = h1[0].state_logits[i] - h0[0].state_logits[i];
    const double d2 = h2[0].state_logits[i] - h0[0].state_logits[i];
    CHECK(d2 == doctest::Approx(2.5 * d1).epsilon(1e-9));
  }
}

TEST_CASE("finite differences confirm the analytic gradient") {
  auto cfg = tiny_config(2);
  cfg.trunk_width = 3;
  EnsembleModel m(cfg, 13);
  auto batch = collect_batch(3, 7, 2);
  // force a mix of masked and unmasked pairs
  batch[0].mask = 0b01;
  batch[1].mask = 0b10;
  batch[2].mask = 0b11;

  nn::AlignedVec grad(m.trainable_params().size(), 0.0);
  m.compute_gradients(batch, grad);

  nn::AlignedVec& p = m.trainable_params();
  std::mt19937_64 rng(3);
  const double eps = 1e-6;
  int checked = 0;
  double worst = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const size_t i = draw_bounded(rng, p.size());
    const double saved = p[i];
    p[i] = saved + eps;
    const double lp = m.loss(batch);
    p[i] = saved - eps;
    const double lm = m.loss(batch);
    p[i] = saved;
    const double fd = (lp - lm) / (2 * eps);
    const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
    const double rel = std::abs(fd - grad[i]) / denom;
    if (std::abs(fd) > 1e-10 || std::abs(grad[i]) > 1e-10) {
      worst = std::max(worst, rel);
      ++checked;
    }
  }
  CHECK(checked > 30);
  CHECK(worst < 1e-4);
}

TEST_CASE("mask gating: an unmasked head's blocks never move") {
  auto cfg = tiny_config(3);
  EnsembleModel m(cfg, 19);
  auto batch = collect_batch(8, 2, 3);
  for (auto& t : batch) t.mask &= 0b011;  // head 2 sees nothing

  const auto& blocks = m.net().blocks();
  const nn::AlignedVec before = m.trainable_params();
  for (int step = 0; step < 5; ++step) {
    auto b = batch;
    m.train_step(b);
  }
  const nn::AlignedVec& after = m.trainable_params();

  bool head2_frozen = true, head01_moved = false, trunk_moved = false;
  for (const auto& blk : blocks) {
    bool moved = false;
    for (int i = 0; i < blk.rows * blk.cols; ++i)
      moved |= before[blk.offset + i] != after[blk.offset + i];
    if (blk.head == 2) head2_frozen &= !moved;
    if (blk.head == 0 || blk.head == 1) head01_moved |= moved;
    if (blk.head < 0) trunk_moved |= moved;
  }
  CHECK(head2_frozen);
  CHECK(head01_moved);
  CHECK(trunk_moved);
}

TEST_CASE("masked items gate which heads accrue loss") {
  EnsembleModel m(tiny_config(3), 23);
  auto batch = collect_batch(4, 5, 3);
  batch[0].mask = 0b001;
  batch[1].mask = 0b001;
  batch[2].mask = 0b100;
  batch[3].mask = 0b000;
  nn::AlignedVec grad(m.trainable_params().size());
  const TrainStats st = m.compute_gradients(batch, grad);
  CHECK(st.masked_items[0] == 2);
  CHECK(st.masked_items[1] == 0);
  CHECK(st.masked_items[2] == 1);
  CHECK(st.state_loss[1] == 0.0);
  CHECK(st.reward_loss[1] == 0.0);
  CHECK(st.state_loss[0] > 0.0);
  const double total = st.state_loss[0] + st.reward_loss[0] + st.state_loss[2] +
                       st.reward_loss[2];
  CHECK(st.total_loss == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("prior parameters never change during training") {
  auto cfg = tiny_config(2);
  cfg.use_prior = true;
  EnsembleModel m(cfg, 31);
  const nn::AlignedVec prior_before = m.prior_params();
  for (int step = 0; step < 10; ++step) {
    auto batch = collect_batch(6, 100 + step, 2);
    m.train_step(batch);
  }
  CHECK(m.prior_params() == prior_before);
}

TEST_CASE("training reduces the loss on a fixed batch") {
  EnsembleModel m(tiny_config(2), 37);
  const auto batch = collect_batch(8, 9, 2);
  const double before = m.loss(batch);
  for (int step = 0; step < 300; ++step) {
    auto b = batch;
    m.train_step(b);
  }
  CHECK(m.loss(batch) < 0.25 * before);
}

TEST_CASE("training is deterministic") {
  auto run = [] {
    EnsembleModel m(tiny_config(2), 41);
    for (int step = 0; step < 5; ++step) {
      auto batch = collect_batch(4, 50 + step, 2);
      m.train_step(batch);
    }
    return m.trainable_params();
  };
  CHECK(run() == run());
}

TEST_CASE("checkpoint roundtrip is exact") {
  auto cfg = tiny_config(3);
  cfg.use_prior = true;
  EnsembleModel m(cfg, 43);
  for (int step = 0; step < 3; ++step) {
    auto batch = collect_batch(4, 60 + step, 3);
    m.train_step(batch);
  }
  const std::string path = "/tmp/minipac_test_model.ckpt";
  m.save(path);
  const EnsembleModel loaded = EnsembleModel::load(path);
  CHECK(loaded.config() == m.config());
  CHECK(loaded.trainable_params() == m.trainable_params());
  CHECK(loaded.prior_params() == m.prior_params());

  CHECK_NOTHROW(EnsembleModel::load_checked(path, cfg));
  auto other = cfg;
  other.num_heads = 5;
  CHECK_THROWS(EnsembleModel::load_checked(path, other));
  std::remove(path.c_str());
}

TEST_CASE("a trained model predicts static structure") {
  // walls and an untouched far corner are trivially predictable
  EnsembleModel m(tiny_config(4), 47);
  Env env{EnvConfig{}};
  ReplayBuffer buf(4096, 4);
  std::mt19937_64 rng(8);
  GameState s = env.reset(0);
  Frame prev = s.frame();
  for (int i = 0; i < 4096; ++i) {
    const Action a = draw_action(rng);
    const StepResult r = env.step(s, a);
    buf.push(prev, a, r.reward_class, s.frame(), r.done, rng);
    prev = s.frame();
    if (r.done) {
      s = env.reset(i + 1);
      prev = s.frame();
    }
  }
  for (int step = 0; step < 400; ++step)
    m.train_step(buf.sample_minibatch(32, rng));

  const Frame f = env.reset(999).frame();
  const auto heads = m.forward_all_heads(f, Action::Noop);
  int wall_hits = 0, wall_cells = 0;
  for (int i = 0; i < kNumCells; ++i) {
    if (f.cells[i] != CellClass::Wall) continue;
    ++wall_cells;
    int arg = 0;
    for (int c = 1; c < 6; ++c)
      if (heads[0].state_logits[i * 6 + c] > heads[0].state_logits[i * 6 + arg])
        arg = c;
    wall_hits += arg == 0;
  }
  CHECK(wall_cells == 142);
  CHECK(wall_hits > 135);
}
