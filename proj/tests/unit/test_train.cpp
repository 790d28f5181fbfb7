// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "cplopt/train.hpp"
#include "fixtures.hpp"

using namespace cplopt;
using namespace cplopt::train;

namespace {

instgen::Dataset tiny_dataset(int n_train = 4) {
  return cplopt::testing::knapsack_dataset(21, 4, 2, n_train, 2, 2);
}

engine::RunConfig tiny_run() {
  engine::RunConfig c;
  c.R = 2;
  c.K = 1;
  c.p = cgp::Norm::l2;
  return c;
}

policy::PolicyParams tiny_policy(const ParametricFamily& f, const engine::RunConfig& c,
                                 std::uint64_t seed = 3) {
  policy::Sizes s;
  s.n = f.n();
  s.m = f.m();
  s.R = c.R;
  s.K = c.K;
  s.M = c.M;
  s.hidden = 4;
  return policy::init_params(seed, s, policy::Mode::recurrent);
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = TrainConfig{};
  c.learning_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = TrainConfig{};
  c.momentum = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
}

TEST_CASE("metrics CSV layout") {
  std::vector<EpochMetrics> h(2);
  h[0] = {0, instgen::SplitName::train, 1.5, 0.25, 0.0, -0.125};
  h[1] = {1, instgen::SplitName::validation, 0.1, 0.0, 0.5, 0.0};
  CHECK(metrics_csv(h) ==
        "epoch,split,mean_gap,mean_infeas,mean_maxviol,mean_loss\n"
        "0,train,1.5,0.25,0,-0.125\n"
        "1,validation,0.10000000000000001,0,0.5,0\n");
}

TEST_CASE("evaluate is deterministic and counts missing optima") {
  auto d = tiny_dataset();
  const auto cfg = tiny_run();
  const auto a = evaluate(nullptr, d.family, d.train, cfg);
  const auto b = evaluate(nullptr, d.family, d.train, cfg, 3);
  REQUIRE(a.rows.size() == d.train.size());
  CHECK(a.mean_gap == b.mean_gap);
  CHECK(a.mean_loss == b.mean_loss);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].gap == b.rows[i].gap);
    CHECK(*a.rows[i].gap >= -1e-6);
  }
  CHECK(a.missing_z_star == 0);
  d.train[1].z_star.reset();
  const auto c = evaluate(nullptr, d.family, d.train, cfg);
  CHECK(c.missing_z_star == 1);
  CHECK(!c.rows[1].gap);
  double sum = 0.0;
  for (std::size_t i = 0; i < c.rows.size(); ++i)
    if (i != 1) sum += *a.rows[i].gap;
  CHECK(c.mean_gap == doctest::Approx(sum / 3.0));
  // An untrained policy is evaluated through the same path.
  const auto P = tiny_policy(d.family, cfg);
  const auto e = evaluate(&P, d.family, d.train, cfg);
  CHECK(e.rows.size() == d.train.size());
}

TEST_CASE("batch gradient is the mean of per-instance gradients") {
  const auto d = tiny_dataset();
  const auto cfg = tiny_run();
  const auto P = tiny_policy(d.family, cfg);
  const auto batch = batch_gradient(P, d.family, d.train, {0, 1, 2}, cfg);
  REQUIRE(batch.finite);
  CHECK(batch.grad.norm() > 1e-6);
  Vec sum = Vec::Zero(P.num_params());
  double loss = 0.0;
  for (int i : {0, 1, 2}) {
    const auto one = batch_gradient(P, d.family, d.train, {i}, cfg);
    sum += one.grad;
    loss += one.loss;
  }
  CHECK((batch.grad - sum / 3.0).norm() <= 1e-12 * (1.0 + sum.norm()));
  CHECK(batch.loss == doctest::Approx(loss / 3.0));
  const auto par = batch_gradient(P, d.family, d.train, {0, 1, 2}, cfg, 3);
  CHECK(par.grad == batch.grad);
}

TEST_CASE("zero learning rate keeps parameters and metrics constant") {
  const auto d = tiny_dataset();
  const auto cfg = tiny_run();
  const auto P = tiny_policy(d.family, cfg);
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.batch_size = 2;
  tc.max_epochs = 2;
  const auto res = fit(d, P, cfg, tc);
  CHECK(res.best.flatten() == P.flatten());
  CHECK(res.best_epoch == 0);
  REQUIRE(res.history.size() == 6);  // (train, validation) x epochs 0..2
  for (std::size_t i = 2; i < res.history.size(); ++i) {
    CHECK(res.history[i].mean_gap == res.history[i % 2].mean_gap);
    CHECK(res.history[i].mean_loss == res.history[i % 2].mean_loss);
  }
  CHECK(res.updates == 4);
}

TEST_CASE("momentum zero reduces to plain SGD") {
  auto d = tiny_dataset();
  const auto cfg = tiny_run();
  const auto P = tiny_policy(d.family, cfg);
  // Keep one instance whose gradient is not zero.
  int pick = -1;
  for (int i = 0; i < static_cast<int>(d.train.size()) && pick < 0; ++i)
    if (batch_gradient(P, d.family, d.train, {i}, cfg).grad.norm() > 1e-6) pick = i;
  REQUIRE(pick >= 0);
  d.train = {d.train[static_cast<std::size_t>(pick)]};
  TrainConfig tc;
  tc.learning_rate = 0.05;
  tc.momentum = 0.0;
  tc.batch_size = 1;
  tc.max_epochs = 1;
  tc.patience = 10;
  policy::PolicyParams after;
  fit(d, P, cfg, tc, [&](int epoch, const policy::PolicyParams& params, const auto&) {
    if (epoch == 1) after = params;
    return true;
  });
  const auto g = batch_gradient(P, d.family, d.train, {0}, cfg);
  CHECK(g.grad.norm() > 1e-6);
  CHECK(after.flatten() == P.flatten() - 0.05 * g.grad);
}

TEST_CASE("fit is reproducible and keeps the best validation epoch") {
  const auto d = tiny_dataset(6);
  const auto cfg = tiny_run();
  const auto P = tiny_policy(d.family, cfg);
  TrainConfig tc;
  tc.learning_rate = 0.5;
  tc.batch_size = 3;
  tc.max_epochs = 3;
  tc.seed = 4;
  const auto a = fit(d, P, cfg, tc);
  tc.jobs = 2;
  const auto b = fit(d, P, cfg, tc);
  CHECK(metrics_csv(a.history) == metrics_csv(b.history));
  CHECK(a.best.flatten() == b.best.flatten());
  double best = 1e300;
  int best_epoch = -1;
  for (const auto& m : a.history)
    if (m.split == instgen::SplitName::validation && m.mean_gap < best) {
      best = m.mean_gap;
      best_epoch = m.epoch;
    }
  CHECK(a.best_epoch == best_epoch);
  CHECK(a.best_validation_gap == best);
  CHECK(a.updates == 6);
}

TEST_CASE("fit rejects an empty training split and baseline configs") {
  auto d = tiny_dataset();
  auto cfg = tiny_run();
  const auto P = tiny_policy(d.family, cfg);
  cfg.mode = engine::RunMode::baseline;
  CHECK_THROWS_AS(fit(d, P, cfg, TrainConfig{}), InvalidInput);
  cfg.mode = engine::RunMode::policy;
  d.train.clear();
  CHECK_THROWS_AS(fit(d, P, cfg, TrainConfig{}), InvalidInput);
}
