// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "cplopt/engine.hpp"
#include "fixtures.hpp"

using namespace cplopt;
using namespace cplopt::engine;
using cplopt::testing::random_binary;
using cplopt::testing::toy1;

namespace {

policy::Sizes sizes_for(const ProblemInstance& inst, const RunConfig& cfg, int hidden = 8) {
  policy::Sizes s;
  s.n = inst.n();
  s.m = inst.m();
  s.R = cfg.R;
  s.K = cfg.K;
  s.M = cfg.M;
  s.hidden = hidden;
  return s;
}

// min -x1 - x2 s.t. x1 <= 1, x2 <= 1: LP optimum already integral.
ProblemInstance integral_box() {
  ProblemInstance p;
  p.A = Mat::Identity(2, 2);
  p.b = Vec::Ones(2);
  p.c = -Vec::Ones(2);
  p.integer_indices = {0, 1};
  return p;
}

bool pool_valid(const ProblemInstance& inst, const CutPool& pool) {
  bool ok = true;
  enumerate_integer_points(inst, [&](const Vec& x) {
    for (const auto& cut : pool.rows()) ok = ok && cut.g.dot(x) <= cut.h + 1e-6;
  });
  return ok;
}

}  // namespace

TEST_CASE("loss examples") {
  CHECK(loss(std::vector<double>{-1.5, -1.25, -1.0}, 0.9) == doctest::Approx(-0.4275).epsilon(1e-12));
  CHECK(loss(std::vector<double>{-2.0, -2.0, -2.0}, 0.9) == 0.0);
  // Moving an improvement of 0.3 from round 1 to round 2 raises L by (g - g^2) 0.3.
  const double early = loss(std::vector<double>{0.0, 0.3, 0.3}, 0.8);
  const double late = loss(std::vector<double>{0.0, 0.0, 0.3}, 0.8);
  CHECK(late - early == doctest::Approx((0.8 - 0.64) * 0.3));
}

TEST_CASE("run config validation") {
  RunConfig c;
  c.gamma = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = RunConfig{};
  c.K = 0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  CHECK_THROWS_AS(run_forward(toy1(), nullptr, RunConfig{}), InvalidInput);
}

TEST_CASE("integral LP optimum exits before the first round") {
  RunConfig cfg;
  cfg.R = 3;
  cfg.K = 2;
  const auto t = run_baseline(integral_box(), cfg);
  CHECK(t.diag.early_exit_round == 0);
  CHECK(t.states.size() == 4);
  CHECK(t.pool.size() == 0);
  for (const auto& s : t.states) CHECK(s.candidate == t.states[0].candidate);
  CHECK(t.loss == 0.0);
}

TEST_CASE("TOY1 static splits with the trivial normalization") {
  const auto inst = toy1();
  for (bool strengthen : {false, true}) {
    RunConfig cfg;
    cfg.R = 3;
    cfg.K = 1;
    cfg.strengthen = strengthen;
    const auto P = policy::init_params(0, sizes_for(inst, cfg), policy::Mode::static_table);
    const auto t = run_forward(inst, &P, cfg);
    REQUIRE(t.states.size() == 4);
    CHECK(t.states[0].objective == doctest::Approx(-1.5).epsilon(1e-9));
    CHECK(t.states[0].candidate.isApprox(Vec{{1.0, 0.5}}, 1e-9));
    // Round 1 splits on x2 at (1, 0.5): the hull facet 2 x1 + x2 <= 2 keeps (0.5, 1) optimal.
    REQUIRE(t.pool.size() == 3);
    CHECK(t.pool[0].g.isApprox(Vec{{2.0, 1.0}} / std::sqrt(5.0), 1e-7));
    CHECK(t.pool[0].h == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-7));
    CHECK(t.states[1].objective == doctest::Approx(-1.5).epsilon(1e-7));
    // Round 2 splits on x1 at (0.5, 1). x1 + 2 x2 <= 2 and x1 + x2 <= 1 tie at
    // violation 0.25 per unit of u0 + v0; the solver's vertex is the former.
    CHECK(t.pool[1].g.isApprox(Vec{{1.0, 2.0}} / std::sqrt(5.0), 1e-7));
    CHECK(t.states[2].objective == doctest::Approx(-4.0 / 3.0).epsilon(1e-7));
    CHECK(t.pool[2].g.isApprox(Vec::Ones(2) / std::sqrt(2.0), 1e-7));
    CHECK(t.states[3].objective == doctest::Approx(-1.0).epsilon(1e-7));
    CHECK(t.loss == doctest::Approx(-(0.81 / 6.0 + 0.729 / 3.0)).epsilon(1e-7));
    CHECK(pool_valid(inst, t.pool));
  }
}

TEST_CASE("baseline on TOY1 reaches the integer optimum in three rounds") {
  const auto inst = toy1();
  RunConfig cfg;
  cfg.R = 3;
  cfg.K = 1;
  const auto t = run_baseline(inst, cfg);
  const double z_star = brute_force_optimum(inst).z;
  // The standard normalization's second cut is x1 + 2 x2 <= 2, weaker than the hull facet.
  CHECK(t.states[2].objective == doctest::Approx(-4.0 / 3.0).epsilon(1e-7));
  CHECK(t.states[3].objective == doctest::Approx(z_star).epsilon(1e-7));
  const auto t2 = run_baseline(inst, cfg);
  CHECK(t2.pool.G() == t.pool.G());
  CHECK(t2.loss == t.loss);
  // Policy runs share the cut-free start.
  const auto P = policy::init_params(3, sizes_for(inst, cfg), policy::Mode::recurrent);
  const auto tp = run_forward(inst, &P, cfg);
  CHECK(tp.states[0].candidate == t.states[0].candidate);
}

TEST_CASE("pool cap, monotone bound and validity on random binary instances") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 6; ++trial) {
    const auto inst = random_binary(rng, 4, 2);
    RunConfig cfg;
    cfg.R = 3;
    cfg.K = 2;
    cfg.M = 2;
    const auto P = policy::init_params(static_cast<std::uint64_t>(trial), sizes_for(inst, cfg),
                                       policy::Mode::recurrent);
    for (const auto& t : {run_baseline(inst, cfg), run_forward(inst, &P, cfg)}) {
      CHECK(t.pool.size() <= 6);
      CHECK(t.states.size() == 4);
      for (std::size_t r = 1; r < t.states.size(); ++r)
        CHECK(t.states[r].objective >= t.states[r - 1].objective - 1e-9);
      CHECK(t.loss <= 1e-9);
      CHECK(t.loss == doctest::Approx(loss(t, cfg.gamma)));
      CHECK(pool_valid(inst, t.pool));
    }
  }
}

TEST_CASE("no improvement gives a zero gradient") {
  const auto inst = integral_box();
  RunConfig cfg;
  cfg.R = 2;
  cfg.K = 1;
  const auto P = policy::init_params(1, sizes_for(inst, cfg), policy::Mode::recurrent);
  const auto t = run_forward(inst, &P, cfg);
  const auto g = backward(t, P, inst);
  CHECK(g.grad.size() == P.num_params());
  CHECK(g.grad.isZero());
}

TEST_CASE("two-round static chain on TOY1 matches finite differences") {
  const auto inst = toy1();
  RunConfig cfg;
  cfg.R = 2;
  cfg.K = 1;
  cfg.p = cgp::Norm::l2;
  cfg.strengthen = false;
  auto P = policy::init_params(0, sizes_for(inst, cfg), policy::Mode::static_table);
  // Interior point of D >= 0 so every coordinate is differentiable.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.5, 1.5);
  Vec theta = P.flatten();
  for (int i = 0; i < theta.size(); ++i) theta[i] = U(rng);
  P.unflatten(theta);

  const auto t = run_forward(inst, &P, cfg);
  REQUIRE(t.pool.size() >= 1);
  const auto g = backward(t, P, inst);
  CHECK(g.grad.norm() > 1e-4);
  auto f = [&](const Vec& th) {
    auto Q = P;
    Q.unflatten(th);
    return run_forward(inst, &Q, cfg).loss;
  };
  const auto rep = autodiff::finite_diff_check(f, theta, g.grad, 1e-6);
  for (const auto& c : rep.coords) {
    INFO("coord " << c.index << " analytic " << c.analytic << " numeric " << c.numeric);
    if (c.reliable) CHECK(c.rel_error <= 1e-3);
  }
  CHECK(rep.unreliable <= 1);
}

TEST_CASE("two-round recurrent chain matches finite differences on most coordinates") {
  // Instances where the normalization actually moves the cuts (on many small
  // instances the optimal cut is a fixed facet and the gradient is exactly zero).
  for (unsigned seed : {26u, 27u, 29u}) {
    std::mt19937_64 rng(seed);
    const auto inst = random_binary(rng, 3, 1);
    RunConfig cfg;
    cfg.R = 2;
    cfg.K = 2;
    cfg.p = cgp::Norm::l2;
    const auto P = policy::init_params(4, sizes_for(inst, cfg, 4), policy::Mode::recurrent);
    const auto t = run_forward(inst, &P, cfg);
    const auto g = backward(t, P, inst);
    REQUIRE(g.grad.allFinite());
    CHECK(g.grad.norm() > 1e-3);
    auto f = [&](const Vec& th) {
      auto Q = P;
      Q.unflatten(th);
      return run_forward(inst, &Q, cfg).loss;
    };
    const auto rep = autodiff::finite_diff_check(f, P.flatten(), g.grad, 1e-6);
    INFO("seed " << seed << ": pass fraction " << rep.pass_fraction(1e-3) << ", unreliable "
                 << rep.unreliable);
    CHECK(rep.pass_fraction(1e-3) >= 0.95);
  }
}
