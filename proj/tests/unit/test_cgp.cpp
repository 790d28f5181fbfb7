// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "cplopt/cgp.hpp"
#include "fixtures.hpp"

using namespace cplopt;
using namespace cplopt::cgp;
using cplopt::testing::toy1;

namespace {

Vec xbar_toy() {
  Vec x(2);
  x << 1.0, 0.5;
  return x;
}

CutGenParams split_on(int n, int j, double eta, Vec D, Norm p = Norm::l1) {
  CutGenParams s;
  s.pi = Vec::Zero(n);
  s.pi[j] = 1.0;
  s.eta = eta;
  s.D_diag = std::move(D);
  s.p = p;
  return s;
}

bool valid_on_points(const ProblemInstance& inst, const Vec& g, double h) {
  bool ok = true;
  enumerate_integer_points(inst, [&](const Vec& x) { ok = ok && g.dot(x) <= h + 1e-6; });
  return ok;
}

}  // namespace

TEST_CASE("normalization vectors") {
  Vec t2(6);
  t2 << 0, 0, 1, 0, 0, 1;
  CHECK(trivial_normalization(2) == t2);
  Vec t1(4);
  t1 << 0, 1, 0, 1;
  CHECK(trivial_normalization(1) == t1);
  for (int m = 1; m < 8; ++m) CHECK((trivial_normalization(m).array() != 0).count() == 2);
  CHECK(standard_normalization(2) == Vec::Ones(6));
  CHECK_THROWS_AS(trivial_normalization(0), InvalidInput);
}

TEST_CASE("structure of the pool-free CGP") {
  const auto inst = toy1();
  const auto P = build_cgp(inst, CutPool(2, 0), xbar_toy(), split_on(2, 1, 0, trivial_normalization(3)));
  CHECK(P.num_mult() == 4);
  CHECK(P.conic.num_vars() == 2 + 1 + 2 * 4);
  CHECK(P.conic.cones.soc.empty());
  auto p2 = split_on(2, 1, 0, standard_normalization(3), Norm::l2);
  const auto Q = build_cgp(inst, CutPool(2, 0), xbar_toy(), p2);
  REQUIRE(Q.conic.cones.soc.size() == 1);
  CHECK(Q.conic.cones.soc[0] == 1 + 8);
}

TEST_CASE("toy split cut under the trivial normalization") {
  // Frozen from an independent LP model of the same program (HiGHS):
  // optimum 0.25, g = (1, 0.5), h = 1, i.e. 2 x1 + x2 <= 2.
  const auto inst = toy1();
  const auto P = build_cgp(inst, CutPool(2, 0), xbar_toy(), split_on(2, 1, 0, trivial_normalization(3)));
  const auto cand = solve_cgp(P);
  REQUIRE(cand);
  CHECK(cand->objective == doctest::Approx(0.25).epsilon(1e-7));
  CHECK(cand->violation == doctest::Approx(0.25).epsilon(1e-7));
  const double s = cand->h;
  CHECK(cand->g[0] / s == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(cand->g[1] / s == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(valid_on_points(inst, cand->g, cand->h));
  // normalization active
  CHECK(cand->u[3] + cand->v[3] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("toy split cut under the standard normalization") {
  // Frozen oracle: optimum 0.1, g = (0.4, 0.2), h = 0.4.
  const auto inst = toy1();
  const auto P = build_cgp(inst, CutPool(2, 0), xbar_toy(), split_on(2, 1, 0, standard_normalization(3)));
  const auto cand = solve_cgp(P);
  REQUIRE(cand);
  CHECK(cand->objective == doctest::Approx(0.1).epsilon(1e-7));
  CHECK(cand->g[0] / cand->h == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(cand->g[1] / cand->h == doctest::Approx(0.5).epsilon(1e-6));
  CHECK((cand->u.sum() + cand->v.sum()) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(valid_on_points(inst, cand->g, cand->h));
}

TEST_CASE("scaling D rescales the solution and keeps the half-space") {
  const auto inst = toy1();
  const auto base = solve_cgp(build_cgp(inst, CutPool(2, 0), xbar_toy(),
                                        split_on(2, 1, 0, standard_normalization(3))));
  REQUIRE(base);
  for (double alpha : {0.5, 2.0, 10.0}) {
    const auto c = solve_cgp(build_cgp(inst, CutPool(2, 0), xbar_toy(),
                                       split_on(2, 1, 0, alpha * standard_normalization(3))));
    REQUIRE(c);
    CHECK(c->objective == doctest::Approx(base->objective / alpha).epsilon(1e-7));
    CHECK((c->g / c->h - base->g / base->h).norm() < 1e-6);
  }
}

TEST_CASE("integer-feasible x_bar is not separated") {
  const auto inst = toy1();
  Vec x(2);
  x << 1, 0;
  for (auto D : {trivial_normalization(3), standard_normalization(3)})
    for (int j = 0; j < 2; ++j)
      CHECK_FALSE(solve_cgp(build_cgp(inst, CutPool(2, 0), x, split_on(2, j, 0, D))));
}

TEST_CASE("normalization that pins the disjunction multipliers to zero gives no cut") {
  const auto inst = toy1();
  // every multiplier boxed at 1e-9: the optimum is below eps_cut
  auto s = split_on(2, 1, 0, trivial_normalization(3), Norm::linf);
  s.D_diag.setConstant(1e9);
  const auto c = solve_cgp(build_cgp(inst, CutPool(2, 0), xbar_toy(), s));
  CHECK_FALSE(c);
}

TEST_CASE("p = 2 and p = inf produce valid separating cuts") {
  const auto inst = toy1();
  for (Norm p : {Norm::l2, Norm::linf}) {
    const auto c = solve_cgp(build_cgp(inst, CutPool(2, 0), xbar_toy(),
                                       split_on(2, 1, 0, standard_normalization(3), p)));
    REQUIRE(c);
    CHECK(c->violation > 1e-3);
    CHECK(valid_on_points(inst, c->g, c->h));
  }
}

TEST_CASE("CGP with a pool row") {
  const auto inst = toy1();
  CutPool pool(2, 1);
  pool.append(cplopt::testing::make_cut({2, 1}, 2));
  Vec x(2);
  x << 0.5, 1.0;  // vertex of the cut region
  const auto P = build_cgp(inst, pool, x, split_on(2, 0, 0, trivial_normalization(4)));
  CHECK(P.m_hat() == 4);
  const auto c = solve_cgp(P);
  REQUIRE(c);
  CHECK(valid_on_points(inst, c->g, c->h));
  CHECK(c->violation > 1e-3);
}

TEST_CASE("input validation") {
  const auto inst = toy1();
  CHECK_THROWS_AS(build_cgp(inst, CutPool(2, 0), xbar_toy(), split_on(2, 1, 0, trivial_normalization(2))),
                  InvalidInput);
  auto s = split_on(2, 1, 0, trivial_normalization(3));
  s.D_dense = Mat::Identity(8, 8);
  CHECK_THROWS_AS(build_cgp(inst, CutPool(2, 0), xbar_toy(), s), InvalidInput);
  s = split_on(2, 1, 0, trivial_normalization(3));
  s.D_diag[0] = -1;
  CHECK_THROWS_AS(build_cgp(inst, CutPool(2, 0), xbar_toy(), s), InvalidInput);
  CHECK_THROWS_AS(parse_norm("3"), InvalidInput);
  CHECK(parse_norm("inf") == Norm::linf);
}

TEST_CASE("monoidal strengthening is valid and never weakens") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int checked = 0;
  for (int t = 0; t < 60 && checked < 100; ++t) {
    const auto inst = cplopt::testing::random_binary(rng, 5, 3);
    const auto lp = conic::solve_relaxation(inst, CutPool(5, 0));
    for (int j = 0; j < 5; ++j) {
      if (fractional_distance(lp.x[j]) < 1e-4) continue;
      for (auto D : {trivial_normalization(inst.m()), standard_normalization(inst.m())}) {
        const auto P = build_cgp(inst, CutPool(5, 0), lp.x, split_on(5, j, std::floor(lp.x[j]), D));
        const auto c = solve_cgp(P);
        if (!c) continue;
        const auto s = monoidal_strengthen(*c, P);
        CHECK((s.cut.g - c->g).minCoeff() >= -1e-9);
        CHECK(s.cut.violation_at_birth >= c->violation - 1e-9);
        CHECK(valid_on_points(inst, s.cut.g, s.cut.h));
        CHECK(s.cut.h == c->h);
        ++checked;
      }
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("strengthening leaves the toy cut valid; zero disjunction weight skips") {
  const auto inst = toy1();
  const auto P = build_cgp(inst, CutPool(2, 0), xbar_toy(), split_on(2, 1, 0, trivial_normalization(3)));
  auto c = solve_cgp(P);
  REQUIRE(c);
  const auto s = monoidal_strengthen(*c, P);
  CHECK(valid_on_points(inst, s.cut.g, s.cut.h));
  c->u[3] = 0.0;
  c->v[3] = 0.0;
  const auto skip = monoidal_strengthen(*c, P);
  CHECK_FALSE(skip.applied);
  CHECK(skip.cut.g == c->g);
}

TEST_CASE("normalize and duplicate suppression") {
  Cut c = cplopt::testing::make_cut({3, 4}, 10);
  const auto nc = normalized(c);
  CHECK(nc.g.norm() == doctest::Approx(1.0));
  CHECK(nc.h == doctest::Approx(2.0));
  CutPool pool(2, 2);
  pool.append(nc);
  auto near = nc;
  near.h += 1e-9;
  CHECK(is_duplicate(near, pool));
  near.h += 1e-6;
  CHECK_FALSE(is_duplicate(near, pool));
}
