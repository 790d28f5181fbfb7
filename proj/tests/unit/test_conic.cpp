// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "cplopt/conic.hpp"
#include "fixtures.hpp"

using namespace cplopt;
using namespace cplopt::conic;
using cplopt::testing::make_cut;
using cplopt::testing::toy1;

namespace {

ConicProblem lp(const Mat& G, const Vec& h, const Vec& c) {
  ConicProblem p;
  p.c = c;
  p.A = Mat::Zero(0, c.size());
  p.b = Vec::Zero(0);
  p.G = G;
  p.h = h;
  p.cones.nonneg = static_cast<int>(G.rows());
  return p;
}

// Independent KKT residual check of a returned solution.
double kkt_error(const ConicProblem& p, const ConicSolution& s) {
  Vec stat = p.c + p.G.transpose() * s.z;
  if (p.A.rows() > 0) stat += p.A.transpose() * s.y;
  double err = stat.lpNorm<Eigen::Infinity>();
  err = std::max(err, (p.G * s.x + s.s - p.h).lpNorm<Eigen::Infinity>());
  if (p.A.rows() > 0) err = std::max(err, (p.A * s.x - p.b).lpNorm<Eigen::Infinity>());
  err = std::max(err, std::abs(s.s.dot(s.z)));
  return err;
}

}  // namespace

TEST_CASE("feasibility problem min 0 s.t. x >= 0") {
  const auto p = lp(-Mat::Identity(1, 1), Vec::Zero(1), Vec::Zero(1));
  const auto s = solve(p);
  CHECK(s.status == Status::optimal);
  CHECK(s.objective == doctest::Approx(0.0));
}

TEST_CASE("toy relaxation with and without a cut") {
  const auto inst = toy1();
  CutPool pool(2, 4);
  auto r = solve_relaxation(inst, pool);
  CHECK(r.objective == doctest::Approx(-1.5).epsilon(1e-9));
  // the optimal face is a whole edge; polishing walks to its vertex (1, 0.5)
  CHECK(r.x[0] == doctest::Approx(1.0));
  CHECK(r.x[1] == doctest::Approx(0.5));
  CHECK(r.raw.polished);
  pool.append(make_cut({1, 1}, 1));
  r = solve_relaxation(inst, pool);
  CHECK(r.objective == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(r.duals.size() == 4);
  // dual objective certifies the bound: -b'y
  Vec rhs(4);
  rhs << inst.b, 1.0;
  CHECK(-rhs.dot(r.duals) == doctest::Approx(r.objective).epsilon(1e-8));
}

TEST_CASE("non-violated valid cut leaves the relaxation unchanged") {
  const auto inst = toy1();
  CutPool pool(2, 1);
  const auto a = solve_relaxation(inst, pool);
  pool.append(make_cut({1, 0}, 1.5));
  const auto b = solve_relaxation(inst, pool);
  CHECK(b.objective == doctest::Approx(a.objective).epsilon(1e-9));
}

TEST_CASE("relaxation errors") {
  const auto inst = toy1();
  CutPool pool(2, 1);
  pool.append(make_cut({-1, -1}, -5));  // x1 + x2 >= 5
  CHECK_THROWS_AS(solve_relaxation(inst, pool), NumericalAbort);

  ProblemInstance unb;
  unb.A = Mat::Zero(1, 1);
  unb.b = Vec::Ones(1);
  unb.c = -Vec::Ones(1);
  CHECK_THROWS_AS(solve_relaxation(unb, CutPool(1, 0)), NumericalAbort);
}

TEST_CASE("infeasible and unbounded certificates") {
  Mat G(2, 1);
  G << 1, -1;
  Vec h(2);
  h << -1, -1;  // x <= -1 and x >= 1
  CHECK(solve(lp(G, h, Vec::Ones(1))).status == Status::infeasible);
  Mat G2 = -Mat::Identity(1, 1);
  CHECK(solve(lp(G2, Vec::Zero(1), -Vec::Ones(1))).status == Status::unbounded);
}

TEST_CASE("second-order cone: min -x-y on the unit disc") {
  ConicProblem p;
  p.c = -Vec::Ones(2);
  p.A = Mat::Zero(0, 2);
  p.b = Vec::Zero(0);
  p.G = Mat::Zero(3, 2);
  p.G(1, 0) = -1;
  p.G(2, 1) = -1;
  p.h = Vec::Zero(3);
  p.h[0] = 1;
  p.cones.soc = {3};
  const auto s = solve(p);
  REQUIRE(s.status == Status::optimal);
  CHECK(s.objective == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-8));
  CHECK(kkt_error(p, s) < 1e-7);
}

TEST_CASE("mixed cones with equalities") {
  // min t  s.t. x1 + x2 = 2, x >= 0, ||(x1 - 3, x2)|| <= t
  ConicProblem p;
  p.c = Vec::Zero(3);
  p.c[2] = 1;
  p.A = Mat::Zero(1, 3);
  p.A << 1, 1, 0;
  p.b = Vec::Constant(1, 2.0);
  p.G = Mat::Zero(5, 3);
  p.h = Vec::Zero(5);
  p.G(0, 0) = -1;
  p.G(1, 1) = -1;
  p.G(2, 2) = -1;
  p.G(3, 0) = -1;
  p.h[3] = -3;
  p.G(4, 1) = -1;
  p.cones.nonneg = 2;
  p.cones.soc = {3};
  const auto s = solve(p);
  REQUIRE(s.status == Status::optimal);
  // projection of (3,0) on the segment is (2,0): distance 1
  CHECK(s.objective == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(kkt_error(p, s) < 1e-7);
}

TEST_CASE("random LPs satisfy KKT and weak monotonicity") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    const int n = 3 + t % 6, m = 2 + t % 5;
    ProblemInstance inst;
    inst.A = Mat::Zero(m + n, n);
    inst.b = Vec::Zero(m + n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) inst.A(i, j) = N(rng);
      inst.b[i] = std::abs(N(rng)) + 0.1;
    }
    inst.A.bottomRows(n) = Mat::Identity(n, n);
    inst.b.tail(n).setOnes();
    inst.c = Vec::Zero(n);
    for (int j = 0; j < n; ++j) inst.c[j] = N(rng);
    CutPool pool(n, 3);
    auto prev = solve_relaxation(inst, pool);
    CHECK(kkt_error(prev.problem, prev.raw) < 1e-7);
    for (int k = 0; k < 3; ++k) {
      Cut cut;
      cut.g = Vec::Zero(n);
      for (int j = 0; j < n; ++j) cut.g[j] = N(rng);
      cut.h = cut.g.dot(prev.x) + 0.05;  // keeps the origin-side region nonempty
      cut.h = std::max(cut.h, 0.01);
      pool.append(cut);
      const auto next = solve_relaxation(inst, pool);
      CHECK(next.objective >= prev.objective - 1e-7);
      CHECK(kkt_error(next.problem, next.raw) < 1e-7);
      prev = next;
    }
  }
}

TEST_CASE("random SOCPs reach small KKT residuals") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const int n = 4;
    ConicProblem p;
    p.c = Vec::Zero(n);
    for (int j = 0; j < n; ++j) p.c[j] = N(rng);
    p.A = Mat::Zero(0, n);
    p.b = Vec::Zero(0);
    // box |x| <= 2 plus a cone of size 4
    p.G = Mat::Zero(2 * n + 4, n);
    p.h = Vec::Zero(2 * n + 4);
    p.G.topRows(n) = Mat::Identity(n, n);
    p.G.middleRows(n, n) = -Mat::Identity(n, n);
    p.h.head(2 * n).setConstant(2.0);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < n; ++j) p.G(2 * n + i, j) = N(rng);
    p.h[2 * n] = 3.0;
    p.cones.nonneg = 2 * n;
    p.cones.soc = {4};
    const auto s = solve(p);
    REQUIRE(s.status == Status::optimal);
    CHECK(kkt_error(p, s) < 1e-6);
  }
}
