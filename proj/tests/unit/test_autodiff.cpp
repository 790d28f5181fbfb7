// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "cplopt/autodiff.hpp"
#include "fixtures.hpp"

using namespace cplopt;
using namespace cplopt::autodiff;
using cplopt::testing::make_cut;
using cplopt::testing::toy1;

namespace {

ProblemInstance random_lp(std::mt19937_64& rng, int n, int m) {
  std::normal_distribution<double> N(0.0, 1.0);
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
  for (int j = 0; j < n; ++j) inst.integer_indices.push_back(j);
  return inst;
}

conic::ConicSolution tight_solve(const conic::ConicProblem& p) {
  conic::SolveOptions o;
  o.polish = p.cones.soc.empty();
  o.tol = o.polish ? 1e-11 : 1e-10;
  return conic::solve(p, o);
}

// Flattens (G, h) and builds the callable cot . x(G, h).
struct GhProbe {
  conic::ConicProblem base;
  Vec cot;
  Vec point() const {
    Vec p(base.G.size() + base.h.size());
    p << base.G.reshaped(), base.h;
    return p;
  }
  double operator()(const Vec& theta) const {
    auto p = base;
    p.G = theta.head(base.G.size()).reshaped(base.G.rows(), base.G.cols());
    p.h = theta.tail(base.h.size());
    const auto s = tight_solve(p);
    return cot.dot(s.x);
  }
  Vec analytic(const ConicGradient& g) const {
    Vec p(g.G.size() + g.h.size());
    p << g.G.reshaped(), g.h;
    return p;
  }
};

}  // namespace

TEST_CASE("conic_vjp matches finite differences on random LPs") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> N(0.0, 1.0);
  int regularized = 0, coords = 0, good = 0;
  for (int t = 0; t < 10; ++t) {
    const auto inst = random_lp(rng, 3 + t % 3, 2 + t % 2);
    const auto rel = conic::solve_relaxation(inst, CutPool(inst.n(), 0), 1e-11);
    GhProbe probe{rel.problem, Vec::Zero(inst.n())};
    for (int j = 0; j < inst.n(); ++j) probe.cot[j] = N(rng);
    const auto g = conic_vjp(rel.problem, rel.raw, probe.cot);
    regularized += g.diag.regularized;
    const auto rep =
        finite_diff_check([&](const Vec& th) { return probe(th); }, probe.point(), probe.analytic(g));
    for (const auto& c : rep.coords) {
      if (!c.reliable) continue;
      ++coords;
      good += c.rel_error <= 1e-3;
    }
  }
  CHECK(regularized <= 1);
  CHECK(static_cast<double>(good) >= 0.95 * coords);
}

TEST_CASE("conic_vjp matches finite differences on an SOCP") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0.0, 1.0);
  int coords = 0, good = 0;
  for (int t = 0; t < 5; ++t) {
    const int n = 3;
    conic::ConicProblem p;
    p.c = Vec::Zero(n);
    for (int j = 0; j < n; ++j) p.c[j] = N(rng);
    p.A = Mat::Zero(0, n);
    p.b = Vec::Zero(0);
    p.G = Mat::Zero(4, n);
    p.h = Vec::Zero(4);
    for (int i = 1; i < 4; ++i)
      for (int j = 0; j < n; ++j) p.G(i, j) = -N(rng);
    p.h[0] = 2.0;
    p.cones.soc = {4};
    const auto sol = tight_solve(p);
    REQUIRE(sol.status == conic::Status::optimal);
    GhProbe probe{p, Vec::Zero(n)};
    for (int j = 0; j < n; ++j) probe.cot[j] = N(rng);
    const auto g = conic_vjp(p, sol, probe.cot);
    CHECK_FALSE(g.diag.regularized);
    const auto rep = finite_diff_check([&](const Vec& th) { return probe(th); }, probe.point(),
                                       probe.analytic(g), 1e-5);
    for (const auto& c : rep.coords) {
      if (!c.reliable) continue;
      ++coords;
      good += c.rel_error <= 1e-3;
    }
  }
  CHECK(static_cast<double>(good) >= 0.95 * coords);
}

TEST_CASE("adjoint linearity") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> N(0.0, 1.0);
  const auto inst = random_lp(rng, 4, 3);
  const auto rel = conic::solve_relaxation(inst, CutPool(4, 0), 1e-11);
  Vec a(4), b(4);
  for (int j = 0; j < 4; ++j) {
    a[j] = N(rng);
    b[j] = N(rng);
  }
  const double alpha = 0.7, beta = -1.3;
  const auto ga = conic_vjp(rel.problem, rel.raw, a);
  const auto gb = conic_vjp(rel.problem, rel.raw, b);
  const auto gab = conic_vjp(rel.problem, rel.raw, alpha * a + beta * b);
  CHECK((gab.G - alpha * ga.G - beta * gb.G).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((gab.h - alpha * ga.h - beta * gb.h).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((gab.c - alpha * ga.c - beta * gb.c).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("relaxation_vjp on TOY1 with a cut") {
  const auto inst = toy1();
  CutPool pool(2, 2);
  pool.append(make_cut({1, 1}, 1.0));
  const auto rel = conic::solve_relaxation(inst, pool);
  const auto g = relaxation_vjp(inst, pool, rel, inst.c);
  // Along c only the optimal value matters: envelope gradient, no KKT solve.
  CHECK(!g.diag.regularized);
  CHECK(g.h_pool[0] == doctest::Approx(-rel.duals[3]).epsilon(1e-6));
  CHECK(g.h_pool[0] == doctest::Approx(-1.0).epsilon(1e-6));
  // value-function slope in h by central differences
  auto value = [&](double h) {
    CutPool p(2, 2);
    p.append(make_cut({1, 1}, h));
    return conic::solve_relaxation(inst, p).objective;
  };
  CHECK(g.h_pool[0] == doctest::Approx((value(1.0 + 1e-5) - value(1.0 - 1e-5)) / 2e-5).epsilon(1e-4));
  CHECK(g.A.cwiseAbs().maxCoeff() <= 1e-6);  // rows of A carry no multiplier
  CHECK(g.G_pool.row(0).transpose().isApprox(rel.duals[3] * rel.x, 1e-9));

  CutPool slack(2, 2);
  slack.append(make_cut({1, 1}, 1.0));
  slack.append(make_cut({1, 0}, 5.0));
  const auto rel2 = conic::solve_relaxation(inst, slack);
  const auto g2 = relaxation_vjp(inst, slack, rel2, inst.c);
  CHECK(std::abs(g2.h_pool[1]) <= 1e-9);
  CHECK(g2.G_pool.row(1).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK_THROWS_AS(relaxation_vjp(inst, pool, rel2, inst.c), InvalidInput);
}

namespace {

struct CgpCase {
  ProblemInstance inst;
  CutPool pool;
  Vec x_bar;
  cgp::CutGenParams params;
};

CgpCase toy_case(cgp::Norm p, bool standard) {
  CgpCase c{toy1(), CutPool(2, 0), Vec(2), {}};
  c.x_bar << 0.8, 0.6;  // interior, and off the symmetric tie at (0.75, 0.75)
  c.params.pi = Vec::Zero(2);
  c.params.pi[1] = 1.0;
  c.params.eta = 0.0;
  c.params.D_diag = standard ? cgp::standard_normalization(3) : cgp::trivial_normalization(3);
  c.params.p = p;
  return c;
}

// Perturbation vector layout: [pi, eta, D_diag, x_bar].
Vec pack(const CgpCase& c) {
  const auto& s = c.params;
  Vec v(s.pi.size() + 1 + s.D_diag.size() + c.x_bar.size());
  v << s.pi, s.eta, s.D_diag, c.x_bar;
  return v;
}

double cut_objective(const CgpCase& base, const Vec& theta, const Vec& cot_g, double cot_h) {
  CgpCase c = base;
  const int n = static_cast<int>(c.params.pi.size());
  const int d = static_cast<int>(c.params.D_diag.size());
  c.params.pi = theta.head(n);
  c.params.eta = theta[n];
  c.params.D_diag = theta.segment(n + 1, d).cwiseMax(0.0);
  c.x_bar = theta.tail(n);
  const auto P = cgp::build_cgp(c.inst, c.pool, c.x_bar, c.params);
  const auto cand = cgp::solve_cgp(P, 1e-9, c.params.p == cgp::Norm::l2 ? 1e-9 : 1e-10);
  if (!cand) return std::nan("");
  return cot_g.dot(cand->g) + cot_h * cand->h;
}

}  // namespace

TEST_CASE("cgp_vjp: zero cotangent and scaling identity") {
  const auto c = toy_case(cgp::Norm::l1, true);
  const auto P = cgp::build_cgp(c.inst, c.pool, c.x_bar, c.params);
  const auto cand = cgp::solve_cgp(P);
  REQUIRE(cand);
  const auto z = cgp_vjp(P, *cand, Vec::Zero(2), 0.0);
  CHECK(z.pi.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.D_diag.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.eta == 0.0);

  // (g, h)(alpha D) = (g, h)(D) / alpha for p = 1, so D . grad_D = -cot . (g, h).
  Vec cot_g(2);
  cot_g << 0.3, -1.1;
  const double cot_h = 0.8;
  const auto g = cgp_vjp(P, *cand, cot_g, cot_h);
  const double expected = -(cot_g.dot(cand->g) + cot_h * cand->h);
  CHECK(c.params.D_diag.dot(g.D_diag) == doctest::Approx(expected).epsilon(1e-6));
  // and the same by finite differences over alpha
  auto scaled = [&](double a) {
    auto cc = c;
    cc.params.D_diag *= a;
    return cut_objective(cc, pack(cc), cot_g, cot_h);
  };
  CHECK((scaled(1.0 + 1e-5) - scaled(1.0 - 1e-5)) / 2e-5 == doctest::Approx(expected).epsilon(1e-5));
}

TEST_CASE("cgp_vjp matches finite differences") {
  for (auto p : {cgp::Norm::l1, cgp::Norm::l2}) {
    for (bool standard : {true, false}) {
      CAPTURE(cgp::to_string(p));
      CAPTURE(standard);
      const auto c = toy_case(p, standard);
      const auto P = cgp::build_cgp(c.inst, c.pool, c.x_bar, c.params);
      const auto cand = cgp::solve_cgp(P, 1e-9, p == cgp::Norm::l2 ? 1e-9 : 1e-10);
      REQUIRE(cand);
      Vec cot_g(2);
      cot_g << 0.4, 0.9;
      const double cot_h = -0.6;
      const auto g = cgp_vjp(P, *cand, cot_g, cot_h);
      Vec analytic(pack(c).size());
      analytic << g.pi, g.eta, g.D_diag, g.x_bar;
      const auto rep = finite_diff_check(
          [&](const Vec& th) { return cut_objective(c, th, cot_g, cot_h); }, pack(c), analytic);
      // Zero D entries sit on the boundary of D >= 0, where only one side exists.
      int checked = 0, good = 0;
      for (const auto& cc : rep.coords) {
        const int d = cc.index - 3;
        if (d >= 0 && d < c.params.D_diag.size() && c.params.D_diag[d] == 0.0) continue;
        ++checked;
        good += cc.reliable && cc.rel_error <= 1e-3;
      }
      CHECK(checked >= 7);
      CHECK(good == checked);
    }
  }
}

TEST_CASE("cgp_vjp through normalization and shifts") {
  const auto c = toy_case(cgp::Norm::l1, true);
  const auto P = cgp::build_cgp(c.inst, c.pool, c.x_bar, c.params);
  const auto cand = cgp::solve_cgp(P);
  REQUIRE(cand);
  // Normalizing is scale invariant, so a cotangent along (g, h) itself gives zero.
  const double nrm = cand->g.norm();
  const auto g = cgp_vjp(P, *cand, cand->g / nrm, cand->h / nrm, {}, true);
  CHECK(g.D_diag.cwiseAbs().maxCoeff() <= 1e-8);
  // A zero shift reproduces the plain read-off.
  const auto [gs, hs] = shifted_cut(P, cand->u, cand->v, std::vector<long>(2, 0));
  CHECK((gs - cand->g).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(hs == doctest::Approx(cand->h));
  CHECK_THROWS_AS(cgp_vjp(P, *cand, Vec::Zero(3), 0.0), InvalidInput);
}

TEST_CASE("finite_diff_check basics") {
  Vec a(3);
  a << 1.0, -2.0, 0.5;
  const auto rep = finite_diff_check([&](const Vec& x) { return a.dot(x) + 3.0; }, Vec::Ones(3), a);
  CHECK(rep.max_rel_error <= 1e-9);
  CHECK(rep.passed());
  CHECK(rep.pass_fraction() == 1.0);

  // |x| at 0 has a kink: reported as unreliable, not as a failure.
  const auto kink = finite_diff_check([](const Vec& x) { return std::abs(x[0]); }, Vec::Zero(1),
                                      Vec::Constant(1, 1.0));
  CHECK(kink.unreliable == 1);
  CHECK_FALSE(kink.coords[0].reliable);
  CHECK(kink.passed());
  CHECK_THROWS_AS(finite_diff_check([](const Vec&) { return 0.0; }, Vec::Zero(2), Vec::Zero(3)),
                  InvalidInput);
}
