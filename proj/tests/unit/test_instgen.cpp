// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "cplopt/instgen.hpp"

using namespace cplopt;
using namespace cplopt::instgen;

namespace {

MatchingSpec small_matching(std::uint64_t seed) {
  MatchingSpec s;
  s.nodes = 6;
  s.edges = 9;
  s.n_train = 4;
  s.n_validation = 2;
  s.n_test = 2;
  s.seed = seed;
  return s;
}

ControlSpec small_control(int n = 3) {
  ControlSpec s;
  s.n_train = n;
  s.n_validation = 0;
  s.n_test = 0;
  s.seed = 11;
  return s;
}

}  // namespace

TEST_CASE("matching graph has the exact edge count and no isolated node") {
  MatchingSpec s;
  const Graph g = draw_graph(s, 3);
  CHECK(g.nodes == 16);
  REQUIRE(g.edges.size() == 35u);
  std::vector<int> degree(16, 0);
  std::set<std::pair<int, int>> seen;
  for (const auto& [u, v] : g.edges) {
    CHECK(u < v);
    CHECK(seen.insert({u, v}).second);
    ++degree[static_cast<std::size_t>(u)];
    ++degree[static_cast<std::size_t>(v)];
  }
  for (int d : degree) CHECK(d > 0);
}

TEST_CASE("matching family shape and objective parameterization") {
  const auto d = gen_matching(MatchingSpec{});
  const auto& f = d.family;
  CHECK(f.n() == 35);
  CHECK(f.m() - f.bound_rows == 16);
  CHECK(f.core_rows() == 16);
  CHECK(f.theta_dim == 35);
  CHECK(f.integer_indices.size() == 35u);
  for (int e = 0; e < f.n(); ++e) {
    CHECK(f.A.col(e).head(16).sum() == 2.0);
    CHECK(f.A(16 + e, e) == 1.0);
  }
  CHECK((f.b.head(16).array() == 2.0).all());
  CHECK(d.train.size() == 40u);
  CHECK(d.validation.size() == 15u);
  CHECK(d.test.size() == 15u);
  // Only c moves; weights are rounded to three decimals.
  const auto& theta = d.train[0].theta;
  const auto inst = realize(f, theta);
  CHECK(inst.A == f.A);
  CHECK(inst.b == f.b);
  CHECK(inst.c.isApprox(-theta));
  for (int j = 0; j < theta.size(); ++j)
    CHECK(std::abs(theta[j] * 1000.0 - std::round(theta[j] * 1000.0)) < 1e-6);
}

TEST_CASE("matching generation is deterministic in the seed") {
  const auto a = gen_matching(small_matching(5));
  const auto b = gen_matching(small_matching(5));
  const auto c = gen_matching(small_matching(6));
  CHECK(a.family.A == b.family.A);
  for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].theta == b.train[i].theta);
  CHECK(a.train[0].theta != c.train[0].theta);
}

TEST_CASE("every integer point of a small matching family has degree at most 2") {
  const auto d = gen_matching(small_matching(2));
  const auto inst = realize(d.family, d.train[0].theta);
  long long points = 0;
  enumerate_integer_points(inst, [&](const Vec& x) {
    ++points;
    for (int j = 0; j < x.size(); ++j) CHECK((x[j] == 0.0 || x[j] == 1.0));
    const Vec deg = d.family.A.topRows(6) * x;
    CHECK(deg.maxCoeff() <= 2.0);
  });
  CHECK(points > 1);
}

TEST_CASE("compute_optima fills z* independently of the job count") {
  auto a = gen_matching(small_matching(4));
  auto b = a;
  compute_optima(a, 1);
  compute_optima(b, 3);
  for (auto split : {SplitName::train, SplitName::validation, SplitName::test})
    for (std::size_t i = 0; i < a.split(split).size(); ++i) {
      REQUIRE(a.split(split)[i].z_star);
      CHECK(*a.split(split)[i].z_star == *b.split(split)[i].z_star);
      const auto inst = realize(a.family, a.split(split)[i].theta);
      CHECK(*a.split(split)[i].z_star == brute_force_optimum(inst).z);
    }
}

TEST_CASE("split names round-trip") {
  for (auto s : {SplitName::train, SplitName::validation, SplitName::test})
    CHECK(parse_split(to_string(s)) == s);
  CHECK_THROWS_AS(parse_split("holdout"), InvalidInput);
}

TEST_CASE("control family shape and right-hand-side parameterization") {
  const ControlSpec spec = small_control();
  const auto d = gen_control(spec);
  const auto& f = d.family;
  CHECK(f.n() == 40);
  CHECK(f.core_rows() == 90);
  CHECK(f.bound_rows == 40);
  CHECK(f.theta_dim == 23);
  CHECK(f.integer_indices.size() == 20u);
  for (const auto& e : f.theta_map) CHECK(e.target == AffineEntry::Target::b);
  const auto i0 = realize(f, d.train[0].theta);
  const auto i1 = realize(f, d.train[1].theta);
  CHECK(i0.A == i1.A);
  CHECK(i0.c == i1.c);
  CHECK(i0.b != i1.b);
  for (const auto& s : d.train) {
    REQUIRE(s.z_star);
    CHECK(s.theta[ControlLayout::kEInit] >= spec.E_min);
    CHECK(s.theta[ControlLayout::kEInit] <= spec.E_max);
    for (int k : {ControlLayout::kZetaInit, ControlLayout::kSInit})
      CHECK((s.theta[k] == 0.0 || s.theta[k] == 1.0));
  }
}

TEST_CASE("control all-off schedule is feasible with zero cost") {
  const ControlSpec spec = small_control();
  const auto f = control_family(spec);
  const ControlLayout L{spec.H};
  Vec theta = Vec::Zero(L.theta_dim());
  theta[ControlLayout::kEInit] = 0.5 * (spec.E_min + spec.E_max);
  const auto inst = realize(f, theta);
  Vec x = Vec::Zero(L.n());
  for (int t = 0; t < spec.H; ++t) x[L.psi(t)] = 1.0;  // psi = 0
  CHECK((inst.A * x - inst.b).maxCoeff() <= 1e-12);
  CHECK(inst.c.dot(x) == 0.0);
  BruteForceOptions o;
  o.max_integer_vars = 64;
  o.lp_bound_pruning = true;
  CHECK(brute_force_optimum(inst, o).z == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("control energy reconstruction stays within bounds at the optimum") {
  const ControlSpec spec = small_control(4);
  const auto d = gen_control(spec);
  BruteForceOptions o;
  o.max_integer_vars = 64;
  o.lp_bound_pruning = true;
  for (const auto& s : d.train) {
    const auto inst = realize(d.family, s.theta);
    const auto opt = brute_force_optimum(inst, o);
    CHECK(opt.z == doctest::Approx(*s.z_star).epsilon(1e-12));
    const Vec E = control_energy(spec, opt.x, s.theta);
    CHECK(E.minCoeff() >= spec.E_min - 1e-7);
    CHECK(E.maxCoeff() <= spec.E_max + 1e-7);
    // Switch indicators cover every change of the on/off state.
    const ControlLayout L{spec.H};
    double prev = s.theta[ControlLayout::kZetaInit];
    for (int t = 0; t < spec.H; ++t) {
      if (std::abs(opt.x[L.zeta(t)] - prev) > 0.5) CHECK(opt.x[L.xi(t)] == doctest::Approx(1.0));
      prev = opt.x[L.zeta(t)];
    }
  }
}

TEST_CASE("generator spec validation") {
  MatchingSpec m;
  m.edges = 200;
  CHECK_THROWS_AS(m.validate(), InvalidInput);
  ControlSpec c;
  c.E_max = c.E_min;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
}
