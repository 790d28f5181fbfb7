// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>

#include "cplopt/instgen.hpp"
#include "cplopt/model.hpp"

namespace cplopt::testing {

// min -x1 - x2  s.t.  2x1 + 2x2 <= 3,  x1 <= 1,  x2 <= 1,  x binary.
inline ProblemInstance toy1() {
  ProblemInstance p;
  p.A.resize(3, 2);
  p.A << 2, 2, 1, 0, 0, 1;
  p.b.resize(3);
  p.b << 3, 1, 1;
  p.c.resize(2);
  p.c << -1, -1;
  p.integer_indices = {0, 1};
  return p;
}

inline Cut make_cut(std::initializer_list<double> g, double h) {
  Cut c;
  c.g = Eigen::Map<const Vec>(g.begin(), static_cast<Eigen::Index>(g.size()));
  c.h = h;
  return c;
}

// Random pure-binary knapsack-style instance with explicit x <= 1 rows.
inline ProblemInstance random_binary(std::mt19937_64& rng, int n, int rows) {
  std::uniform_int_distribution<int> coef(0, 6);
  std::uniform_int_distribution<int> cost(-9, 3);
  ProblemInstance p;
  p.A = Mat::Zero(rows + n, n);
  p.b = Vec::Zero(rows + n);
  for (int i = 0; i < rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      p.A(i, j) = coef(rng);
      sum += p.A(i, j);
    }
    p.b[i] = std::floor(sum / 2.0) + 0.5 * (i % 2);
  }
  for (int j = 0; j < n; ++j) {
    p.A(rows + j, j) = 1.0;
    p.b[rows + j] = 1.0;
  }
  p.c.resize(n);
  for (int j = 0; j < n; ++j) p.c[j] = cost(rng);
  for (int j = 0; j < n; ++j) p.integer_indices.push_back(j);
  return p;
}

// random_binary's constraints with the cost vector as the parameter (c = theta).
// Costs are integers in [-9, 3], so most LP optima are fractional.
inline instgen::Dataset knapsack_dataset(std::uint64_t seed, int n, int rows, int n_train,
                                         int n_validation = 0, int n_test = 0) {
  std::mt19937_64 rng(seed);
  const auto base = random_binary(rng, n, rows);
  instgen::Dataset d;
  d.seed = seed;
  auto& f = d.family;
  f.name = "knapsack";
  f.A = base.A;
  f.b = base.b;
  f.c = base.c;
  f.integer_indices = base.integer_indices;
  f.bound_rows = n;
  f.theta_dim = n;
  for (int j = 0; j < n; ++j) {
    AffineEntry e;
    e.target = AffineEntry::Target::c;
    e.row = j;
    e.terms = {{j, 1.0}};
    f.theta_map.push_back(e);
  }
  std::uniform_int_distribution<int> cost(-9, 3);
  auto draw = [&] {
    instgen::Sample s;
    s.theta.resize(n);
    for (int j = 0; j < n; ++j) s.theta[j] = cost(rng);
    return s;
  };
  for (int i = 0; i < n_train; ++i) d.train.push_back(draw());
  for (int i = 0; i < n_validation; ++i) d.validation.push_back(draw());
  for (int i = 0; i < n_test; ++i) d.test.push_back(draw());
  instgen::compute_optima(d);
  return d;
}

}  // namespace cplopt::testing
