// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cplopt/model.hpp"

#include <string_view>
#include <vector>

namespace cplopt::conic {

/// Row blocks of G in order: `nonneg` orthant rows first, then one block per
/// second-order cone {(t, y) : ||y||_2 <= t}.
struct ConeSpec {
  int nonneg = 0;
  std::vector<int> soc;

  int rows() const;
  int degree() const { return nonneg + static_cast<int>(soc.size()); }
};

/// minimize c'x  s.t.  A x = b,  G x + s = h,  s in K.
struct ConicProblem {
  Vec c;
  Mat A;  // may have zero rows
  Vec b;
  Mat G;
  Vec h;
  ConeSpec cones;

  int num_vars() const { return static_cast<int>(c.size()); }
  void validate() const;
};

enum class Status { optimal, infeasible, unbounded, numerical_failure };
std::string_view to_string(Status status);

struct ConicSolution {
  Status status = Status::numerical_failure;
  Vec x;
  Vec s;
  Vec y;  // equality duals
  Vec z;  // cone duals; c + A'y + G'z = 0 at optimality
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  bool polished = false;  // LP vertex recovered from the active set
  bool reduced_accuracy = false;  // best iterate within 10 tol after the solve stalled
};

struct SolveOptions {
  double tol = -1.0;  // <= 0 selects default_tolerance()
  int max_iterations = 120;
  bool polish = false;  // exact active-set solution (LP vertex or Newton on the cone KKT system)
};

/// 1e-8 unless CPLOPT_SOLVER_TOL is set.
double default_tolerance();

/// Homogeneous self-dual interior-point method with Nesterov-Todd scaling.
ConicSolution solve(const ConicProblem& problem, const SolveOptions& options = {});

struct RelaxationSolution {
  Vec x;
  double objective = 0.0;
  Vec duals;  // one per row of [A; G_pool], >= 0
  ConicProblem problem;
  ConicSolution raw;
};

/// LP relaxation with the cut pool: min c'x, A x <= b, G x <= h, x >= 0.
/// Throws NumericalAbort on infeasible (invalid cut) or unbounded relaxations.
RelaxationSolution solve_relaxation(const ProblemInstance& instance, const CutPool& pool,
                                    double tol = -1.0);

/// The conic form used by solve_relaxation (rows: A, pool, -I).
ConicProblem relaxation_problem(const ProblemInstance& instance, const CutPool& pool);

}  // namespace cplopt::conic
