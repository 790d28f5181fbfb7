// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cplopt/cgp.hpp"
#include "cplopt/conic.hpp"
#include "cplopt/model.hpp"

namespace cplopt::autodiff {

/// Primal regularization of the backward model when the KKT system is singular
/// or complementarity is marginal.
inline constexpr double kBackwardRegularization = 1e-8;
/// Smallest multiplier (or slack) that counts as strictly complementary.
inline constexpr double kComplementarityMargin = 1e-7;

struct BackwardDiagnostics {
  bool regularized = false;
  double margin = 0.0;  // smallest of the two gaps over all rows
  double rcond = 0.0;   // reciprocal condition estimate of the unregularized system
};

/// Gradients of <cot_x, x> + <cot_z, z> with respect to the conic data.
struct ConicGradient {
  Vec c;
  Mat A;
  Vec b;
  Mat G;
  Vec h;
  BackwardDiagnostics diag;
};

/// Implicit differentiation of the optimality conditions at `solution`.
/// Orthant rows are split into active (s_i <= z_i, ds_i = 0) and inactive
/// (dz_i = 0); second-order blocks use the linearized Jordan product.
/// `cot_z` may be empty.
ConicGradient conic_vjp(const conic::ConicProblem& problem, const conic::ConicSolution& solution,
                        const Vec& cot_x, const Vec& cot_z = Vec());

struct RelaxationGradient {
  Mat G_pool;  // |pool| x n
  Vec h_pool;
  Mat A;       // instance rows, for completeness
  Vec b;
  BackwardDiagnostics diag;
};

/// d(cot_x . x~)/d(pool rows) at a relaxation solution. The part of cot_x along c
/// uses the envelope gradient of the optimal value; the rest the KKT adjoint.
RelaxationGradient relaxation_vjp(const ProblemInstance& instance, const CutPool& pool,
                                  const conic::RelaxationSolution& solution, const Vec& cot_x);

struct CgpGradient {
  Vec pi;
  double eta = 0.0;
  Vec D_diag;                  // zero when a dense D was used
  std::optional<Mat> D_dense;
  Mat A_stack;                 // m_hat x n
  Vec b_hat;                   // zero on clamped rows
  Vec x_bar;
  BackwardDiagnostics diag;
};

/// Gradient of cot . (g, h) for the cut read off a CGP solution. `shift` holds
/// the integer shifts of a strengthened cut (empty for none); with `normalized`
/// the cotangent refers to (g, h) / ||g||.
CgpGradient cgp_vjp(const cgp::CgpProblem& problem, const cgp::CutCandidate& candidate,
                    const Vec& cot_g, double cot_h, const std::vector<long>& shift = {},
                    bool normalized = false);

/// (g, h) of the candidate after the given shifts, with the same side rule the
/// strengthening uses. Exposed so tests can compare against cgp_vjp.
std::pair<Vec, double> shifted_cut(const cgp::CgpProblem& problem, const Vec& u, const Vec& v,
                                   const std::vector<long>& shift);

struct FdCoordinate {
  int index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool reliable = true;  // false when the one-sided differences disagree (kink)
};

struct FdReport {
  double max_rel_error = 0.0;  // over reliable coordinates
  std::vector<FdCoordinate> coords;
  int unreliable = 0;
  bool passed(double tol = 1e-3) const { return max_rel_error <= tol; }
  /// Fraction of reliable coordinates within tol.
  double pass_fraction(double tol = 1e-3) const;
};

/// Central differences of f around `point` compared with `analytic`.
/// rel_error = |a - n| / max(|a|, |n|, abs_floor). A coordinate whose forward and
/// backward one-sided slopes differ by more than 1% is flagged unreliable and
/// left out of max_rel_error.
FdReport finite_diff_check(const std::function<double(const Vec&)>& f, const Vec& point,
                           const Vec& analytic, double step = 1e-5, double abs_floor = 1e-3);

}  // namespace cplopt::autodiff
