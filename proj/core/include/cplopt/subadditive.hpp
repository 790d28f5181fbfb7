// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cplopt/cgp.hpp"
#include "cplopt/model.hpp"

namespace cplopt::subadditive {

struct SubadditiveParams {
  Vec w;
  double t = 0.0;  // in [0, 1)
};

/// y - floor(y), snapped to 0 within 1e-9 of an integer.
double frac(double y);

/// Phi_{w,t}(y) = min(frac(w'y), t/(1-t) (1 - frac(w'y))) + max(-w, t/(1-t) w)'y.
double phi(const SubadditiveParams& params, const Vec& y);

struct Inequality {
  Vec g;  // g'x <= h
  double h = 0.0;
};

/// -(1-t) Phi(-A) x <= -(1-t) Phi(-b) with t = frac(b'w). Pure-integer instances only.
Inequality subadditive_cut(const ProblemInstance& instance, const Vec& w);
/// Same with an explicit t in [0, 1).
Inequality subadditive_cut(const ProblemInstance& instance, const Vec& w, double t);

/// CGP-feasible point that reproduces the subadditive cut.
struct CgpLift {
  Vec g;
  double h = 0.0;
  Vec u, v;  // (w+, 1-t) and (w-, t)
  Vec pi;
  double eta = 0.0;
  double t = 0.0;
};

CgpLift cgp_lift(const ProblemInstance& instance, const Vec& w);

/// Largest violation of the CGP rows (g/h rows, sign constraints, trivial normalization)
/// at the lifted point, measured over the stacked rows [A; pool] (pool may be empty).
double lift_residual(const ProblemInstance& instance, const CgpLift& lift);

/// True when max{g2'x : A x <= b, x >= 0, g1'x <= h1} <= h2 + 1e-8.
bool dominates(const Inequality& cut1, const Inequality& cut2, const ProblemInstance& instance);

/// Rank-one normalization for p = 2 under which the lifted multipliers are optimal.
struct LiftNormalization {
  Mat D;            // 2(m+1) x 2(m+1), symmetric PSD root of lambda * D_tilde
  Vec q;            // supergradient of the cut objective at u_tilde
  Vec u_tilde;      // (u*, v*)
  double lambda = 0.0;
  double violation = 0.0;  // q'u_tilde
  int branch = 0;  // sides of (g, h): 0 (u,u), 1 (v,v), 2 (u,v), 3 (v,u); -1 when g mixes sides
  cgp::CutGenParams params;  // pi, eta, dense D, p = 2
};

/// Throws InvalidInput when the cut from w does not cut off x_bar or q vanishes.
LiftNormalization lift_normalization(const ProblemInstance& instance, const Vec& x_bar, const Vec& w);

}  // namespace cplopt::subadditive
