// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "cplopt/subadditive.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "cplopt/conic.hpp"

namespace cplopt::subadditive {

namespace {

void require_pure_integer(const ProblemInstance& instance, const char* who) {
  if (!instance.pure_integer())
    throw InvalidInput(std::string(who) + ": instance must be pure-integer");
}

void require_w(const ProblemInstance& instance, const Vec& w) {
  if (w.size() != instance.m()) throw InvalidInput("w must have one entry per row");
  if (!w.allFinite()) throw InvalidInput("w must be finite");
}

double snapped_floor(double y) {
  const double r = std::round(y);
  return std::abs(y - r) <= 1e-9 ? r : std::floor(y);
}

}  // namespace

double frac(double y) {
  const double r = std::round(y);
  return std::abs(y - r) <= 1e-9 ? 0.0 : y - std::floor(y);
}

double phi(const SubadditiveParams& params, const Vec& y) {
  const double t = params.t;
  if (!(t >= 0.0) || t >= 1.0 - 1e-12) throw InvalidInput("phi: t must lie in [0, 1)");
  if (params.w.size() != y.size()) throw InvalidInput("phi: w and y differ in length");
  const double ratio = t / (1.0 - t);
  const double f = frac(params.w.dot(y));
  return std::min(f, ratio * (1.0 - f)) + (-params.w).cwiseMax(ratio * params.w).dot(y);
}

Inequality subadditive_cut(const ProblemInstance& instance, const Vec& w, double t) {
  require_pure_integer(instance, "subadditive_cut");
  require_w(instance, w);
  const SubadditiveParams p{w, t};
  Inequality out;
  out.g.resize(instance.n());
  for (int j = 0; j < instance.n(); ++j) out.g[j] = -(1.0 - t) * phi(p, -instance.A.col(j));
  out.h = -(1.0 - t) * phi(p, -instance.b);
  return out;
}

Inequality subadditive_cut(const ProblemInstance& instance, const Vec& w) {
  return subadditive_cut(instance, w, frac(instance.b.dot(w)));
}

CgpLift cgp_lift(const ProblemInstance& instance, const Vec& w) {
  require_pure_integer(instance, "cgp_lift");
  require_w(instance, w);
  const int m = instance.m(), n = instance.n();
  CgpLift L;
  L.t = frac(instance.b.dot(w));
  const Vec wp = w.cwiseMax(0.0), wm = (-w).cwiseMax(0.0);
  L.u.resize(m + 1);
  L.u << wp, 1.0 - L.t;
  L.v.resize(m + 1);
  L.v << wm, L.t;
  // Round -A_j'w down when its fractional part is at most t, up otherwise; the
  // disjunction offset follows -b'w the same way.
  L.pi.resize(n);
  for (int j = 0; j < n; ++j) {
    const double s = -instance.A.col(j).dot(w);
    L.pi[j] = frac(s) <= L.t ? snapped_floor(s) : snapped_floor(s) + 1.0;
  }
  L.eta = snapped_floor(-instance.b.dot(w));
  const Vec a = instance.A.transpose() * wp + L.pi * L.u[m];
  const Vec c = instance.A.transpose() * wm - L.pi * L.v[m];
  L.g = a.cwiseMin(c);
  L.h = std::max(instance.b.dot(wp) + L.eta * L.u[m], instance.b.dot(wm) - (L.eta + 1.0) * L.v[m]);
  return L;
}

double lift_residual(const ProblemInstance& instance, const CgpLift& L) {
  const int m = instance.m();
  const Vec a = instance.A.transpose() * L.u.head(m) + L.pi * L.u[m];
  const Vec c = instance.A.transpose() * L.v.head(m) - L.pi * L.v[m];
  double r = 0.0;
  r = std::max(r, (L.g - a).maxCoeff());
  r = std::max(r, (L.g - c).maxCoeff());
  r = std::max(r, instance.b.dot(L.u.head(m)) + L.eta * L.u[m] - L.h);
  r = std::max(r, instance.b.dot(L.v.head(m)) - (L.eta + 1.0) * L.v[m] - L.h);
  r = std::max(r, -L.u.minCoeff());
  r = std::max(r, -L.v.minCoeff());
  r = std::max(r, std::abs(L.u[m] + L.v[m] - 1.0));
  return r;
}

bool dominates(const Inequality& cut1, const Inequality& cut2, const ProblemInstance& instance) {
  const int n = instance.n(), m = instance.m();
  if (cut1.g.size() != n || cut2.g.size() != n) throw InvalidInput("dominates: dimension mismatch");
  conic::ConicProblem p;
  p.c = -cut2.g;
  p.A = Mat::Zero(0, n);
  p.b = Vec::Zero(0);
  p.G = Mat::Zero(m + 1 + n, n);
  p.h = Vec::Zero(m + 1 + n);
  p.G.topRows(m) = instance.A;
  p.h.head(m) = instance.b;
  p.G.row(m) = cut1.g.transpose();
  p.h[m] = cut1.h;
  p.G.bottomRows(n) = -Mat::Identity(n, n);
  p.cones.nonneg = m + 1 + n;
  conic::SolveOptions opts;
  opts.polish = true;
  const auto sol = conic::solve(p, opts);
  switch (sol.status) {
    case conic::Status::optimal: return -sol.objective <= cut2.h + 1e-8;
    case conic::Status::infeasible: return true;
    case conic::Status::unbounded:
      spdlog::warn("dominates: auxiliary LP is unbounded");
      return false;
    case conic::Status::numerical_failure:
      spdlog::warn("dominates: auxiliary LP failed");
      return false;
  }
  return false;
}

LiftNormalization lift_normalization(const ProblemInstance& instance, const Vec& x_bar, const Vec& w) {
  const auto L = cgp_lift(instance, w);
  const int m = instance.m(), n = instance.n(), nm = m + 1;
  if (x_bar.size() != n) throw InvalidInput("lift_normalization: x_bar has the wrong dimension");
  const Vec x = x_bar.cwiseMax(0.0);

  LiftNormalization out;
  out.u_tilde.resize(2 * nm);
  out.u_tilde << L.u, L.v;

  // Objective of the rewritten program: sum_j x_j min(a_j(u), c_j(v)) - max(hu(u), hv(v)).
  // Its supergradient at u_tilde picks the attaining side per column and for h.
  const Vec a = instance.A.transpose() * L.u.head(m) + L.pi * L.u[m];
  const Vec c = instance.A.transpose() * L.v.head(m) - L.pi * L.v[m];
  const double hu = instance.b.dot(L.u.head(m)) + L.eta * L.u[m];
  const double hv = instance.b.dot(L.v.head(m)) - (L.eta + 1.0) * L.v[m];
  Vec q = Vec::Zero(2 * nm);
  bool uniform_u = true, uniform_v = true;
  for (int j = 0; j < n; ++j) {
    if (x[j] == 0.0) continue;
    if (a[j] <= c[j]) {
      q.head(m) += x[j] * instance.A.col(j);
      q[m] += x[j] * L.pi[j];
      uniform_v = false;
    } else {
      q.segment(nm, m) += x[j] * instance.A.col(j);
      q[nm + m] -= x[j] * L.pi[j];
      uniform_u = false;
    }
  }
  const bool h_from_u = hu >= hv;
  if (h_from_u) {
    q.head(m) -= instance.b;
    q[m] -= L.eta;
  } else {
    q.segment(nm, m) -= instance.b;
    q[nm + m] += L.eta + 1.0;
  }
  if (!(uniform_u || uniform_v)) out.branch = -1;
  else out.branch = uniform_u ? (h_from_u ? 0 : 2) : (h_from_u ? 3 : 1);

  if (q.norm() <= 1e-14) throw InvalidInput("lift_normalization: zero supergradient");
  const double viol = q.dot(out.u_tilde);
  if (!(viol > 1e-12)) throw InvalidInput("lift_normalization: the cut does not cut off x_bar");
  out.q = q;
  out.violation = viol;
  // D_tilde = q q' / (2 u'q); ||D u||^2 = lambda (q'u)/2 = 1.
  out.lambda = 2.0 / viol;
  const double scale = std::sqrt(out.lambda / (2.0 * viol));
  // sqrt of the rank-one PSD matrix s^2 q q' is s q q' / ||q||.
  out.D = (scale / q.norm()) * (q * q.transpose());

  out.params.pi = L.pi;
  out.params.eta = L.eta;
  out.params.D_diag = Vec::Ones(2 * nm);  // unused with a dense D, kept for sizing
  out.params.p = cgp::Norm::l2;
  out.params.D_dense = out.D;
  return out;
}

}  // namespace cplopt::subadditive
