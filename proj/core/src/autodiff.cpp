// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "cplopt/autodiff.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/LU>
#include <algorithm>
#include <cmath>

namespace cplopt::autodiff {

namespace {

// Arrow matrix of the Jordan product x o y = (x'y, x0 y1 + y0 x1).
Mat arrow(const Vec& x) {
  const int k = static_cast<int>(x.size());
  Mat L = x[0] * Mat::Identity(k, k);
  L.row(0).tail(k - 1) = x.tail(k - 1).transpose();
  L.col(0).tail(k - 1) = x.tail(k - 1);
  return L;
}

// Linearized optimality conditions in the unknowns (dx, dy, dz, ds).
Mat kkt_matrix(const conic::ConicProblem& p, const conic::ConicSolution& sol, double eps,
               double* margin) {
  const int n = p.num_vars();
  const int meq = static_cast<int>(p.A.rows());
  const int R = static_cast<int>(p.G.rows());
  const int N = n + meq + 2 * R;
  const int oy = n, oz = n + meq, os = n + meq + R;
  Mat K = Mat::Zero(N, N);

  K.block(0, 0, n, n).diagonal().setConstant(eps);
  if (meq > 0) {
    K.block(0, oy, n, meq) = p.A.transpose();
    K.block(oy, 0, meq, n) = p.A;
    K.block(oy, oy, meq, meq).diagonal().setConstant(-eps);
  }
  K.block(0, oz, n, R) = p.G.transpose();
  K.block(oz, 0, R, n) = p.G;
  K.block(oz, os, R, R).setIdentity();

  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < p.cones.nonneg; ++i) {
    const double s = std::max(sol.s[i], 0.0), z = std::max(sol.z[i], 0.0);
    m = std::min(m, std::max(s, z));
    if (s <= z) {
      K(os + i, os + i) = 1.0;  // ds_i = 0
      K(os + i, oz + i) = eps;
    } else {
      K(os + i, oz + i) = 1.0;  // dz_i = 0
    }
  }
  int off = p.cones.nonneg;
  for (int k : p.cones.soc) {
    const Vec s = sol.s.segment(off, k), z = sol.z.segment(off, k);
    const double s0 = std::max(s[0], 0.0), z0 = std::max(z[0], 0.0);
    m = std::min(m, std::max(s0, z0));
    if (s0 <= 1e-6 * z0) {
      K.block(os + off, os + off, k, k).setIdentity();
      K.block(os + off, oz + off, k, k).diagonal().setConstant(eps);
    } else if (z0 <= 1e-6 * s0) {
      K.block(os + off, oz + off, k, k).setIdentity();
    } else {
      const double scale = 1.0 / (s0 + z0);
      K.block(os + off, os + off, k, k) = scale * arrow(z);
      K.block(os + off, oz + off, k, k) = scale * arrow(s);
      K.block(os + off, oz + off, k, k).diagonal().array() += eps;
    }
    off += k;
  }
  if (margin) *margin = m;
  return K;
}

}  // namespace

ConicGradient conic_vjp(const conic::ConicProblem& p, const conic::ConicSolution& sol,
                        const Vec& cot_x, const Vec& cot_z) {
  const int n = p.num_vars();
  const int meq = static_cast<int>(p.A.rows());
  const int R = static_cast<int>(p.G.rows());
  if (cot_x.size() != n) throw InvalidInput("conic_vjp: cotangent has the wrong dimension");
  if (cot_z.size() != 0 && cot_z.size() != R)
    throw InvalidInput("conic_vjp: dual cotangent has the wrong dimension");
  if (sol.x.size() != n || sol.z.size() != R || sol.s.size() != R)
    throw InvalidInput("conic_vjp: solution does not match the problem");

  const int N = n + meq + 2 * R;
  Vec rhs = Vec::Zero(N);
  rhs.head(n) = cot_x;
  if (cot_z.size() == R) rhs.segment(n + meq, R) = cot_z;

  ConicGradient out;
  double margin = 0.0;
  Mat K = kkt_matrix(p, sol, 0.0, &margin);
  out.diag.margin = margin;
  Vec lambda;
  bool ok = false;
  if (margin >= kComplementarityMargin) {
    Eigen::PartialPivLU<Mat> lu(K.transpose());
    out.diag.rcond = lu.rcond();
    if (out.diag.rcond > 1e-13) {
      lambda = lu.solve(rhs);
      ok = lambda.allFinite() && (K.transpose() * lambda - rhs).norm() <= 1e-8 * (1.0 + rhs.norm());
    }
  }
  if (!ok) {
    out.diag.regularized = true;
    K = kkt_matrix(p, sol, kBackwardRegularization, nullptr);
    lambda = Eigen::PartialPivLU<Mat>(K.transpose()).solve(rhs);
    if (!lambda.allFinite()) {
      spdlog::warn("conic_vjp: regularized adjoint is not finite; returning zero gradient");
      lambda = Vec::Zero(N);
    }
  }

  const Vec l1 = lambda.head(n);
  const Vec l2 = lambda.segment(n, meq);
  const Vec l3 = lambda.segment(n + meq, R);
  out.c = -l1;
  out.b = l2;
  out.h = l3;
  out.A = meq > 0 ? Mat(-sol.y * l1.transpose() - l2 * sol.x.transpose()) : Mat::Zero(0, n);
  out.G = -sol.z * l1.transpose() - l3 * sol.x.transpose();
  return out;
}

RelaxationGradient relaxation_vjp(const ProblemInstance& instance, const CutPool& pool,
                                  const conic::RelaxationSolution& solution, const Vec& cot_x) {
  const int m = instance.m(), k = pool.size(), n = instance.n();
  if (solution.problem.G.rows() != m + k + n)
    throw InvalidInput("relaxation_vjp: solution was computed for a different pool");
  // The component of cot_x along c only sees the optimal value, whose gradient is
  // the envelope (y x', -y). That stays exact at primal-degenerate vertices where the
  // KKT adjoint would blend multipliers; the remainder goes through the KKT adjoint.
  const Vec& c = instance.c;
  const double cc = c.squaredNorm();
  const double alpha = cc > 0.0 ? cot_x.dot(c) / cc : 0.0;
  const Vec rest = cot_x - alpha * c;
  RelaxationGradient out;
  const Vec y = solution.raw.z.head(m + k);
  const Mat Gv = alpha * y * solution.x.transpose();
  const Vec hv = -alpha * y;
  out.A = Gv.topRows(m);
  out.b = hv.head(m);
  out.G_pool = Gv.middleRows(m, k);
  out.h_pool = hv.segment(m, k);
  if (rest.lpNorm<Eigen::Infinity>() > 1e-14 * std::max(1.0, cot_x.lpNorm<Eigen::Infinity>())) {
    const auto g = conic_vjp(solution.problem, solution.raw, rest);
    out.A += g.G.topRows(m);
    out.b += g.h.head(m);
    out.G_pool += g.G.middleRows(m, k);
    out.h_pool += g.h.segment(m, k);
    out.diag = g.diag;
  }
  return out;
}

namespace {

struct SideChoice {
  std::vector<bool> g_from_u;
  bool h_from_u = true;
  Vec g;
  double h = 0.0;
};

SideChoice choose_sides(const cgp::CgpProblem& P, const Vec& u, const Vec& v,
                        const std::vector<long>& shift) {
  const int m_hat = P.m_hat(), n = P.n();
  const Vec a = P.A_stack.transpose() * u.head(m_hat);
  const Vec c = P.A_stack.transpose() * v.head(m_hat);
  SideChoice out;
  out.g.resize(n);
  out.g_from_u.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double pj = P.params.pi[j] + (shift.empty() ? 0.0 : static_cast<double>(shift[j]));
    const double gu = a[j] + pj * u[m_hat], gv = c[j] - pj * v[m_hat];
    out.g_from_u[static_cast<std::size_t>(j)] = gu <= gv;
    out.g[j] = std::min(gu, gv);
  }
  const double eta = P.params.eta;
  const double hu = P.b_hat.dot(u.head(m_hat)) + eta * u[m_hat];
  const double hv = P.b_hat.dot(v.head(m_hat)) - (eta + 1.0) * v[m_hat];
  out.h_from_u = hu >= hv;
  out.h = std::max(hu, hv);
  return out;
}

}  // namespace

std::pair<Vec, double> shifted_cut(const cgp::CgpProblem& problem, const Vec& u, const Vec& v,
                                   const std::vector<long>& shift) {
  auto s = choose_sides(problem, u, v, shift);
  return {s.g, s.h};
}

CgpGradient cgp_vjp(const cgp::CgpProblem& P, const cgp::CutCandidate& cand, const Vec& cot_g_in,
                    double cot_h_in, const std::vector<long>& shift, bool normalized) {
  const int n = P.n(), m_hat = P.m_hat(), nm = P.num_mult(), ng = P.ng();
  if (cot_g_in.size() != n) throw InvalidInput("cgp_vjp: cotangent has the wrong dimension");
  if (!shift.empty() && static_cast<int>(shift.size()) != n)
    throw InvalidInput("cgp_vjp: shift has the wrong dimension");
  const Vec& u = cand.u;
  const Vec& v = cand.v;
  const auto sides = choose_sides(P, u, v, shift);

  Vec cot_g = cot_g_in;
  double cot_h = cot_h_in;
  if (normalized) {
    const double nrm = std::max(sides.g.norm(), 1e-12);
    const Vec gh = sides.g / nrm;
    const double hh = sides.h / nrm;
    cot_g = (cot_g_in - gh * (gh.dot(cot_g_in) + cot_h_in * hh)) / nrm;
    cot_h = cot_h_in / nrm;
  }

  CgpGradient out;
  out.pi = Vec::Zero(n);
  out.D_diag = Vec::Zero(2 * nm);
  out.A_stack = Mat::Zero(m_hat, n);
  out.b_hat = Vec::Zero(m_hat);
  out.x_bar = Vec::Zero(n);

  // Post-hoc read-off: direct terms and the cotangent on the multipliers.
  Vec cot_u = Vec::Zero(nm), cot_v = Vec::Zero(nm);
  for (int j = 0; j < n; ++j) {
    const double cg = cot_g[j];
    if (cg == 0.0) continue;
    const double pj = P.params.pi[j] + (shift.empty() ? 0.0 : static_cast<double>(shift[j]));
    if (sides.g_from_u[static_cast<std::size_t>(j)]) {
      cot_u.head(m_hat) += cg * P.A_stack.col(j);
      cot_u[m_hat] += cg * pj;
      out.pi[j] += cg * u[m_hat];
      out.A_stack.col(j) += cg * u.head(m_hat);
    } else {
      cot_v.head(m_hat) += cg * P.A_stack.col(j);
      cot_v[m_hat] -= cg * pj;
      out.pi[j] -= cg * v[m_hat];
      out.A_stack.col(j) += cg * v.head(m_hat);
    }
  }
  const double eta = P.params.eta;
  if (sides.h_from_u) {
    cot_u.head(m_hat) += cot_h * P.b_hat;
    cot_u[m_hat] += cot_h * eta;
    out.eta += cot_h * u[m_hat];
    out.b_hat += cot_h * u.head(m_hat);
  } else {
    cot_v.head(m_hat) += cot_h * P.b_hat;
    cot_v[m_hat] -= cot_h * (eta + 1.0);
    out.eta -= cot_h * v[m_hat];
    out.b_hat += cot_h * v.head(m_hat);
  }

  // Through the conic program. Multipliers are clamped at zero when read off,
  // which matches the solution up to solver tolerance.
  Vec cot_x = Vec::Zero(P.conic.num_vars());
  for (int i = 0; i < nm; ++i) {
    cot_x[P.u_var(i)] = cot_u[i];
    cot_x[P.v_var(i)] = cot_v[i];
  }
  if (cot_x.squaredNorm() > 0.0) {
    const auto cg = conic_vjp(P.conic, cand.raw, cot_x);
    out.diag = cg.diag;
    const Mat& dG = cg.G;
    for (int k = 0; k < ng; ++k) {
      const int j = P.kept[static_cast<std::size_t>(k)];
      out.x_bar[j] -= cg.c[k];
      for (int i = 0; i < m_hat; ++i) {
        out.A_stack(i, j) -= dG(k, P.u_var(i));
        out.A_stack(i, j) -= dG(ng + k, P.v_var(i));
      }
      out.pi[j] += -dG(k, P.u_var(m_hat)) + dG(ng + k, P.v_var(m_hat));
    }
    const int hu = 2 * ng, hv = 2 * ng + 1;
    for (int i = 0; i < m_hat; ++i) out.b_hat[i] += dG(hu, P.u_var(i)) + dG(hv, P.v_var(i));
    out.eta += dG(hu, P.u_var(m_hat)) - dG(hv, P.v_var(m_hat));

    auto mult_var = [&](int idx) { return idx < nm ? P.u_var(idx) : P.v_var(idx - nm); };
    const int r0 = P.norm_row;
    switch (P.params.p) {
      case cgp::Norm::l1:
        for (int i = 0; i < 2 * nm; ++i) out.D_diag[i] += dG(r0, mult_var(i));
        break;
      case cgp::Norm::linf: {
        int row = r0;
        for (int i = 0; i < 2 * nm; ++i)
          if (P.params.D_diag[i] > 0.0) out.D_diag[i] += dG(row++, mult_var(i));
        break;
      }
      case cgp::Norm::l2:
        if (P.params.D_dense) {
          Mat dD = Mat::Zero(P.params.D_dense->rows(), 2 * nm);
          for (int r = 0; r < dD.rows(); ++r)
            for (int i = 0; i < 2 * nm; ++i) dD(r, i) = -dG(r0 + 1 + r, mult_var(i));
          out.D_dense = dD;
        } else {
          for (int i = 0; i < 2 * nm; ++i) out.D_diag[i] -= dG(r0 + 1 + i, mult_var(i));
        }
        break;
    }
  }
  for (int i = 0; i < m_hat; ++i)
    if (P.b_clamped[static_cast<std::size_t>(i)]) out.b_hat[i] = 0.0;
  // pi is fixed on continuous columns.
  for (int j = 0; j < n; ++j)
    if (!P.integer[static_cast<std::size_t>(j)]) out.pi[j] = 0.0;
  return out;
}

double FdReport::pass_fraction(double tol) const {
  int reliable = 0, ok = 0;
  for (const auto& c : coords) {
    if (!c.reliable) continue;
    ++reliable;
    if (c.rel_error <= tol) ++ok;
  }
  return reliable == 0 ? 1.0 : static_cast<double>(ok) / reliable;
}

FdReport finite_diff_check(const std::function<double(const Vec&)>& f, const Vec& point,
                           const Vec& analytic, double step, double abs_floor) {
  if (analytic.size() != point.size())
    throw InvalidInput("finite_diff_check: gradient and point differ in size");
  if (!(step > 0.0)) throw InvalidInput("finite_diff_check: step must be positive");
  FdReport report;
  const double f0 = f(point);
  for (int i = 0; i < point.size(); ++i) {
    Vec xp = point, xm = point;
    xp[i] += step;
    xm[i] -= step;
    const double fp = f(xp), fm = f(xm);
    FdCoordinate c;
    c.index = i;
    c.analytic = analytic[i];
    c.numeric = (fp - fm) / (2.0 * step);
    const double fwd = (fp - f0) / step, bwd = (f0 - fm) / step;
    c.reliable = std::abs(fwd - bwd) <= 1e-2 * std::max({std::abs(fwd), std::abs(bwd), abs_floor});
    c.rel_error = std::abs(c.analytic - c.numeric) /
                  std::max({std::abs(c.analytic), std::abs(c.numeric), abs_floor});
    if (c.reliable) report.max_rel_error = std::max(report.max_rel_error, c.rel_error);
    else ++report.unreliable;
    report.coords.push_back(c);
  }
  return report;
}

}  // namespace cplopt::autodiff
