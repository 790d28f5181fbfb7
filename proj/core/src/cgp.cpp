// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "cplopt/cgp.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace cplopt::cgp {

Norm parse_norm(const std::string& text) {
  if (text == "1") return Norm::l1;
  if (text == "2") return Norm::l2;
  if (text == "inf" || text == "Inf" || text == "infinity") return Norm::linf;
  throw InvalidInput("norm must be one of 1, 2, inf (got '" + text + "')");
}

std::string to_string(Norm p) {
  switch (p) {
    case Norm::l1: return "1";
    case Norm::l2: return "2";
    case Norm::linf: return "inf";
  }
  return "?";
}

Vec trivial_normalization(int m_hat) {
  if (m_hat < 1) throw InvalidInput("trivial_normalization: m_hat must be >= 1");
  Vec d = Vec::Zero(2 * (m_hat + 1));
  d[m_hat] = 1.0;
  d[2 * m_hat + 1] = 1.0;
  return d;
}

Vec standard_normalization(int m_hat) {
  if (m_hat < 1) throw InvalidInput("standard_normalization: m_hat must be >= 1");
  return Vec::Ones(2 * (m_hat + 1));
}

CgpProblem build_cgp(const ProblemInstance& instance, const CutPool& pool, const Vec& x_bar,
                     const CutGenParams& params) {
  const int n = instance.n();
  const int m_hat = instance.m() + pool.size();
  if (x_bar.size() != n) throw InvalidInput("build_cgp: x_bar has the wrong dimension");
  if (params.pi.size() != n) throw InvalidInput("build_cgp: pi has the wrong dimension");
  if (params.D_diag.size() != 2 * (m_hat + 1))
    throw InvalidInput("build_cgp: D_diag must have length 2(m_hat+1) = " +
                       std::to_string(2 * (m_hat + 1)));
  if ((params.D_diag.array() < 0.0).any() || !params.D_diag.allFinite())
    throw InvalidInput("build_cgp: D_diag must be finite and nonnegative");
  if (params.D_dense) {
    if (params.p != Norm::l2) throw InvalidInput("build_cgp: a dense D requires p = 2");
    if (params.D_dense->cols() != 2 * (m_hat + 1))
      throw InvalidInput("build_cgp: dense D has the wrong column count");
  } else if (params.D_diag.maxCoeff() <= 0.0) {
    throw InvalidInput("build_cgp: D_diag needs a positive entry");
  }
  if (pool.size() > 0 && pool.n() != n) throw InvalidInput("build_cgp: pool dimension mismatch");

  CgpProblem P;
  P.params = params;
  P.A_stack.resize(m_hat, n);
  P.A_stack.topRows(instance.m()) = instance.A;
  P.b_hat.resize(m_hat);
  P.b_hat.head(instance.m()) = instance.b;
  for (int k = 0; k < pool.size(); ++k) {
    P.A_stack.row(instance.m() + k) = pool[k].g.transpose();
    P.b_hat[instance.m() + k] = pool[k].h;
  }
  P.x_bar = x_bar.cwiseMax(0.0);
  P.integer.assign(static_cast<std::size_t>(n), false);
  for (int j : instance.integer_indices) P.integer[static_cast<std::size_t>(j)] = true;
  for (int j = 0; j < n; ++j)
    if (!P.integer[static_cast<std::size_t>(j)] && params.pi[j] != 0.0)
      throw InvalidInput("build_cgp: pi must vanish on continuous variables");

  // A slightly infeasible x_bar would otherwise make every tight row a ray with
  // positive objective.
  const Vec act = P.A_stack * P.x_bar;
  P.b_clamped.assign(static_cast<std::size_t>(m_hat), false);
  for (int i = 0; i < m_hat; ++i)
    if (act[i] > P.b_hat[i]) {
      P.b_hat[i] = act[i];
      P.b_clamped[static_cast<std::size_t>(i)] = true;
    }

  // A column with x_bar_j = 0 has no objective weight; its g_j would be free to
  // run to -inf inside the optimal face, so it is read off afterwards instead.
  P.g_slot.assign(static_cast<std::size_t>(n), -1);
  for (int j = 0; j < n; ++j)
    if (P.x_bar[j] > 1e-9) {
      P.g_slot[static_cast<std::size_t>(j)] = static_cast<int>(P.kept.size());
      P.kept.push_back(j);
    }

  const int ng = P.ng();
  const int nm = m_hat + 1;
  const int nvars = ng + 1 + 2 * nm;
  auto& C = P.conic;
  C.c = Vec::Zero(nvars);
  for (int k = 0; k < ng; ++k) C.c[k] = -P.x_bar[P.kept[static_cast<std::size_t>(k)]];
  C.c[P.h_var()] = 1.0;
  // Multipliers with a zero normalization weight span zero-objective rays along
  // every row that is tight at x_bar; a small price on them picks the vertex.
  // A dense D may be rank deficient, so every multiplier gets the price there.
  P.mult_penalty = Vec::Zero(2 * nm);
  for (int i = 0; i < 2 * nm; ++i)
    if (params.D_dense) P.mult_penalty[i] = kDenseRecessionPenalty;
    else if (params.D_diag[i] == 0.0) P.mult_penalty[i] = kRecessionPenalty;
  for (int i = 0; i < nm; ++i) {
    C.c[P.u_var(i)] += P.mult_penalty[i];
    C.c[P.v_var(i)] += P.mult_penalty[nm + i];
  }
  C.A = Mat::Zero(0, nvars);
  C.b = Vec::Zero(0);

  int norm_rows = 0;
  std::vector<int> linf_entries;
  switch (params.p) {
    case Norm::l1: norm_rows = 1; break;
    case Norm::linf:
      for (int i = 0; i < 2 * nm; ++i)
        if (params.D_diag[i] > 0.0) linf_entries.push_back(i);
      norm_rows = static_cast<int>(linf_entries.size());
      break;
    case Norm::l2:
      norm_rows = 1 + (params.D_dense ? static_cast<int>(params.D_dense->rows()) : 2 * nm);
      break;
  }
  const int lin_rows = 2 * ng + 2 + 2 * nm;
  P.norm_row = lin_rows;
  P.norm_rows = norm_rows;
  C.G = Mat::Zero(lin_rows + norm_rows, nvars);
  C.h = Vec::Zero(lin_rows + norm_rows);

  const auto& pi = params.pi;
  for (int k = 0; k < ng; ++k) {
    const int j = P.kept[static_cast<std::size_t>(k)];
    // g_j - A_j'u - pi_j u0 <= 0
    C.G(k, k) = 1.0;
    for (int i = 0; i < m_hat; ++i) C.G(k, P.u_var(i)) = -P.A_stack(i, j);
    C.G(k, P.u_var(m_hat)) = -pi[j];
    // g_j - A_j'v + pi_j v0 <= 0
    C.G(ng + k, k) = 1.0;
    for (int i = 0; i < m_hat; ++i) C.G(ng + k, P.v_var(i)) = -P.A_stack(i, j);
    C.G(ng + k, P.v_var(m_hat)) = pi[j];
  }
  // b'u + eta u0 - h <= 0 ; b'v - (eta+1) v0 - h <= 0
  const int hu = 2 * ng, hv = 2 * ng + 1;
  for (int i = 0; i < m_hat; ++i) {
    C.G(hu, P.u_var(i)) = P.b_hat[i];
    C.G(hv, P.v_var(i)) = P.b_hat[i];
  }
  C.G(hu, P.u_var(m_hat)) = params.eta;
  C.G(hv, P.v_var(m_hat)) = -(params.eta + 1.0);
  C.G(hu, P.h_var()) = -1.0;
  C.G(hv, P.h_var()) = -1.0;
  for (int i = 0; i < nm; ++i) {
    C.G(2 * ng + 2 + i, P.u_var(i)) = -1.0;
    C.G(2 * ng + 2 + nm + i, P.v_var(i)) = -1.0;
  }
  auto mult_var = [&](int idx) { return idx < nm ? P.u_var(idx) : P.v_var(idx - nm); };
  const int r0 = lin_rows;
  switch (params.p) {
    case Norm::l1:
      for (int i = 0; i < 2 * nm; ++i) C.G(r0, mult_var(i)) = params.D_diag[i];
      C.h[r0] = 1.0;
      C.cones.nonneg = lin_rows + 1;
      break;
    case Norm::linf:
      for (std::size_t k = 0; k < linf_entries.size(); ++k) {
        const int i = linf_entries[k];
        C.G(r0 + static_cast<int>(k), mult_var(i)) = params.D_diag[i];
        C.h[r0 + static_cast<int>(k)] = 1.0;
      }
      C.cones.nonneg = lin_rows + norm_rows;
      break;
    case Norm::l2:
      C.h[r0] = 1.0;
      if (params.D_dense) {
        const Mat& D = *params.D_dense;
        for (int r = 0; r < D.rows(); ++r)
          for (int i = 0; i < 2 * nm; ++i) C.G(r0 + 1 + r, mult_var(i)) = -D(r, i);
      } else {
        for (int i = 0; i < 2 * nm; ++i) C.G(r0 + 1 + i, mult_var(i)) = -params.D_diag[i];
      }
      C.cones.nonneg = lin_rows;
      C.cones.soc = {norm_rows};
      break;
  }
  return P;
}

CutCandidate cut_from_multipliers(const CgpProblem& P, const Vec& u, const Vec& v) {
  const int m_hat = P.m_hat();
  const auto& pi = P.params.pi;
  const double eta = P.params.eta;
  CutCandidate c;
  c.u = u;
  c.v = v;
  const Vec a = P.A_stack.transpose() * u.head(m_hat) + pi * u[m_hat];
  const Vec b = P.A_stack.transpose() * v.head(m_hat) - pi * v[m_hat];
  c.g.resize(P.n());
  c.sides.g_from_u.resize(static_cast<std::size_t>(P.n()));
  for (int j = 0; j < P.n(); ++j) {
    const bool from_u = a[j] <= b[j];
    c.sides.g_from_u[static_cast<std::size_t>(j)] = from_u;
    c.g[j] = from_u ? a[j] : b[j];
  }
  const double hu = P.b_hat.dot(u.head(m_hat)) + eta * u[m_hat];
  const double hv = P.b_hat.dot(v.head(m_hat)) - (eta + 1.0) * v[m_hat];
  c.sides.h_from_u = hu >= hv;
  c.h = std::max(hu, hv);
  c.violation = c.g.dot(P.x_bar) - c.h;
  return c;
}

std::optional<CutCandidate> solve_cgp(const CgpProblem& P, double eps_cut, double tol) {
  conic::SolveOptions opts;
  // The recession penalty is only resolved once the gap drops well below it.
  const double base_tol = tol > 0.0 ? tol : conic::default_tolerance();
  opts.tol = base_tol;
  if (P.mult_penalty.maxCoeff() > 0.0) opts.tol = std::min(opts.tol, 1e-10);
  opts.polish = true;
  auto sol = conic::solve(P.conic, opts);
  if (sol.status == conic::Status::numerical_failure && opts.tol < base_tol) {
    // Rank-deficient second-order normalizations can stall short of the tightened
    // tolerance; the base tolerance still gives the optimum, only the face point is looser.
    opts.tol = base_tol;
    sol = conic::solve(P.conic, opts);
  }
  if (sol.status != conic::Status::optimal) {
    spdlog::warn("cgp solve ended with status {}; no cut this head",
                 conic::to_string(sol.status));
    return std::nullopt;
  }
  const int nm = P.num_mult();
  Vec u(nm), v(nm);
  for (int i = 0; i < nm; ++i) {
    u[i] = std::max(sol.x[P.u_var(i)], 0.0);
    v[i] = std::max(sol.x[P.v_var(i)], 0.0);
  }
  auto cand = cut_from_multipliers(P, u, v);
  cand.objective = -sol.objective + P.mult_penalty.head(nm).dot(u) + P.mult_penalty.tail(nm).dot(v);
  cand.raw = std::move(sol);
  if (!(cand.objective > eps_cut) || !(cand.violation > eps_cut)) return std::nullopt;
  return cand;
}

Strengthened monoidal_strengthen(const CutCandidate& cand, const CgpProblem& P) {
  Strengthened out;
  out.cut.g = cand.g;
  out.cut.h = cand.h;
  out.cut.u = cand.u;
  out.cut.v = cand.v;
  out.cut.violation_at_birth = cand.violation;
  out.shift.assign(static_cast<std::size_t>(P.n()), 0);
  const int m_hat = P.m_hat();
  const double u0 = cand.u[m_hat], v0 = cand.v[m_hat];
  if (u0 + v0 <= 1e-12) return out;
  const Vec a = P.A_stack.transpose() * cand.u.head(m_hat);
  const Vec c = P.A_stack.transpose() * cand.v.head(m_hat);
  for (int j = 0; j < P.n(); ++j) {
    if (!P.integer[static_cast<std::size_t>(j)]) continue;
    const double pj = P.params.pi[j];
    const double kstar = (c[j] - a[j] - (u0 + v0) * pj) / (u0 + v0);
    double best = cand.g[j];
    long best_k = 0;
    for (double k : {std::floor(kstar), std::ceil(kstar)}) {
      const double val = std::min(a[j] + u0 * (pj + k), c[j] - v0 * (pj + k));
      if (val > best + 1e-12) {
        best = val;
        best_k = static_cast<long>(k);
      }
    }
    out.cut.g[j] = best;
    out.shift[static_cast<std::size_t>(j)] = best_k;
  }
  out.cut.violation_at_birth = out.cut.g.dot(P.x_bar) - out.cut.h;
  out.applied = true;
  return out;
}

Cut normalized(const Cut& cut) {
  Cut c = cut;
  const double s = std::max(cut.g.norm(), 1e-12);
  c.g /= s;
  c.h /= s;
  c.violation_at_birth /= s;
  return c;
}

bool is_duplicate(const Cut& cut, const CutPool& pool, double tol) {
  for (const auto& row : pool.rows()) {
    const double d = std::max((row.g - cut.g).lpNorm<Eigen::Infinity>(), std::abs(row.h - cut.h));
    if (d <= tol) return true;
  }
  return false;
}

}  // namespace cplopt::cgp
