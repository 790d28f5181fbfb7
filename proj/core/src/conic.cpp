// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "cplopt/conic.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>

namespace cplopt::conic {

int ConeSpec::rows() const { return nonneg + std::accumulate(soc.begin(), soc.end(), 0); }

void ConicProblem::validate() const {
  const auto n = c.size();
  if (G.cols() != n || (A.rows() > 0 && A.cols() != n))
    throw InvalidInput("conic problem: column count does not match objective");
  if (G.rows() != h.size() || A.rows() != b.size())
    throw InvalidInput("conic problem: row count does not match right-hand side");
  if (cones.rows() != G.rows())
    throw InvalidInput("conic problem: cone dimensions do not cover the rows of G");
  for (int k : cones.soc)
    if (k < 1) throw InvalidInput("conic problem: empty second-order cone");
  if (!c.allFinite() || !G.allFinite() || !h.allFinite() || !A.allFinite() || !b.allFinite())
    throw InvalidInput("conic problem: non-finite data");
}

std::string_view to_string(Status status) {
  switch (status) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

double default_tolerance() {
  static const double tol = [] {
    if (const char* env = std::getenv("CPLOPT_SOLVER_TOL")) {
      char* end = nullptr;
      const double v = std::strtod(env, &end);
      if (end != env && v > 0.0 && std::isfinite(v)) return v;
      spdlog::warn("ignoring malformed CPLOPT_SOLVER_TOL='{}'", env);
    }
    return 1e-8;
  }();
  return tol;
}

namespace {

struct SocScale {
  double eta = 1.0;
  Vec w;  // hyperbolic Householder vector, w'Jw = 1
};

// Blockwise cone algebra over the layout [nonneg | soc_1 | soc_2 | ...].
class ConeOps {
 public:
  explicit ConeOps(const ConeSpec& spec) : spec_(spec) {
    int start = spec.nonneg;
    for (int k : spec.soc) {
      starts_.push_back(start);
      start += k;
    }
    rows_ = start;
  }

  int rows() const { return rows_; }
  int degree() const { return spec_.degree(); }

  Vec identity() const {
    Vec e = Vec::Zero(rows_);
    e.head(spec_.nonneg).setOnes();
    for (int s : starts_) e[s] = 1.0;
    return e;
  }

  // Smallest "eigenvalue" of u with respect to the cone.
  double min_eig(const Vec& u) const {
    double r = std::numeric_limits<double>::infinity();
    if (spec_.nonneg > 0) r = u.head(spec_.nonneg).minCoeff();
    for (std::size_t k = 0; k < starts_.size(); ++k) {
      const int s = starts_[k], d = spec_.soc[k];
      r = std::min(r, u[s] - u.segment(s + 1, d - 1).norm());
    }
    return r;
  }

  // Largest alpha with u + alpha du in the cone (capped at `cap`).
  double max_step(const Vec& u, const Vec& du, double cap) const {
    double alpha = cap;
    for (int i = 0; i < spec_.nonneg; ++i)
      if (du[i] < 0.0) alpha = std::min(alpha, -u[i] / du[i]);
    for (std::size_t k = 0; k < starts_.size(); ++k) {
      const int s = starts_[k], d = spec_.soc[k];
      const double u0 = u[s], d0 = du[s];
      const auto u1 = u.segment(s + 1, d - 1);
      const auto d1 = du.segment(s + 1, d - 1);
      const double a = d0 * d0 - d1.squaredNorm();
      const double b = u0 * d0 - u1.dot(d1);
      const double c = std::max(u0 * u0 - u1.squaredNorm(), 0.0);
      double root = std::numeric_limits<double>::infinity();
      const double disc = b * b - a * c;
      if (std::abs(a) < 1e-300) {
        if (b < 0.0) root = -c / (2.0 * b);
      } else if (a < 0.0) {
        root = (-b - std::sqrt(std::max(disc, 0.0))) / a;
      } else if (b < 0.0 && disc >= 0.0) {
        root = (-b - std::sqrt(disc)) / a;
      }
      if (d0 < 0.0) root = std::min(root, -u0 / d0);
      alpha = std::min(alpha, std::max(root, 0.0));
    }
    return alpha;
  }

  // Jordan product u o v.
  Vec product(const Vec& u, const Vec& v) const {
    Vec r(rows_);
    r.head(spec_.nonneg) = u.head(spec_.nonneg).cwiseProduct(v.head(spec_.nonneg));
    for (std::size_t k = 0; k < starts_.size(); ++k) {
      const int s = starts_[k], d = spec_.soc[k];
      r[s] = u.segment(s, d).dot(v.segment(s, d));
      r.segment(s + 1, d - 1) = u[s] * v.segment(s + 1, d - 1) + v[s] * u.segment(s + 1, d - 1);
    }
    return r;
  }

  // Solves lambda o x = r for x.
  Vec divide(const Vec& lambda, const Vec& r) const {
    Vec x(rows_);
    x.head(spec_.nonneg) = r.head(spec_.nonneg).cwiseQuotient(lambda.head(spec_.nonneg));
    for (std::size_t k = 0; k < starts_.size(); ++k) {
      const int s = starts_[k], d = spec_.soc[k];
      const double l0 = lambda[s];
      const auto l1 = lambda.segment(s + 1, d - 1);
      const double det = l0 * l0 - l1.squaredNorm();
      const double x0 = (l0 * r[s] - l1.dot(r.segment(s + 1, d - 1))) / det;
      x[s] = x0;
      x.segment(s + 1, d - 1) = (r.segment(s + 1, d - 1) - x0 * l1) / l0;
    }
    return x;
  }

  struct Scaling {
    Vec lp;  // sqrt(s/z)
    std::vector<SocScale> soc;
  };

  Scaling nt_scaling(const Vec& s, const Vec& z) const {
    Scaling W;
    W.lp = (s.head(spec_.nonneg).cwiseQuotient(z.head(spec_.nonneg))).cwiseSqrt();
    for (std::size_t k = 0; k < starts_.size(); ++k) {
      const int st = starts_[k], d = spec_.soc[k];
      const Vec sk = s.segment(st, d), zk = z.segment(st, d);
      const double sn = std::sqrt(std::max(sk[0] * sk[0] - sk.tail(d - 1).squaredNorm(), 1e-300));
      const double zn = std::sqrt(std::max(zk[0] * zk[0] - zk.tail(d - 1).squaredNorm(), 1e-300));
      const Vec sb = sk / sn, zb = zk / zn;
      const double gamma = std::sqrt(std::max((1.0 + sb.dot(zb)) / 2.0, 1e-300));
      Vec w(d);
      w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
      w.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * gamma);
      W.soc.push_back({std::sqrt(sn / zn), std::move(w)});
    }
    return W;
  }

  // y = W x (inverse = false) or y = W^{-1} x.
  Vec apply(const Scaling& W, const Vec& x, bool inverse) const {
    Vec y(rows_);
    if (inverse)
      y.head(spec_.nonneg) = x.head(spec_.nonneg).cwiseQuotient(W.lp);
    else
      y.head(spec_.nonneg) = x.head(spec_.nonneg).cwiseProduct(W.lp);
    for (std::size_t k = 0; k < starts_.size(); ++k) {
      const int s = starts_[k], d = spec_.soc[k];
      const auto& sc = W.soc[k];
      const double w0 = sc.w[0];
      const auto w1 = sc.w.tail(d - 1);
      const double x0 = x[s];
      const auto x1 = x.segment(s + 1, d - 1);
      const double w1x1 = w1.dot(x1);
      if (!inverse) {
        y[s] = sc.eta * (w0 * x0 + w1x1);
        y.segment(s + 1, d - 1) = sc.eta * (x1 + (x0 + w1x1 / (1.0 + w0)) * w1);
      } else {
        y[s] = (w0 * x0 - w1x1) / sc.eta;
        y.segment(s + 1, d - 1) = (x1 - (x0 - w1x1 / (1.0 + w0)) * w1) / sc.eta;
      }
    }
    return y;
  }

  Vec apply_squared(const Scaling& W, const Vec& x, bool inverse) const {
    return apply(W, apply(W, x, inverse), inverse);
  }

  // G' W^{-2} G
  Mat weighted_gram(const Scaling& W, const Mat& G) const {
    const int n = static_cast<int>(G.cols());
    Mat H = Mat::Zero(n, n);
    if (spec_.nonneg > 0) {
      const Vec d = W.lp.cwiseInverse().cwiseAbs2();
      const auto Gl = G.topRows(spec_.nonneg);
      H.noalias() += Gl.transpose() * d.asDiagonal() * Gl;
    }
    for (std::size_t k = 0; k < starts_.size(); ++k) {
      const int s = starts_[k], d = spec_.soc[k];
      const auto& sc = W.soc[k];
      const auto Gk = G.middleRows(s, d);
      // W^{-2} = eta^{-2} (2 (Jw)(Jw)' - J)
      Vec Jw = sc.w;
      Jw.tail(d - 1) *= -1.0;
      const Vec q = Gk.transpose() * Jw;
      const double inv = 1.0 / (sc.eta * sc.eta);
      H.noalias() += (2.0 * inv) * q * q.transpose();
      H.noalias() -= inv * Gk.row(0).transpose() * Gk.row(0);
      H.noalias() += inv * Gk.bottomRows(d - 1).transpose() * Gk.bottomRows(d - 1);
    }
    return H;
  }

 private:
  const ConeSpec& spec_;
  std::vector<int> starts_;
  int rows_ = 0;
};

// Factorization of [0 A' G'; A 0 0; G 0 -W^2] through the reduced system.
class KktSystem {
 public:
  KktSystem(const ConicProblem& p, const ConeOps& ops, const ConeOps::Scaling& W, double reg)
      : p_(p), ops_(ops), W_(W) {
    const int n = p.num_vars();
    const int meq = static_cast<int>(p.A.rows());
    Mat H = ops.weighted_gram(W, p.G);
    H.diagonal().array() += reg;
    if (meq == 0) {
      llt_.compute(H);
      use_llt_ = llt_.info() == Eigen::Success;
      if (!use_llt_) {
        lu_.compute(H);
      }
    } else {
      Mat K(n + meq, n + meq);
      K.topLeftCorner(n, n) = H;
      K.topRightCorner(n, meq) = p.A.transpose();
      K.bottomLeftCorner(meq, n) = p.A;
      K.bottomRightCorner(meq, meq) = -reg * Mat::Identity(meq, meq);
      lu_.compute(K);
      use_llt_ = false;
    }
  }

  struct Sol {
    Vec x, y, z;
  };

  Sol solve(const Vec& r1, const Vec& r2, const Vec& r3, int refine = 2) const {
    Sol sol = solve_once(r1, r2, r3);
    for (int it = 0; it < refine; ++it) {
      // residual of the unregularized system
      const Vec e1 = r1 - (p_.A.transpose() * sol.y + p_.G.transpose() * sol.z);
      const Vec e2 = r2 - p_.A * sol.x;
      const Vec e3 = r3 - (p_.G * sol.x - ops_.apply_squared(W_, sol.z, false));
      const double err = std::max({e1.lpNorm<Eigen::Infinity>(),
                                   e2.size() ? e2.lpNorm<Eigen::Infinity>() : 0.0,
                                   e3.lpNorm<Eigen::Infinity>()});
      if (!(err > 1e-14)) break;
      const Sol corr = solve_once(e1, e2, e3);
      sol.x += corr.x;
      sol.y += corr.y;
      sol.z += corr.z;
    }
    return sol;
  }

 private:
  Sol solve_once(const Vec& r1, const Vec& r2, const Vec& r3) const {
    const int n = p_.num_vars();
    const int meq = static_cast<int>(p_.A.rows());
    const Vec Winv2r3 = ops_.apply_squared(W_, r3, true);
    const Vec rhs = r1 + p_.G.transpose() * Winv2r3;
    Sol sol;
    if (meq == 0) {
      sol.x = use_llt_ ? Vec(llt_.solve(rhs)) : Vec(lu_.solve(rhs));
      sol.y = Vec::Zero(0);
    } else {
      Vec full(n + meq);
      full << rhs, r2;
      const Vec out = lu_.solve(full);
      sol.x = out.head(n);
      sol.y = out.tail(meq);
    }
    sol.z = ops_.apply_squared(W_, p_.G * sol.x - r3, true);
    return sol;
  }

  const ConicProblem& p_;
  const ConeOps& ops_;
  const ConeOps::Scaling& W_;
  Eigen::LLT<Mat> llt_;
  Eigen::PartialPivLU<Mat> lu_;
  bool use_llt_ = false;
};

// Orthonormal basis of a growing row set (modified Gram-Schmidt, two passes).
class RowBasis {
 public:
  explicit RowBasis(int n) : Q_(n, 0) {}
  int size() const { return static_cast<int>(Q_.cols()); }

  // Adds the row when it is independent of the current span (relative threshold).
  bool try_add(const Vec& row, double thresh = 1e-9) {
    const double norm = row.norm();
    if (norm == 0.0) return false;
    const Vec r = residual(row);
    if (r.norm() <= thresh * norm) return false;
    Q_.conservativeResize(Eigen::NoChange, Q_.cols() + 1);
    Q_.col(Q_.cols() - 1) = r / r.norm();
    return true;
  }

  Vec residual(Vec v) const {
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index k = 0; k < Q_.cols(); ++k) v -= Q_.col(k).dot(v) * Q_.col(k);
    return v;
  }

  // Unit vector orthogonal to the span: the projected coordinate axis with the
  // largest residual (lowest index on ties), first nonzero entry positive.
  Vec null_direction() const {
    const int n = static_cast<int>(Q_.rows());
    Vec best;
    double best_norm = -1.0;
    for (int j = 0; j < n; ++j) {
      const Vec r = residual(Vec::Unit(n, j));
      const double rn = r.norm();
      if (rn > best_norm + 1e-12) {
        best_norm = rn;
        best = r;
      }
    }
    best /= best_norm;
    for (int j = 0; j < n; ++j)
      if (std::abs(best[j]) > 1e-12) {
        if (best[j] < 0.0) best = -best;
        break;
      }
    return best;
  }

 private:
  Mat Q_;
};

// Recovers an exact LP vertex from the active set of an interior-point solution.
bool polish_lp(const ConicProblem& p, ConicSolution& sol, double tol) {
  const int n = p.num_vars();
  const int meq = static_cast<int>(p.A.rows());
  const int rows = static_cast<int>(p.G.rows());
  std::vector<int> active;
  for (int i = 0; i < rows; ++i)
    if (sol.s[i] < sol.z[i]) active.push_back(i);
  std::stable_sort(active.begin(), active.end(),
                   [&](int a, int b) { return sol.z[a] > sol.z[b]; });

  // Greedy independent subset, strongest duals first.
  RowBasis span(n);
  for (int i = 0; i < meq; ++i)
    if (!span.try_add(p.A.row(i).transpose())) return false;
  std::vector<int> basis;
  std::vector<bool> in_basis(static_cast<std::size_t>(rows), false);
  for (int i : active) {
    if (span.size() == n) break;
    if (span.try_add(p.G.row(i).transpose())) {
      basis.push_back(i);
      in_basis[static_cast<std::size_t>(i)] = true;
    }
  }
  // Optimal face is not a vertex: walk inside it (objective is constant there)
  // until enough rows are tight.
  Vec xw = sol.x;
  while (span.size() < n) {
    const Vec d = span.null_direction();
    int block = -1;
    double t_best = std::numeric_limits<double>::infinity();
    for (int sign : {1, -1}) {
      const Vec dir = sign * d;
      for (int i = 0; i < rows; ++i) {
        if (in_basis[static_cast<std::size_t>(i)]) continue;
        const double rate = p.G.row(i).dot(dir);
        if (rate <= 1e-12) continue;
        const double t = std::max(0.0, (p.h[i] - p.G.row(i).dot(xw)) / rate);
        if (t < t_best) {
          t_best = t;
          block = i;
        }
      }
      if (block >= 0) {
        xw += t_best * dir;
        break;
      }
    }
    if (block < 0 || !span.try_add(p.G.row(block).transpose())) return false;
    basis.push_back(block);
    in_basis[static_cast<std::size_t>(block)] = true;
  }
  Mat J(meq + static_cast<int>(basis.size()), n);
  if (meq > 0) J.topRows(meq) = p.A;
  for (std::size_t k = 0; k < basis.size(); ++k) J.row(meq + static_cast<int>(k)) = p.G.row(basis[k]);
  if (J.rows() != n) return false;
  Eigen::PartialPivLU<Mat> lu(J);
  Vec rhs(n);
  if (meq > 0) rhs.head(meq) = p.b;
  for (std::size_t k = 0; k < basis.size(); ++k) rhs[meq + static_cast<int>(k)] = p.h[basis[k]];
  const Vec x = lu.solve(rhs);
  const Vec mult = lu.transpose().solve(Vec(-p.c));
  if (!x.allFinite() || !mult.allFinite()) return false;

  const Vec slack = p.h - p.G * x;
  const double scale_h = 1.0 + p.h.lpNorm<Eigen::Infinity>();
  if (slack.minCoeff() < -tol * scale_h) return false;
  if (meq > 0 && (p.A * x - p.b).lpNorm<Eigen::Infinity>() > tol * (1.0 + p.b.lpNorm<Eigen::Infinity>()))
    return false;
  const double scale_c = 1.0 + p.c.lpNorm<Eigen::Infinity>();
  for (int k = meq; k < n; ++k)
    if (mult[k] < -tol * scale_c) return false;
  const double obj = p.c.dot(x);
  if (obj > sol.objective + 10.0 * tol * (1.0 + std::abs(sol.objective))) return false;

  sol.x = x;
  sol.s = slack.cwiseMax(0.0);
  sol.z = Vec::Zero(rows);
  for (std::size_t k = 0; k < basis.size(); ++k)
    sol.z[basis[k]] = std::max(mult[meq + static_cast<int>(k)], 0.0);
  sol.y = meq > 0 ? Vec(mult.head(meq)) : Vec::Zero(0);
  sol.objective = obj;
  sol.primal_residual = std::max(0.0, -slack.minCoeff()) / scale_h;
  sol.dual_residual = (p.c + p.G.transpose() * sol.z + (meq ? Vec(p.A.transpose() * sol.y) : Vec::Zero(n)))
                          .lpNorm<Eigen::Infinity>() / scale_c;
  sol.gap = sol.s.dot(sol.z);
  sol.polished = true;
  return true;
}

// Mixed-cone analogue of polish_lp: Newton on the square active-set system
//   c + A'y + G_act'z_act + sum_k alpha_k G_k' J s_k(x) = 0,  A x = b,
//   G_act x = h_act,  s_k(x)'J s_k(x) / 2 = 0 on boundary cones,
// where J = diag(1, -1, ..., -1) and complementary boundary pairs satisfy z_k = alpha_k J s_k.
// Cones with a vanishing slack count as active rows; interior ones drop out.
bool polish_newton(const ConicProblem& p, ConicSolution& sol, double tol) {
  const int n = p.num_vars();
  const int meq = static_cast<int>(p.A.rows());
  std::vector<int> act;                    // rows held as equalities
  std::vector<std::pair<int, int>> bdry;   // (offset, size) of boundary cones
  std::vector<double> alpha0;
  for (int i = 0; i < p.cones.nonneg; ++i)
    if (sol.s[i] < sol.z[i]) act.push_back(i);
  int off = p.cones.nonneg;
  for (int k : p.cones.soc) {
    const double s0 = sol.s[off], z0 = sol.z[off];
    if (s0 <= 1e-6 * z0) {
      for (int i = 0; i < k; ++i) act.push_back(off + i);
    } else if (z0 > 1e-6 * s0) {
      bdry.emplace_back(off, k);
      alpha0.push_back(z0 / s0);
    }
    off += k;
  }
  const int na = static_cast<int>(act.size()), nb = static_cast<int>(bdry.size());
  const int N = n + meq + na + nb;
  Vec w(N);
  w.head(n) = sol.x;
  if (meq) w.segment(n, meq) = sol.y;
  for (int a = 0; a < na; ++a) w[n + meq + a] = sol.z[act[static_cast<std::size_t>(a)]];
  for (int b = 0; b < nb; ++b) w[n + meq + na + b] = alpha0[static_cast<std::size_t>(b)];

  auto jflip = [](Vec v) {
    v.tail(v.size() - 1) *= -1.0;
    return v;
  };
  auto residual = [&](const Vec& v, Mat* jac) {
    const Vec x = v.head(n);
    Vec r = Vec::Zero(N);
    if (jac) jac->setZero(N, N);
    r.head(n) = p.c;
    if (meq) {
      r.head(n) += p.A.transpose() * v.segment(n, meq);
      r.segment(n, meq) = p.A * x - p.b;
      if (jac) {
        jac->block(0, n, n, meq) = p.A.transpose();
        jac->block(n, 0, meq, n) = p.A;
      }
    }
    for (int a = 0; a < na; ++a) {
      const int i = act[static_cast<std::size_t>(a)];
      r.head(n) += p.G.row(i).transpose() * v[n + meq + a];
      r[n + meq + a] = p.G.row(i).dot(x) - p.h[i];
      if (jac) {
        jac->block(0, n + meq + a, n, 1) = p.G.row(i).transpose();
        jac->block(n + meq + a, 0, 1, n) = p.G.row(i);
      }
    }
    for (int b = 0; b < nb; ++b) {
      const auto [o, k] = bdry[static_cast<std::size_t>(b)];
      const Mat Gk = p.G.middleRows(o, k);
      const Vec sk = p.h.segment(o, k) - Gk * x;
      const Vec Js = jflip(sk);
      const double al = v[n + meq + na + b];
      r.head(n) += al * (Gk.transpose() * Js);
      r[n + meq + na + b] = 0.5 * sk.dot(Js);
      if (jac) {
        // d(J s)/dx = -J G_k
        Mat JG = Gk;
        JG.bottomRows(k - 1) *= -1.0;
        jac->block(0, 0, n, n) -= al * Gk.transpose() * JG;
        jac->block(0, n + meq + na + b, n, 1) = Gk.transpose() * Js;
        jac->block(n + meq + na + b, 0, 1, n) = -(Js.transpose() * Gk);
      }
    }
    return r;
  };

  const double scale = 1.0 + std::max(p.c.lpNorm<Eigen::Infinity>(), p.h.lpNorm<Eigen::Infinity>());
  Mat jac;
  Vec r = residual(w, &jac);
  for (int it = 0; it < 8 && r.lpNorm<Eigen::Infinity>() > 1e-14 * scale; ++it) {
    Eigen::PartialPivLU<Mat> lu(jac);
    if (!(lu.rcond() > 1e-13)) return false;
    const Vec step = lu.solve(r);
    if (!step.allFinite()) return false;
    w -= step;
    r = residual(w, &jac);
  }
  if (!(r.lpNorm<Eigen::Infinity>() <= 1e-11 * scale)) return false;

  // Rebuild the full solution and check it stays primal-dual feasible.
  const Vec x = w.head(n);
  Vec z = Vec::Zero(p.G.rows());
  for (int a = 0; a < na; ++a) z[act[static_cast<std::size_t>(a)]] = w[n + meq + a];
  for (int b = 0; b < nb; ++b) {
    const auto [o, k] = bdry[static_cast<std::size_t>(b)];
    const double al = w[n + meq + na + b];
    if (al < 0.0) return false;
    z.segment(o, k) = al * jflip(p.h.segment(o, k) - p.G.middleRows(o, k) * x);
  }
  Vec slack = p.h - p.G * x;
  for (int a = 0; a < na; ++a) slack[act[static_cast<std::size_t>(a)]] = 0.0;
  const double feas = 1e-9 * scale;
  for (int i = 0; i < p.cones.nonneg; ++i)
    if (slack[i] < -feas || z[i] < -feas) return false;
  off = p.cones.nonneg;
  for (int k : p.cones.soc) {
    const Vec sk = slack.segment(off, k), zk = z.segment(off, k);
    if (sk[0] < sk.tail(k - 1).norm() - feas || zk[0] < zk.tail(k - 1).norm() - feas) return false;
    off += k;
  }
  const double obj = p.c.dot(x);
  if (obj > sol.objective + tol * (1.0 + std::abs(sol.objective))) return false;

  sol.x = x;
  sol.y = meq ? Vec(w.segment(n, meq)) : Vec::Zero(0);
  sol.z = z;
  for (int i = 0; i < p.cones.nonneg; ++i) {
    slack[i] = std::max(slack[i], 0.0);
    sol.z[i] = std::max(sol.z[i], 0.0);
  }
  sol.s = slack;
  sol.objective = obj;
  sol.gap = std::abs(sol.s.dot(sol.z));
  sol.polished = true;
  return true;
}

}  // namespace

ConicSolution solve(const ConicProblem& p, const SolveOptions& options) {
  p.validate();
  const double tol = options.tol > 0.0 ? options.tol : default_tolerance();
  const int n = p.num_vars();
  const int meq = static_cast<int>(p.A.rows());
  const int rows = static_cast<int>(p.G.rows());
  const ConeOps ops(p.cones);
  const double nu = static_cast<double>(ops.degree());

  ConicSolution out;
  const double norm_c = p.c.lpNorm<Eigen::Infinity>();
  const double norm_b = meq ? p.b.lpNorm<Eigen::Infinity>() : 0.0;
  const double norm_h = p.h.lpNorm<Eigen::Infinity>();
  const double reg = 1e-12 * (1.0 + p.G.cwiseAbs().maxCoeff());

  // Starting point: least-squares primal and minimum-norm dual, shifted into the cone.
  Vec x, y, z, s;
  {
    ConeOps::Scaling I;
    I.lp = Vec::Ones(p.cones.nonneg);
    for (int k : p.cones.soc) {
      Vec w = Vec::Zero(k);
      w[0] = 1.0;
      I.soc.push_back({1.0, w});
    }
    KktSystem kkt(p, ops, I, std::max(reg, 1e-10));
    const auto primal = kkt.solve(Vec::Zero(n), meq ? p.b : Vec::Zero(0), p.h);
    x = primal.x;
    s = -primal.z;  // G x - (-s) = h  =>  s = h - G x
    const auto dual = kkt.solve(-p.c, Vec::Zero(meq), Vec::Zero(rows));
    y = dual.y;
    z = dual.z;
    const Vec e = ops.identity();
    const double as = -ops.min_eig(s);
    if (as >= -1e-8) s += (1.0 + std::max(as, 0.0)) * e;
    const double az = -ops.min_eig(z);
    if (az >= -1e-8) z += (1.0 + std::max(az, 0.0)) * e;
  }
  double tau = 1.0, kappa = 1.0;
  const Vec e = ops.identity();

  // Near the end the scaled KKT systems lose accuracy and the residuals can climb
  // again; the best iterate is kept and returned when it is within 10 tol.
  struct Snapshot {
    Vec x, y, z, s;
    double tau = 1.0, pcost = 0.0, pres = 0.0, dres = 0.0, gap = 0.0;
    double merit = std::numeric_limits<double>::infinity();
  } best;
  auto accept_best = [&]() {
    if (!(best.merit <= 10.0 * tol)) return false;
    out.status = Status::optimal;
    out.reduced_accuracy = true;
    out.x = best.x / best.tau;
    out.s = best.s / best.tau;
    out.y = best.y / best.tau;
    out.z = best.z / best.tau;
    out.objective = best.pcost;
    out.primal_residual = best.pres;
    out.dual_residual = best.dres;
    out.gap = best.gap;
    return true;
  };

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    out.iterations = iter;
    const Vec rx = (meq ? Vec(p.A.transpose() * y) : Vec::Zero(n)) + p.G.transpose() * z + tau * p.c;
    const Vec ry = meq ? Vec(tau * p.b - p.A * x) : Vec::Zero(0);
    const Vec rz = s + p.G * x - tau * p.h;
    const double cx = p.c.dot(x);
    const double by_hz = (meq ? p.b.dot(y) : 0.0) + p.h.dot(z);
    const double rtau = kappa + cx + by_hz;
    const double mu = (s.dot(z) + tau * kappa) / (nu + 1.0);

    const double pres = std::max(meq ? ry.lpNorm<Eigen::Infinity>() / tau / (1.0 + norm_b) : 0.0,
                                 rz.lpNorm<Eigen::Infinity>() / tau / (1.0 + norm_h));
    const double dres = rx.lpNorm<Eigen::Infinity>() / tau / (1.0 + norm_c);
    const double pcost = cx / tau;
    const double dcost = -by_hz / tau;
    const double gap = s.dot(z) / (tau * tau);
    const double relgap = std::abs(pcost - dcost) / std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));
    out.primal_residual = pres;
    out.dual_residual = dres;
    out.gap = gap;

    spdlog::trace("ipm {:3d} pcost {:.9e} dcost {:.9e} pres {:.2e} dres {:.2e} gap {:.2e} tau {:.2e} kappa {:.2e}",
                  iter, pcost, dcost, pres, dres, gap, tau, kappa);
    const double merit = std::max({pres, dres, std::min(gap, relgap)});
    if (merit < best.merit) {
      best = {x, y, z, s, tau, pcost, pres, dres, gap, merit};
    } else if (merit > 1e3 * best.merit && accept_best()) {
      break;
    }
    if (pres <= tol && dres <= tol && (gap <= tol || relgap <= tol)) {
      out.status = Status::optimal;
      out.x = x / tau;
      out.s = s / tau;
      out.y = y / tau;
      out.z = z / tau;
      out.objective = pcost;
      break;
    }
    // Infeasibility certificates.
    if (by_hz < -tol) {
      const Vec res = (meq ? Vec(p.A.transpose() * y) : Vec::Zero(n)) + p.G.transpose() * z;
      if (res.lpNorm<Eigen::Infinity>() / (-by_hz) <= tol) {
        out.status = Status::infeasible;
        out.y = y / (-by_hz);
        out.z = z / (-by_hz);
        break;
      }
    }
    if (cx < -tol) {
      const double r1 = meq ? (p.A * x).lpNorm<Eigen::Infinity>() : 0.0;
      const double r2 = (p.G * x + s).lpNorm<Eigen::Infinity>();
      if (std::max(r1, r2) / (-cx) <= tol) {
        out.status = Status::unbounded;
        out.x = x / (-cx);
        out.s = s / (-cx);
        break;
      }
    }
    if (iter == options.max_iterations || !std::isfinite(mu)) {
      if (accept_best()) break;
      out.status = Status::numerical_failure;
      out.x = x / tau;
      out.s = s / tau;
      out.y = y / tau;
      out.z = z / tau;
      out.objective = pcost;
      break;
    }

    const auto W = ops.nt_scaling(s, z);
    const Vec lambda = ops.apply(W, z, false);
    const KktSystem kkt(p, ops, W, reg);
    const auto d1 = kkt.solve(-p.c, meq ? p.b : Vec::Zero(0), p.h);
    const double denom_base = -p.c.dot(d1.x) - (meq ? p.b.dot(d1.y) : 0.0) - p.h.dot(d1.z);

    struct Step {
      Vec dx, dy, dz, ds;
      double dtau, dkappa;
    };
    auto compute = [&](double sigma, const Vec& ds_target, double rhs_kappa) {
      // ds_target solves lambda o ds_target = lambda o lambda - sigma mu e + corr
      const double one_minus = 1.0 - sigma;
      const Vec r1 = -one_minus * rx;
      const Vec r2 = one_minus * ry;
      const Vec r3 = -one_minus * rz + ops.apply(W, ds_target, false);
      const auto d2 = kkt.solve(r1, r2, r3);
      const double num = rhs_kappa / tau + one_minus * rtau + p.c.dot(d2.x) +
                         (meq ? p.b.dot(d2.y) : 0.0) + p.h.dot(d2.z);
      Step st;
      st.dtau = num / (kappa / tau + denom_base);
      st.dx = d2.x + st.dtau * d1.x;
      st.dy = d2.y + st.dtau * d1.y;
      st.dz = d2.z + st.dtau * d1.z;
      st.ds = -ops.apply_squared(W, st.dz, false) - ops.apply(W, ds_target, false);
      st.dkappa = (rhs_kappa - kappa * st.dtau) / tau;
      return st;
    };
    auto step_length = [&](const Step& st) {
      double a = std::min(ops.max_step(s, st.ds, 1e30), ops.max_step(z, st.dz, 1e30));
      if (st.dtau < 0.0) a = std::min(a, -tau / st.dtau);
      if (st.dkappa < 0.0) a = std::min(a, -kappa / st.dkappa);
      return a;
    };

    // Predictor.
    const Step aff = compute(0.0, lambda, -tau * kappa);
    const double alpha_aff = std::min(1.0, step_length(aff));
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3.0), 0.0, 1.0);
    // Corrector.
    const Vec corr = ops.product(ops.apply(W, aff.ds, true), ops.apply(W, aff.dz, false));
    const Vec target = ops.product(lambda, lambda) - sigma * mu * e + corr;
    const Vec ds_target = ops.divide(lambda, target);
    const double rhs_kappa = -tau * kappa + sigma * mu - aff.dtau * aff.dkappa;
    const Step st = compute(sigma, ds_target, rhs_kappa);
    const double alpha = std::min(1.0, 0.99 * step_length(st));
    if (!(alpha > 0.0) || !st.dx.allFinite()) {
      if (accept_best()) break;
      out.status = Status::numerical_failure;
      out.x = x / tau;
      out.s = s / tau;
      out.y = y / tau;
      out.z = z / tau;
      out.objective = pcost;
      break;
    }
    x += alpha * st.dx;
    y += alpha * st.dy;
    z += alpha * st.dz;
    s += alpha * st.ds;
    tau += alpha * st.dtau;
    kappa += alpha * st.dkappa;
  }

  if (out.status == Status::optimal && options.polish) {
    if (p.cones.soc.empty()) polish_lp(p, out, 100.0 * tol);
    else polish_newton(p, out, 100.0 * tol);
  }
  return out;
}

ConicProblem relaxation_problem(const ProblemInstance& instance, const CutPool& pool) {
  if (pool.size() > 0 && pool.n() != instance.n())
    throw InvalidInput("relaxation: pool rows do not match the variable count");
  const int n = instance.n(), m = instance.m(), k = pool.size();
  ConicProblem p;
  p.c = instance.c;
  p.A = Mat::Zero(0, n);
  p.b = Vec::Zero(0);
  p.G = Mat::Zero(m + k + n, n);
  p.h = Vec::Zero(m + k + n);
  p.G.topRows(m) = instance.A;
  p.h.head(m) = instance.b;
  for (int i = 0; i < k; ++i) {
    p.G.row(m + i) = pool[i].g.transpose();
    p.h[m + i] = pool[i].h;
  }
  p.G.bottomRows(n) = -Mat::Identity(n, n);
  p.cones.nonneg = m + k + n;
  return p;
}

RelaxationSolution solve_relaxation(const ProblemInstance& instance, const CutPool& pool,
                                    double tol) {
  RelaxationSolution out;
  out.problem = relaxation_problem(instance, pool);
  SolveOptions opts;
  opts.tol = tol;
  opts.polish = true;
  out.raw = solve(out.problem, opts);
  switch (out.raw.status) {
    case Status::optimal: break;
    case Status::infeasible:
      throw NumericalAbort("relaxation infeasible: the cut pool excludes every point");
    case Status::unbounded:
      throw NumericalAbort("relaxation unbounded: the instance violates the boundedness assumption");
    case Status::numerical_failure:
      throw NumericalAbort("relaxation solve failed to converge");
  }
  out.x = out.raw.x;
  out.objective = instance.c.dot(out.x);
  out.duals = out.raw.z.head(instance.m() + pool.size());
  return out;
}

}  // namespace cplopt::conic
