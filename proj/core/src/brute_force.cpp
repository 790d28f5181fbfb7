// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cplopt/conic.hpp"
#include "cplopt/model.hpp"

namespace cplopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Upper bound of every variable implied by singleton rows (kInf when none).
Vec singleton_upper_bounds(const ProblemInstance& inst) {
  Vec hi = Vec::Constant(inst.n(), kInf);
  for (int i = 0; i < inst.m(); ++i) {
    int nz = -1, count = 0;
    for (int j = 0; j < inst.n(); ++j)
      if (inst.A(i, j) != 0.0) {
        nz = j;
        ++count;
      }
    if (count == 1 && inst.A(i, nz) > 0.0) hi[nz] = std::min(hi[nz], inst.b[i] / inst.A(i, nz));
  }
  return hi;
}

class Enumerator {
 public:
  Enumerator(const ProblemInstance& inst, std::vector<std::pair<long, long>> box, double tol,
             bool lp_prune)
      : inst_(inst), box_(std::move(box)), tol_(tol), lp_prune_(lp_prune) {
    lo_ = Vec::Zero(inst.n());
    hi_ = singleton_upper_bounds(inst);
    for (std::size_t k = 0; k < inst.integer_indices.size(); ++k) {
      const int j = inst.integer_indices[k];
      lo_[j] = static_cast<double>(box_[k].first);
      hi_[j] = std::min(hi_[j], static_cast<double>(box_[k].second));
    }
    fixed_.assign(static_cast<std::size_t>(inst.n()), false);
    value_ = Vec::Zero(inst.n());
  }

  // Pure-integer walk: visits every feasible point.
  void visit_all(const std::function<void(const Vec&)>& visit) { walk_points(0, visit); }

  BruteForceResult optimize() {
    walk_opt(0);
    if (!found_) throw NumericalAbort("brute force: instance has no integer-feasible point");
    BruteForceResult r;
    r.x = best_x_;
    r.z = best_z_;
    r.leaves = leaves_;
    return r;
  }

 private:
  // Row-activity test over the unfixed variables' ranges.
  bool rows_possible() const {
    for (int i = 0; i < inst_.m(); ++i) {
      double act = 0.0;
      for (int j = 0; j < inst_.n(); ++j) {
        const double a = inst_.A(i, j);
        if (a == 0.0) continue;
        if (fixed_[static_cast<std::size_t>(j)]) {
          act += a * value_[j];
        } else {
          act += a > 0.0 ? a * lo_[j] : (std::isfinite(hi_[j]) ? a * hi_[j] : -kInf);
        }
      }
      if (act > inst_.b[i] + tol_ * (1.0 + std::abs(inst_.b[i]))) return false;
    }
    return true;
  }

  // LP over the unfixed variables; nullopt when infeasible.
  std::optional<std::pair<double, Vec>> restricted_lp() const {
    std::vector<int> free;
    for (int j = 0; j < inst_.n(); ++j)
      if (!fixed_[static_cast<std::size_t>(j)]) free.push_back(j);
    Vec rhs = inst_.b;
    double base = 0.0;
    for (int j = 0; j < inst_.n(); ++j)
      if (fixed_[static_cast<std::size_t>(j)]) {
        rhs -= inst_.A.col(j) * value_[j];
        base += inst_.c[j] * value_[j];
      }
    Vec x = value_;
    if (free.empty()) {
      if (rhs.minCoeff() < -tol_ * (1.0 + inst_.b.lpNorm<Eigen::Infinity>())) return std::nullopt;
      return std::make_pair(base, x);
    }
    const int nf = static_cast<int>(free.size());
    conic::ConicProblem p;
    p.c.resize(nf);
    p.A = Mat::Zero(0, nf);
    p.b = Vec::Zero(0);
    p.G = Mat::Zero(inst_.m() + nf, nf);
    p.h = Vec::Zero(inst_.m() + nf);
    for (int k = 0; k < nf; ++k) {
      p.c[k] = inst_.c[free[static_cast<std::size_t>(k)]];
      p.G.col(k).head(inst_.m()) = inst_.A.col(free[static_cast<std::size_t>(k)]);
      p.G(inst_.m() + k, k) = -1.0;
    }
    p.h.head(inst_.m()) = rhs;
    p.cones.nonneg = inst_.m() + nf;
    conic::SolveOptions opts;
    opts.polish = true;
    const auto sol = conic::solve(p, opts);
    if (sol.status == conic::Status::infeasible) return std::nullopt;
    if (sol.status != conic::Status::optimal)
      throw NumericalAbort(std::string("brute force: restricted LP ") +
                           std::string(conic::to_string(sol.status)));
    for (int k = 0; k < nf; ++k) x[free[static_cast<std::size_t>(k)]] = std::max(sol.x[k], 0.0);
    return std::make_pair(base + sol.objective, x);
  }

  void walk_points(std::size_t depth, const std::function<void(const Vec&)>& visit) {
    if (!rows_possible()) return;
    if (depth == inst_.integer_indices.size()) {
      ++leaves_;
      visit(value_);
      return;
    }
    const int j = inst_.integer_indices[depth];
    fixed_[static_cast<std::size_t>(j)] = true;
    for (long v = box_[depth].first; v <= box_[depth].second; ++v) {
      value_[j] = static_cast<double>(v);
      walk_points(depth + 1, visit);
    }
    fixed_[static_cast<std::size_t>(j)] = false;
    value_[j] = 0.0;
  }

  void walk_opt(std::size_t depth) {
    if (!rows_possible()) return;
    const bool leaf = depth == inst_.integer_indices.size();
    std::optional<std::pair<double, Vec>> lp;
    if (leaf || lp_prune_) {
      lp = restricted_lp();
      if (!lp) return;
      if (found_ && lp->first >= best_z_ - 1e-9 * (1.0 + std::abs(best_z_))) return;
    }
    if (leaf) {
      ++leaves_;
      found_ = true;
      best_z_ = lp->first;
      best_x_ = lp->second;
      return;
    }
    const int j = inst_.integer_indices[depth];
    std::vector<long> order;
    for (long v = box_[depth].first; v <= box_[depth].second; ++v) order.push_back(v);
    if (lp) {
      // Visit values nearest the relaxation first so good incumbents appear early.
      const double target = lp->second[j];
      std::stable_sort(order.begin(), order.end(), [&](long a, long b) {
        return std::abs(static_cast<double>(a) - target) < std::abs(static_cast<double>(b) - target);
      });
    }
    fixed_[static_cast<std::size_t>(j)] = true;
    for (long v : order) {
      value_[j] = static_cast<double>(v);
      walk_opt(depth + 1);
    }
    fixed_[static_cast<std::size_t>(j)] = false;
    value_[j] = 0.0;
  }

  const ProblemInstance& inst_;
  std::vector<std::pair<long, long>> box_;
  double tol_;
  bool lp_prune_;
  Vec lo_, hi_, value_;
  std::vector<bool> fixed_;
  bool found_ = false;
  double best_z_ = kInf;
  Vec best_x_;
  long long leaves_ = 0;
};

}  // namespace

std::vector<std::pair<long, long>> integer_box(const ProblemInstance& instance) {
  const Vec hi = singleton_upper_bounds(instance);
  std::vector<std::pair<long, long>> box;
  for (int j : instance.integer_indices) {
    if (!std::isfinite(hi[j]))
      throw InvalidInput("integer variable " + std::to_string(j) + " has no finite upper bound");
    box.emplace_back(0L, static_cast<long>(std::floor(hi[j] + 1e-9)));
  }
  return box;
}

BruteForceResult brute_force_optimum(const ProblemInstance& instance,
                                     const BruteForceOptions& options) {
  instance.validate();
  if (static_cast<int>(instance.integer_indices.size()) > options.max_integer_vars)
    throw InvalidInput("brute force: " + std::to_string(instance.integer_indices.size()) +
                       " integer variables exceed the cap of " +
                       std::to_string(options.max_integer_vars));
  auto box = options.box ? *options.box : integer_box(instance);
  if (box.size() != instance.integer_indices.size())
    throw InvalidInput("brute force: box size does not match the integer variables");
  Enumerator e(instance, std::move(box), options.feas_tol, options.lp_bound_pruning);
  return e.optimize();
}

namespace detail {

void enumerate_points(const ProblemInstance& instance, double feas_tol,
                      const std::function<void(const Vec&)>& visit) {
  if (!instance.pure_integer())
    throw InvalidInput("enumerate_integer_points: instance must be pure-integer");
  Enumerator e(instance, integer_box(instance), feas_tol, false);
  e.visit_all(visit);
}

}  // namespace detail

}  // namespace cplopt
