// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cplopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised for malformed inputs: dimension mismatches, non-finite data, bad files.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a solve breaks an assumption the algorithm relies on
/// (infeasible relaxation after a cut, unbounded relaxation).
class NumericalAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One theta-dependent entry of (A, b, c): value = offset + sum_k coeff_k * theta_k.
struct AffineEntry {
  enum class Target { A, b, c };
  Target target = Target::c;
  int row = 0;  // row of A or index into b / c
  int col = 0;  // column of A, unused otherwise
  double offset = 0.0;
  std::vector<std::pair<int, double>> terms;
};

/// A family min c(θ)x s.t. A(θ)x <= b(θ), x >= 0, x_i integer for i in I.
/// Upper bounds are ordinary rows of (A, b).
struct ParametricFamily {
  std::string name;
  Mat A;
  Vec b;
  Vec c;
  std::vector<int> integer_indices;  // 0-based, sorted
  int theta_dim = 0;
  std::vector<AffineEntry> theta_map;
  int bound_rows = 0;  // trailing rows of A that are variable upper bounds

  int n() const { return static_cast<int>(A.cols()); }
  int m() const { return static_cast<int>(A.rows()); }
  int core_rows() const { return m() - bound_rows; }
  /// Throws InvalidInput when the invariants do not hold.
  void validate() const;
};

struct ProblemInstance {
  Mat A;
  Vec b;
  Vec c;
  std::vector<int> integer_indices;

  int n() const { return static_cast<int>(A.cols()); }
  int m() const { return static_cast<int>(A.rows()); }
  bool is_integer(int j) const;
  bool pure_integer() const { return static_cast<int>(integer_indices.size()) == n(); }
  void validate() const;
};

struct Cut {
  Vec g;
  double h = 0.0;
  int round = 0;
  double violation_at_birth = 0.0;
  Vec u;  // multipliers that produced the cut (empty for hand-made cuts)
  Vec v;
};

/// Append-only cut storage with a hard capacity of R*K rows.
class CutPool {
 public:
  CutPool() = default;
  CutPool(int n, int capacity) : n_(n), capacity_(capacity) {}

  void append(Cut cut);
  int size() const { return static_cast<int>(rows_.size()); }
  int capacity() const { return capacity_; }
  int n() const { return n_; }
  bool empty() const { return rows_.empty(); }
  const std::vector<Cut>& rows() const { return rows_; }
  const Cut& operator[](int i) const { return rows_[static_cast<std::size_t>(i)]; }

  Mat G() const;
  Vec h() const;

 private:
  int n_ = 0;
  int capacity_ = 0;
  std::vector<Cut> rows_;
};

struct AlgoState {
  int round = 0;
  double objective = 0.0;
  Vec candidate;
  Mat G;
  Vec h;
};

struct QualityReport {
  double gap = 0.0;
  double infeas = 0.0;
  double max_viol = 0.0;
};

ProblemInstance realize(const ParametricFamily& family, const Vec& theta);

/// Integer ranges read off singleton rows a*x_j <= b (a > 0); lower bounds are 0.
std::vector<std::pair<long, long>> integer_box(const ProblemInstance& instance);

struct BruteForceOptions {
  int max_integer_vars = 20;
  double feas_tol = 1e-9;
  /// Prune partial assignments whose LP restriction cannot beat the incumbent.
  /// Off by default: the plain oracle only uses row-activity bounds.
  bool lp_bound_pruning = false;
  std::optional<std::vector<std::pair<long, long>>> box;
};

struct BruteForceResult {
  Vec x;
  double z = 0.0;
  long long leaves = 0;
};

/// Exact optimum by enumerating integer assignments; continuous parts are LPs.
/// Throws InvalidInput when the cap is exceeded and NumericalAbort when infeasible.
BruteForceResult brute_force_optimum(const ProblemInstance& instance,
                                     const BruteForceOptions& options = {});

/// Calls `visit` on every integer-feasible point (pure-integer instances only).
/// Used by validity checks.
template <typename Visitor>
void enumerate_integer_points(const ProblemInstance& instance, Visitor&& visit,
                              double feas_tol = 1e-9);

QualityReport quality(const ProblemInstance& instance, const Vec& candidate, double z_star,
                      const std::vector<Cut>& last_round_cuts, const Vec& prev_candidate);

double fractional_distance(double value);  // |value - round(value)|

// ---------------------------------------------------------------------------

namespace detail {
void enumerate_points(const ProblemInstance& instance, double feas_tol,
                      const std::function<void(const Vec&)>& visit);
}

template <typename Visitor>
void enumerate_integer_points(const ProblemInstance& instance, Visitor&& visit, double feas_tol) {
  detail::enumerate_points(instance, feas_tol, std::function<void(const Vec&)>(visit));
}

}  // namespace cplopt
