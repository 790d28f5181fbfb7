// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "cplopt/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cplopt {

namespace {

void check_indices(const std::vector<int>& idx, int n, const char* what) {
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= n)
      throw InvalidInput(std::string(what) + ": integer index " + std::to_string(idx[k]) +
                         " out of range");
    if (k > 0 && idx[k] <= idx[k - 1])
      throw InvalidInput(std::string(what) + ": integer indices must be sorted and unique");
  }
}

bool has_upper_bound_row(const Mat& A, const Vec& b, int j) {
  for (int i = 0; i < A.rows(); ++i) {
    if (A(i, j) <= 0.0 || !std::isfinite(b[i])) continue;
    bool singleton = true;
    for (int k = 0; k < A.cols() && singleton; ++k)
      if (k != j && A(i, k) != 0.0) singleton = false;
    if (singleton) return true;
  }
  return false;
}

}  // namespace

void ParametricFamily::validate() const {
  if (A.rows() != b.size() || A.cols() != c.size())
    throw InvalidInput("family '" + name + "': inconsistent (A, b, c) dimensions");
  if (!A.allFinite() || !b.allFinite() || !c.allFinite())
    throw InvalidInput("family '" + name + "': non-finite base data");
  check_indices(integer_indices, n(), "family");
  if (theta_dim < 0) throw InvalidInput("family: negative theta_dim");
  if (bound_rows < 0 || bound_rows > m())
    throw InvalidInput("family '" + name + "': bound_rows out of range");
  for (int j = 0; j < n(); ++j)
    if (!has_upper_bound_row(A, b, j))
      throw InvalidInput("family '" + name + "': variable " + std::to_string(j) +
                         " has no upper-bound row");
  for (const auto& e : theta_map) {
    const bool ok = e.target == AffineEntry::Target::A
                        ? (e.row >= 0 && e.row < m() && e.col >= 0 && e.col < n())
                        : (e.row >= 0 && e.row < (e.target == AffineEntry::Target::b ? m() : n()));
    if (!ok) throw InvalidInput("family '" + name + "': theta_map entry out of range");
    for (const auto& [k, coeff] : e.terms)
      if (k < 0 || k >= theta_dim || !std::isfinite(coeff))
        throw InvalidInput("family '" + name + "': theta_map term out of range");
  }
}

bool ProblemInstance::is_integer(int j) const {
  return std::binary_search(integer_indices.begin(), integer_indices.end(), j);
}

void ProblemInstance::validate() const {
  if (A.rows() != b.size() || A.cols() != c.size())
    throw InvalidInput("instance: inconsistent (A, b, c) dimensions");
  if (!A.allFinite() || !b.allFinite() || !c.allFinite())
    throw InvalidInput("instance: non-finite data");
  check_indices(integer_indices, n(), "instance");
}

void CutPool::append(Cut cut) {
  if (size() >= capacity_) throw InvalidInput("cut pool is full");
  if (cut.g.size() != n_) throw InvalidInput("cut dimension does not match the pool");
  rows_.push_back(std::move(cut));
}

Mat CutPool::G() const {
  Mat G(size(), n_);
  for (int i = 0; i < size(); ++i) G.row(i) = rows_[static_cast<std::size_t>(i)].g.transpose();
  return G;
}

Vec CutPool::h() const {
  Vec h(size());
  for (int i = 0; i < size(); ++i) h[i] = rows_[static_cast<std::size_t>(i)].h;
  return h;
}

ProblemInstance realize(const ParametricFamily& family, const Vec& theta) {
  if (theta.size() != family.theta_dim)
    throw InvalidInput("realize: theta has dimension " + std::to_string(theta.size()) +
                       ", family expects " + std::to_string(family.theta_dim));
  if (!theta.allFinite()) throw InvalidInput("realize: non-finite theta entry");
  ProblemInstance inst{family.A, family.b, family.c, family.integer_indices};
  for (const auto& e : family.theta_map) {
    double value = e.offset;
    for (const auto& [k, coeff] : e.terms) value += coeff * theta[k];
    switch (e.target) {
      case AffineEntry::Target::A: inst.A(e.row, e.col) = value; break;
      case AffineEntry::Target::b: inst.b[e.row] = value; break;
      case AffineEntry::Target::c: inst.c[e.row] = value; break;
    }
  }
  return inst;
}

double fractional_distance(double value) { return std::abs(value - std::round(value)); }

QualityReport quality(const ProblemInstance& instance, const Vec& candidate, double z_star,
                      const std::vector<Cut>& last_round_cuts, const Vec& prev_candidate) {
  QualityReport q;
  q.gap = 100.0 * (z_star - instance.c.dot(candidate)) / std::max(std::abs(z_star), 1.0);
  if (!instance.integer_indices.empty()) {
    double sum = 0.0;
    for (int j : instance.integer_indices) sum += fractional_distance(candidate[j]);
    q.infeas = sum / static_cast<double>(instance.integer_indices.size());
  }
  for (const auto& cut : last_round_cuts) {
    const double v = (cut.g.dot(prev_candidate) - cut.h) / std::max(cut.g.norm(), 1.0);
    q.max_viol = std::max(q.max_viol, v);
  }
  return q;
}

}  // namespace cplopt
