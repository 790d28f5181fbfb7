// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cplopt/conic.hpp"
#include "cplopt/model.hpp"

namespace cplopt::cgp {

enum class Norm { l1, l2, linf };

/// Parses "1", "2", "inf"; throws InvalidInput otherwise.
Norm parse_norm(const std::string& text);
std::string to_string(Norm p);

/// Split disjunction (pi x <= eta) v (pi x >= eta + 1) and the normalization
/// ||D (u, v)||_p <= 1 of the cut-generating program.
struct CutGenParams {
  Vec pi;
  double eta = 0.0;
  Vec D_diag;  // length 2(m_hat + 1): [u_1..u_mhat, u_0, v_1..v_mhat, v_0]
  Norm p = Norm::l1;
  std::optional<Mat> D_dense;  // p = 2 only; replaces D_diag when present

  int m_hat() const { return static_cast<int>(D_diag.size()) / 2 - 1; }
};

/// Only the disjunction multipliers are bounded: entries m_hat+1 and 2(m_hat+1).
Vec trivial_normalization(int m_hat);
/// Sum(u) + Sum(v) <= 1.
Vec standard_normalization(int m_hat);

/// Conic form of the cut-generating program plus the bookkeeping needed to map
/// solutions back to cuts and to differentiate through it.
///
/// Variables: [g_kept, h, u_1..u_mhat, u_0, v_1..v_mhat, v_0].
/// Rows: g-vs-u (ng), g-vs-v (ng), h-vs-u, h-vs-v, u >= 0, v >= 0, normalization.
struct CgpProblem {
  conic::ConicProblem conic;
  Mat A_stack;           // [A; G_pool], m_hat x n
  Vec b_hat;             // [b; h_pool], raised to A_stack x_bar where x_bar violates it
  std::vector<bool> b_clamped;
  Vec x_bar;             // clamped at 0
  CutGenParams params;
  std::vector<int> kept;    // columns that carry a g variable
  std::vector<int> g_slot;  // column -> index into kept, or -1
  std::vector<bool> integer;
  Vec mult_penalty;         // objective weight on multipliers the normalization leaves free
  int norm_row = 0;         // first normalization row
  int norm_rows = 0;

  int n() const { return static_cast<int>(A_stack.cols()); }
  int m_hat() const { return static_cast<int>(A_stack.rows()); }
  int ng() const { return static_cast<int>(kept.size()); }
  int h_var() const { return ng(); }
  int u_var(int i) const { return ng() + 1 + i; }  // i in [0, m_hat]; m_hat is u_0
  int v_var(int i) const { return ng() + 2 + m_hat() + i; }
  int num_mult() const { return m_hat() + 1; }
};

/// Weight that bounds the optimal face along multipliers with a zero normalization entry.
/// Large enough that the active set can be read off a 1e-10 interior-point solution
/// (slack noise ~ tol / penalty).
inline constexpr double kRecessionPenalty = 1e-4;
/// Weight on every multiplier when D is dense (possibly rank deficient); kept tiny so
/// the optimum moves by at most 1e-7 per unit of multiplier mass.
inline constexpr double kDenseRecessionPenalty = 1e-7;

/// Stacks the pool under A and emits the conic program. Throws InvalidInput on
/// dimension mismatches, invalid p, continuous pi entries or a dense D with p != 2.
CgpProblem build_cgp(const ProblemInstance& instance, const CutPool& pool, const Vec& x_bar,
                     const CutGenParams& params);

/// Which side attains each min/max in the cut read off (u, v).
struct CutSides {
  std::vector<bool> g_from_u;  // per column: g_j = a_j (true) or c_j (false)
  bool h_from_u = true;
};

struct CutCandidate {
  Vec g;
  double h = 0.0;
  Vec u, v;  // length m_hat + 1, last entry is the disjunction multiplier
  double violation = 0.0;
  double objective = 0.0;  // conic optimum
  CutSides sides;
  conic::ConicSolution raw;
};

/// g_j = min(A_j'u + pi_j u0, A_j'v - pi_j v0), h = max(b'u + eta u0, b'v - (eta+1) v0).
/// Valid for any u, v >= 0.
CutCandidate cut_from_multipliers(const CgpProblem& problem, const Vec& u, const Vec& v);

/// Returns nullopt when the optimum does not exceed eps_cut or the solve fails.
std::optional<CutCandidate> solve_cgp(const CgpProblem& problem, double eps_cut = 1e-6,
                                      double tol = -1.0);

struct Strengthened {
  Cut cut;
  std::vector<long> shift;  // integer shift k_j per column (0 for continuous)
  bool applied = false;
};

/// Integer shifts of the disjunction coefficient per integer column:
/// g_j <- max_k min(a_j + u0 (pi_j + k), c_j - v0 (pi_j + k)) with a_j = u'A_j, c_j = v'A_j.
Strengthened monoidal_strengthen(const CutCandidate& candidate, const CgpProblem& problem);

/// Divides (g, h) by max(||g||_2, 1e-12).
Cut normalized(const Cut& cut);

/// True when (g, h) is within tol (inf-norm) of a pool row, both normalized.
bool is_duplicate(const Cut& cut, const CutPool& pool, double tol = 1e-8);

}  // namespace cplopt::cgp
