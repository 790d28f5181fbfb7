// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cplopt/autodiff.hpp"
#include "cplopt/cgp.hpp"
#include "cplopt/conic.hpp"
#include "cplopt/model.hpp"
#include "cplopt/policy.hpp"

namespace cplopt::engine {

enum class RunMode { policy, baseline };

struct RunConfig {
  int R = 3;
  int K = 2;
  cgp::Norm p = cgp::Norm::l1;
  double gamma = 0.9;
  double eps_cut = 1e-6;
  int M = 1;
  bool strengthen = true;
  RunMode mode = RunMode::policy;
  double solver_tol = -1.0;  // <= 0: solver default

  /// Throws InvalidInput unless R, K, M >= 1, gamma in (0, 1) and eps_cut >= 0.
  void validate() const;
};

/// One accepted cut with everything needed to differentiate through its CGP.
struct CutRecord {
  int round = 0;
  int head = 0;
  int pool_index = 0;
  cgp::CgpProblem problem;
  cgp::CutCandidate candidate;
  std::vector<long> shift;  // strengthening shifts, empty when not strengthened
};

struct RoundRecord {
  int round = 0;
  std::vector<std::optional<cgp::CutGenParams>> sigma;  // per head
  std::vector<int> accepted;                            // indices into Trajectory::cuts
  std::optional<policy::ActCache> cache;                // policy runs only
  int no_cut = 0;
  int duplicates = 0;
};

struct Diagnostics {
  int no_cut = 0;
  int duplicates = 0;
  int reduced_accuracy = 0;  // relaxation or CGP solves returned from the best iterate
  int early_exit_round = -1; // round whose candidate was integral, -1 when none
  int regularized_backward = 0;
};

struct Trajectory {
  RunConfig config;
  std::vector<AlgoState> states;                       // R + 1
  std::vector<conic::RelaxationSolution> relaxations;  // solves actually performed
  std::vector<int> state_source;                       // state r -> relaxation index
  std::vector<RoundRecord> rounds;                     // R
  std::vector<CutRecord> cuts;                         // creation order = pool order
  CutPool pool;
  double loss = 0.0;
  Diagnostics diag;

  /// Cuts added in the last round that generated any.
  std::vector<Cut> last_round_cuts() const;
};

/// Unrolls R rounds. `policy` may be null only for RunMode::baseline.
/// Throws NumericalAbort (with the offending cut) when a relaxation turns infeasible.
Trajectory run_forward(const ProblemInstance& instance, const policy::PolicyParams* policy,
                       const RunConfig& config);

/// Standard normalization, p = 1, head k splits on the k-th most fractional variable.
Trajectory run_baseline(const ProblemInstance& instance, const RunConfig& config);

/// L = -sum_r gamma^r (z_r - z_{r-1}) over the objective values z_0..z_R.
double loss(const std::vector<double>& objectives, double gamma);
double loss(const Trajectory& trajectory, double gamma);

struct BackwardResult {
  Vec grad;  // flat policy layout
  int regularized = 0;
  int solves = 0;
};

/// Reverse sweep: loss cotangents on each relaxation, relaxation adjoints onto the pool,
/// CGP adjoints (newest cut first) onto sigma, earlier pool rows and the separated point,
/// then the policy adjoint. Encodings fed to the policy are treated as constants.
BackwardResult backward(const Trajectory& trajectory, const policy::PolicyParams& policy,
                        const ProblemInstance& instance);

}  // namespace cplopt::engine
