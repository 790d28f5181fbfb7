// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cplopt/model.hpp"

namespace cplopt::instgen {

struct Sample {
  Vec theta;
  std::optional<double> z_star;  // exact optimum when known
};

enum class SplitName { train, validation, test };
std::string to_string(SplitName split);
SplitName parse_split(const std::string& text);

/// A family plus its theta samples, already split.
struct Dataset {
  ParametricFamily family;
  std::vector<Sample> train, validation, test;
  std::uint64_t seed = 0;

  const std::vector<Sample>& split(SplitName name) const;
  std::vector<Sample>& split(SplitName name);
  std::size_t size() const { return train.size() + validation.size() + test.size(); }
};

struct MatchingSpec {
  int nodes = 16;
  int edges = 35;
  double edge_prob = -1.0;  // <= 0: edges / C(nodes, 2)
  double cost_mean = 30.0;
  double cost_sd = 50.0;
  int n_train = 40;
  int n_validation = 15;
  int n_test = 15;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Undirected edge list of the drawn graph (u < v), in draw order.
struct Graph {
  int nodes = 0;
  std::vector<std::pair<int, int>> edges;
};

/// Erdos-Renyi draws until the edge count is exact and no node is isolated.
/// `redraws` receives the number of rejected graphs.
Graph draw_graph(const MatchingSpec& spec, std::uint64_t seed, int* redraws = nullptr);

/// 2-matching: one binary per edge, degree rows sum_{e in delta(v)} x_e <= 2, then x_e <= 1.
/// theta is the edge weight vector, N(mean, sd) rounded to 3 decimals; c = -theta
/// so the minimization maximizes the matched weight.
ParametricFamily matching_family(const Graph& graph);
Dataset gen_matching(const MatchingSpec& spec);

struct ControlSpec {
  int H = 10;
  double upsilon = 1.0;
  double omega = 1.0;
  double delta = 1.0;
  double E_min = 0.0;
  double E_max = 0.5;
  double P_max = 2.0;
  int N_sw = 3;
  double E_init_sd = 0.15;  // around (E_min + E_max) / 2, truncated to the bounds
  double P_load_sd = 0.5;   // around P_max / 2, truncated to [0, P_max]
  int n_train = 50;
  int n_validation = 25;
  int n_test = 25;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Column layout of the control family.
struct ControlLayout {
  int H = 10;
  int P(int t) const { return t; }
  int zeta(int t) const { return H + t; }
  int xi(int t) const { return 2 * H + t; }
  int psi(int t) const { return 3 * H + t; }  // shifted: psi' = psi + 1 in [0, 2]
  int n() const { return 4 * H; }
  // theta = (E_init, zeta_init, s_init, xi_past[0..H-1], P_load[0..H-1])
  static constexpr int kEInit = 0, kZetaInit = 1, kSInit = 2, kXiPast = 3;
  int theta_P_load(int t) const { return kXiPast + H + t; }
  int theta_dim() const { return 3 + 2 * H; }
};

ParametricFamily control_family(const ControlSpec& spec);
/// Draws theta (binary parameters uniform on {0, 1}, continuous ones truncated normal
/// around the midpoint of their range); infeasible draws are resampled.
Dataset gen_control(const ControlSpec& spec, int* resampled = nullptr);

/// E_tau(x; theta) for tau = 0..H reconstructed from the eliminated dynamics.
Vec control_energy(const ControlSpec& spec, const Vec& x, const Vec& theta);

/// Fills missing z_star entries with the exact optimum (branch-and-bound oracle).
/// Parallel over samples when jobs > 1; results do not depend on jobs.
void compute_optima(Dataset& dataset, int jobs = 1);

}  // namespace cplopt::instgen
