// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "cplopt/instgen.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <random>

#include "cplopt/parallel.hpp"

namespace cplopt::instgen {

std::string to_string(SplitName split) {
  switch (split) {
    case SplitName::train: return "train";
    case SplitName::validation: return "validation";
    case SplitName::test: return "test";
  }
  return "unknown";
}

SplitName parse_split(const std::string& text) {
  if (text == "train") return SplitName::train;
  if (text == "validation" || text == "val") return SplitName::validation;
  if (text == "test") return SplitName::test;
  throw InvalidInput("unknown split '" + text + "' (expected train, validation or test)");
}

const std::vector<Sample>& Dataset::split(SplitName name) const {
  switch (name) {
    case SplitName::train: return train;
    case SplitName::validation: return validation;
    case SplitName::test: return test;
  }
  return train;
}

std::vector<Sample>& Dataset::split(SplitName name) {
  return const_cast<std::vector<Sample>&>(static_cast<const Dataset&>(*this).split(name));
}

// ---------------------------------------------------------------------------
// 2-matching

void MatchingSpec::validate() const {
  if (nodes < 2) throw InvalidInput("matching: need at least 2 nodes");
  const long pairs = static_cast<long>(nodes) * (nodes - 1) / 2;
  if (edges < 1 || edges > pairs)
    throw InvalidInput("matching: edge count must lie in [1, " + std::to_string(pairs) + "]");
  if (2 * edges < nodes) throw InvalidInput("matching: too few edges to cover every node");
  if (edge_prob > 1.0) throw InvalidInput("matching: edge probability above 1");
  if (!(cost_sd >= 0.0)) throw InvalidInput("matching: cost sd must be >= 0");
  if (n_train < 1 || n_validation < 0 || n_test < 0) throw InvalidInput("matching: bad split sizes");
}

Graph draw_graph(const MatchingSpec& spec, std::uint64_t seed, int* redraws) {
  spec.validate();
  const double pairs = spec.nodes * (spec.nodes - 1) / 2.0;
  const double p = spec.edge_prob > 0.0 ? spec.edge_prob : spec.edges / pairs;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  int rejected = 0;
  for (;;) {
    Graph g;
    g.nodes = spec.nodes;
    std::vector<int> degree(static_cast<std::size_t>(spec.nodes), 0);
    for (int u = 0; u < spec.nodes; ++u)
      for (int v = u + 1; v < spec.nodes; ++v)
        if (coin(rng)) {
          g.edges.emplace_back(u, v);
          ++degree[static_cast<std::size_t>(u)];
          ++degree[static_cast<std::size_t>(v)];
        }
    const bool isolated = std::find(degree.begin(), degree.end(), 0) != degree.end();
    if (static_cast<int>(g.edges.size()) == spec.edges && !isolated) {
      if (redraws) *redraws = rejected;
      return g;
    }
    if (++rejected > 1000000) throw InvalidInput("matching: could not draw a graph with the requested edge count");
  }
}

ParametricFamily matching_family(const Graph& graph) {
  const int n = static_cast<int>(graph.edges.size()), V = graph.nodes;
  ParametricFamily f;
  f.name = "matching";
  f.A = Mat::Zero(V + n, n);
  f.b = Vec::Zero(V + n);
  for (int e = 0; e < n; ++e) {
    f.A(graph.edges[static_cast<std::size_t>(e)].first, e) = 1.0;
    f.A(graph.edges[static_cast<std::size_t>(e)].second, e) = 1.0;
    f.A(V + e, e) = 1.0;
    f.b[V + e] = 1.0;
  }
  f.b.head(V).setConstant(2.0);
  f.c = Vec::Zero(n);
  f.bound_rows = n;
  for (int e = 0; e < n; ++e) f.integer_indices.push_back(e);
  f.theta_dim = n;
  for (int e = 0; e < n; ++e) {
    AffineEntry entry;
    entry.target = AffineEntry::Target::c;
    entry.row = e;
    entry.terms = {{e, -1.0}};  // maximize total weight
    f.theta_map.push_back(entry);
  }
  f.validate();
  return f;
}

Dataset gen_matching(const MatchingSpec& spec) {
  spec.validate();
  Dataset d;
  d.seed = spec.seed;
  int redraws = 0;
  const Graph g = draw_graph(spec, spec.seed, &redraws);
  spdlog::info("matching graph: {} nodes, {} edges after {} redraws", g.nodes, g.edges.size(), redraws);
  d.family = matching_family(g);
  d.family.c.setConstant(-spec.cost_mean);
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> cost(spec.cost_mean, spec.cost_sd);
  auto draw = [&] {
    Sample s;
    s.theta.resize(d.family.theta_dim);
    for (int j = 0; j < s.theta.size(); ++j) s.theta[j] = std::round(cost(rng) * 1000.0) / 1000.0;
    return s;
  };
  for (int i = 0; i < spec.n_train; ++i) d.train.push_back(draw());
  for (int i = 0; i < spec.n_validation; ++i) d.validation.push_back(draw());
  for (int i = 0; i < spec.n_test; ++i) d.test.push_back(draw());
  return d;
}

// ---------------------------------------------------------------------------
// Fuel cell / supercapacitor control

void ControlSpec::validate() const {
  if (H < 1) throw InvalidInput("control: horizon must be >= 1");
  if (!(E_min < E_max)) throw InvalidInput("control: need E_min < E_max");
  if (!(P_max > 0.0)) throw InvalidInput("control: P_max must be positive");
  if (N_sw < 0) throw InvalidInput("control: N_sw must be >= 0");
  if (!(upsilon > 0.0)) throw InvalidInput("control: upsilon must be positive");
  if (!(E_init_sd >= 0.0) || !(P_load_sd >= 0.0)) throw InvalidInput("control: negative sampling spread");
  if (n_train < 1 || n_validation < 0 || n_test < 0) throw InvalidInput("control: bad split sizes");
}

ParametricFamily control_family(const ControlSpec& spec) {
  spec.validate();
  const ControlLayout L{spec.H};
  const int H = spec.H, n = L.n();
  const int core = 9 * H;
  ParametricFamily f;
  f.name = "control";
  f.A = Mat::Zero(core + n, n);
  f.b = Vec::Zero(core + n);
  f.c = Vec::Zero(n);
  f.theta_dim = L.theta_dim();
  f.bound_rows = n;
  int row = 0;
  auto rhs = [&](double offset, std::vector<std::pair<int, double>> terms) {
    AffineEntry e;
    e.target = AffineEntry::Target::b;
    e.row = row;
    e.offset = offset;
    e.terms = std::move(terms);
    f.theta_map.push_back(std::move(e));
  };

  // E_tau = E_init + upsilon sum_{s<tau} (P_s - P_load_s) within [E_min, E_max], tau = 1..H.
  for (int sign : {1, -1}) {
    for (int t = 1; t <= H; ++t, ++row) {
      std::vector<std::pair<int, double>> terms{{ControlLayout::kEInit, -sign * 1.0}};
      for (int s = 0; s < t; ++s) {
        f.A(row, L.P(s)) = sign * spec.upsilon;
        terms.emplace_back(L.theta_P_load(s), sign * spec.upsilon);
      }
      rhs(sign > 0 ? spec.E_max : -spec.E_min, std::move(terms));
    }
  }
  // P_tau <= zeta_tau P_max
  for (int t = 0; t < H; ++t, ++row) {
    f.A(row, L.P(t)) = 1.0;
    f.A(row, L.zeta(t)) = -spec.P_max;
  }
  // zeta_tau = zeta_{tau-1} + psi_tau with zeta_{-1} = zeta_init and psi = psi' - 1.
  for (int sign : {1, -1}) {
    for (int t = 0; t < H; ++t, ++row) {
      f.A(row, L.zeta(t)) = sign;
      f.A(row, L.psi(t)) = -sign;
      if (t > 0) {
        f.A(row, L.zeta(t - 1)) = -sign;
        f.b[row] = -sign;
      } else {
        rhs(-sign, {{ControlLayout::kZetaInit, sign * 1.0}});
      }
    }
  }
  // k_tau = s_init + sum_{s<tau} (xi_s - xi_past_s) <= N_sw, tau = 1..H.
  for (int t = 1; t <= H; ++t, ++row) {
    std::vector<std::pair<int, double>> terms{{ControlLayout::kSInit, -1.0}};
    for (int s = 0; s < t; ++s) {
      f.A(row, L.xi(s)) = 1.0;
      terms.emplace_back(ControlLayout::kXiPast + s, 1.0);
    }
    rhs(spec.N_sw, std::move(terms));
  }
  // |psi_tau| <= xi_tau
  for (int sign : {1, -1}) {
    for (int t = 0; t < H; ++t, ++row) {
      f.A(row, L.psi(t)) = sign;
      f.A(row, L.xi(t)) = -1.0;
      f.b[row] = sign;
    }
  }
  // A switch needs the cell on before or after it: xi_tau <= zeta_tau + zeta_{tau-1}.
  for (int t = 0; t < H; ++t, ++row) {
    f.A(row, L.xi(t)) = 1.0;
    f.A(row, L.zeta(t)) = -1.0;
    if (t > 0)
      f.A(row, L.zeta(t - 1)) = -1.0;
    else
      rhs(0.0, {{ControlLayout::kZetaInit, 1.0}});
  }
  // Bounds.
  for (int j = 0; j < n; ++j, ++row) {
    f.A(row, j) = 1.0;
    f.b[row] = j < H ? spec.P_max : (j >= 3 * H ? 2.0 : 1.0);
  }
  for (int t = 0; t < H; ++t) {
    f.c[L.P(t)] = spec.omega;
    f.c[L.zeta(t)] = spec.delta;
  }
  for (int t = 0; t < H; ++t) f.integer_indices.push_back(L.zeta(t));
  for (int t = 0; t < H; ++t) f.integer_indices.push_back(L.xi(t));

  // Base right-hand side at the nominal parameter (midpoints, binaries at 0).
  Vec nominal = Vec::Zero(f.theta_dim);
  nominal[ControlLayout::kEInit] = 0.5 * (spec.E_min + spec.E_max);
  for (int t = 0; t < H; ++t) nominal[L.theta_P_load(t)] = 0.5 * spec.P_max;
  f.b = realize(f, nominal).b;
  f.validate();
  return f;
}

Vec control_energy(const ControlSpec& spec, const Vec& x, const Vec& theta) {
  const ControlLayout L{spec.H};
  Vec E(spec.H + 1);
  E[0] = theta[ControlLayout::kEInit];
  for (int t = 0; t < spec.H; ++t) E[t + 1] = E[t] + spec.upsilon * (x[L.P(t)] - theta[L.theta_P_load(t)]);
  return E;
}

namespace {

BruteForceOptions oracle_options() {
  BruteForceOptions o;
  o.max_integer_vars = 64;
  o.lp_bound_pruning = true;
  return o;
}

}  // namespace

Dataset gen_control(const ControlSpec& spec, int* resampled) {
  spec.validate();
  const ControlLayout L{spec.H};
  Dataset d;
  d.seed = spec.seed;
  d.family = control_family(spec);
  std::mt19937_64 rng(spec.seed);
  std::bernoulli_distribution bit(0.5);
  std::normal_distribution<double> e_init(0.5 * (spec.E_min + spec.E_max), spec.E_init_sd);
  std::normal_distribution<double> load(0.5 * spec.P_max, spec.P_load_sd);
  auto truncated = [&](std::normal_distribution<double>& dist, double lo, double hi) {
    for (;;) {
      const double v = dist(rng);
      if (v >= lo && v <= hi) return v;
    }
  };
  int rejected = 0;
  auto draw = [&] {
    for (;;) {
      Sample s;
      s.theta = Vec::Zero(L.theta_dim());
      s.theta[ControlLayout::kEInit] = truncated(e_init, spec.E_min, spec.E_max);
      s.theta[ControlLayout::kZetaInit] = bit(rng);
      s.theta[ControlLayout::kSInit] = bit(rng);
      for (int t = 0; t < spec.H; ++t) s.theta[ControlLayout::kXiPast + t] = bit(rng);
      for (int t = 0; t < spec.H; ++t) s.theta[L.theta_P_load(t)] = truncated(load, 0.0, spec.P_max);
      try {
        s.z_star = brute_force_optimum(realize(d.family, s.theta), oracle_options()).z;
        return s;
      } catch (const NumericalAbort&) {
        ++rejected;
      }
    }
  };
  for (int i = 0; i < spec.n_train; ++i) d.train.push_back(draw());
  for (int i = 0; i < spec.n_validation; ++i) d.validation.push_back(draw());
  for (int i = 0; i < spec.n_test; ++i) d.test.push_back(draw());
  if (rejected > 0) spdlog::info("control: resampled {} infeasible parameter draws", rejected);
  if (resampled) *resampled = rejected;
  return d;
}

void compute_optima(Dataset& dataset, int jobs) {
  std::vector<Sample*> todo;
  for (auto* split : {&dataset.train, &dataset.validation, &dataset.test})
    for (auto& s : *split)
      if (!s.z_star) todo.push_back(&s);
  parallel_for(static_cast<int>(todo.size()), jobs, [&](int i) {
    Sample& s = *todo[static_cast<std::size_t>(i)];
    s.z_star = brute_force_optimum(realize(dataset.family, s.theta), oracle_options()).z;
  });
}

}  // namespace cplopt::instgen
