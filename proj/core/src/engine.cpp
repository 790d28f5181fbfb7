// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "cplopt/engine.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <sstream>

namespace cplopt::engine {

void RunConfig::validate() const {
  if (R < 1) throw InvalidInput("run config: R must be >= 1");
  if (K < 1) throw InvalidInput("run config: K must be >= 1");
  if (M < 1) throw InvalidInput("run config: M must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput("run config: gamma must lie in (0, 1)");
  if (!(eps_cut >= 0.0)) throw InvalidInput("run config: eps_cut must be >= 0");
}

std::vector<Cut> Trajectory::last_round_cuts() const {
  for (auto it = rounds.rbegin(); it != rounds.rend(); ++it) {
    if (it->accepted.empty()) continue;
    std::vector<Cut> out;
    for (int idx : it->accepted) out.push_back(pool[cuts[static_cast<std::size_t>(idx)].pool_index]);
    return out;
  }
  return {};
}

namespace {

bool integral(const Vec& x, const std::vector<int>& integer_indices) {
  for (int j : integer_indices)
    if (fractional_distance(x[j]) > 1e-6) return false;
  return true;
}

AlgoState make_state(int round, const conic::RelaxationSolution& sol, const CutPool& pool) {
  AlgoState s;
  s.round = round;
  s.objective = sol.objective;
  s.candidate = sol.x;
  s.G = pool.G();
  s.h = pool.h();
  return s;
}

std::string describe_cut(const Cut& cut) {
  std::ostringstream os;
  os << "g = [";
  for (int j = 0; j < cut.g.size(); ++j) os << (j ? ", " : "") << fmt::format("{:.17g}", cut.g[j]);
  os << "], h = " << fmt::format("{:.17g}", cut.h);
  return os.str();
}

std::vector<std::optional<cgp::CutGenParams>> baseline_sigma(const ProblemInstance& inst,
                                                            const Vec& x_bar, int K, int m_hat) {
  std::vector<std::optional<cgp::CutGenParams>> out(static_cast<std::size_t>(K));
  const auto order = policy::fractional_order(x_bar, inst.integer_indices);
  for (int k = 0; k < K && k < static_cast<int>(order.size()); ++k) {
    const int j = order[static_cast<std::size_t>(k)];
    cgp::CutGenParams s;
    s.pi = Vec::Zero(inst.n());
    s.pi[j] = 1.0;
    s.eta = std::floor(x_bar[j]);
    s.D_diag = cgp::standard_normalization(m_hat);
    s.p = cgp::Norm::l1;
    out[static_cast<std::size_t>(k)] = std::move(s);
  }
  return out;
}

}  // namespace

double loss(const std::vector<double>& z, double gamma) {
  double L = 0.0, g = 1.0;
  for (std::size_t r = 1; r < z.size(); ++r) {
    g *= gamma;
    L -= g * (z[r] - z[r - 1]);
  }
  return L;
}

double loss(const Trajectory& t, double gamma) {
  std::vector<double> z;
  for (const auto& s : t.states) z.push_back(s.objective);
  return loss(z, gamma);
}

Trajectory run_forward(const ProblemInstance& inst, const policy::PolicyParams* pol,
                       const RunConfig& config) {
  config.validate();
  inst.validate();
  const bool baseline = config.mode == RunMode::baseline;
  if (!baseline) {
    if (pol == nullptr) throw InvalidInput("run_forward: policy mode needs policy parameters");
    const auto& S = pol->sizes;
    if (S.n != inst.n() || S.m != inst.m() || S.R != config.R || S.K != config.K)
      throw InvalidInput(fmt::format(
          "run_forward: policy sizes (n={}, m={}, R={}, K={}) do not match the run (n={}, m={}, R={}, K={})",
          S.n, S.m, S.R, S.K, inst.n(), inst.m(), config.R, config.K));
    if (pol->mode == policy::Mode::recurrent && S.M != config.M)
      throw InvalidInput("run_forward: policy history length differs from the run config");
  }

  Trajectory t;
  t.config = config;
  t.pool = CutPool(inst.n(), config.R * config.K);
  t.relaxations.push_back(conic::solve_relaxation(inst, t.pool, config.solver_tol));
  if (t.relaxations.back().raw.reduced_accuracy) ++t.diag.reduced_accuracy;
  t.states.push_back(make_state(0, t.relaxations.back(), t.pool));
  t.state_source.push_back(0);
  bool done = integral(t.states.back().candidate, inst.integer_indices);
  if (done) t.diag.early_exit_round = 0;

  for (int r = 1; r <= config.R; ++r) {
    RoundRecord rec;
    rec.round = r;
    if (done) {
      rec.sigma.assign(static_cast<std::size_t>(config.K), std::nullopt);
      t.rounds.push_back(std::move(rec));
      AlgoState s = t.states.back();
      s.round = r;
      t.states.push_back(std::move(s));
      t.state_source.push_back(t.state_source.back());
      continue;
    }
    const Vec x_bar = t.states.back().candidate;
    const int m_hat = inst.m() + t.pool.size();
    if (baseline) {
      rec.sigma = baseline_sigma(inst, x_bar, config.K, m_hat);
    } else {
      const auto hist = pol->mode == policy::Mode::recurrent
                            ? policy::encode(inst, t.states, t.pool.capacity(), pol->sizes)
                            : std::vector<Vec>{};
      auto res = policy::act(*pol, hist, r, x_bar, inst.integer_indices, m_hat, config.p);
      rec.sigma = std::move(res.heads);
      rec.cache = std::move(res.cache);
    }

    // All heads separate the same point against the round-start pool; appends follow in head order.
    const CutPool start_pool = t.pool;
    for (int k = 0; k < config.K; ++k) {
      const auto& sigma = rec.sigma[static_cast<std::size_t>(k)];
      if (!sigma) continue;
      auto problem = cgp::build_cgp(inst, start_pool, x_bar, *sigma);
      auto cand = cgp::solve_cgp(problem, config.eps_cut, config.solver_tol);
      if (!cand) {
        ++rec.no_cut;
        continue;
      }
      if (cand->raw.reduced_accuracy) ++t.diag.reduced_accuracy;
      Cut cut;
      std::vector<long> shift;
      if (config.strengthen) {
        auto st = cgp::monoidal_strengthen(*cand, problem);
        cut = std::move(st.cut);
        if (st.applied) shift = std::move(st.shift);
      } else {
        cut.g = cand->g;
        cut.h = cand->h;
        cut.u = cand->u;
        cut.v = cand->v;
        cut.violation_at_birth = cand->violation;
      }
      cut.round = r;
      cut = cgp::normalized(cut);
      if (cgp::is_duplicate(cut, t.pool)) {
        ++rec.duplicates;
        continue;
      }
      CutRecord cr;
      cr.round = r;
      cr.head = k;
      cr.pool_index = t.pool.size();
      cr.problem = std::move(problem);
      cr.candidate = std::move(*cand);
      cr.shift = std::move(shift);
      t.pool.append(cut);
      rec.accepted.push_back(static_cast<int>(t.cuts.size()));
      t.cuts.push_back(std::move(cr));
    }
    t.diag.no_cut += rec.no_cut;
    t.diag.duplicates += rec.duplicates;

    if (rec.accepted.empty()) {
      AlgoState s = t.states.back();
      s.round = r;
      t.states.push_back(std::move(s));
      t.state_source.push_back(t.state_source.back());
    } else {
      try {
        t.relaxations.push_back(conic::solve_relaxation(inst, t.pool, config.solver_tol));
      } catch (const NumericalAbort& e) {
        std::string cuts;
        for (int idx : rec.accepted)
          cuts += "\n  " + describe_cut(t.pool[t.cuts[static_cast<std::size_t>(idx)].pool_index]);
        throw NumericalAbort(fmt::format("{} after round {}; cuts added this round:{}", e.what(), r, cuts));
      }
      if (t.relaxations.back().raw.reduced_accuracy) ++t.diag.reduced_accuracy;
      t.states.push_back(make_state(r, t.relaxations.back(), t.pool));
      t.state_source.push_back(static_cast<int>(t.relaxations.size()) - 1);
    }
    t.rounds.push_back(std::move(rec));
    if (integral(t.states.back().candidate, inst.integer_indices)) {
      done = true;
      t.diag.early_exit_round = r;
    }
  }
  t.loss = loss(t, config.gamma);
  return t;
}

Trajectory run_baseline(const ProblemInstance& instance, const RunConfig& config) {
  RunConfig c = config;
  c.mode = RunMode::baseline;
  c.p = cgp::Norm::l1;
  return run_forward(instance, nullptr, c);
}

BackwardResult backward(const Trajectory& t, const policy::PolicyParams& pol,
                        const ProblemInstance& inst) {
  const int R = t.config.R, n = inst.n(), m = inst.m();
  const double gamma = t.config.gamma;
  BackwardResult out;
  out.grad = Vec::Zero(pol.num_params());
  if (t.config.mode == RunMode::baseline) return out;

  // dL/dx~_r for every state, folded onto the relaxation that produced it.
  std::vector<Vec> cot_relax(t.relaxations.size(), Vec::Zero(n));
  for (int r = 1; r <= R; ++r) {
    const double w = -std::pow(gamma, r) + (r < R ? std::pow(gamma, r + 1) : 0.0);
    cot_relax[static_cast<std::size_t>(t.state_source[static_cast<std::size_t>(r)])] += w * inst.c;
  }

  // Cotangents on the pooled (normalized) cut rows.
  std::vector<Vec> cot_g(t.cuts.size(), Vec::Zero(n));
  std::vector<double> cot_h(t.cuts.size(), 0.0);

  auto pool_prefix = [&](int size) {
    CutPool p(n, t.pool.capacity());
    for (int i = 0; i < size; ++i) p.append(t.pool[i]);
    return p;
  };
  auto count = [&](const autodiff::BackwardDiagnostics& d) {
    ++out.solves;
    if (d.regularized) ++out.regularized;
  };

  int next_cut = static_cast<int>(t.cuts.size()) - 1;
  for (int r = R; r >= 1; --r) {
    const int src = t.state_source[static_cast<std::size_t>(r)];
    const auto& rec = t.rounds[static_cast<std::size_t>(r - 1)];
    // The relaxation solved at the end of round r (only when the round added cuts).
    if (!rec.accepted.empty()) {
      const Vec& cx = cot_relax[static_cast<std::size_t>(src)];
      if (cx.squaredNorm() > 0.0) {
        const auto& sol = t.relaxations[static_cast<std::size_t>(src)];
        const int k = static_cast<int>(sol.problem.G.rows()) - m - n;
        const auto g = autodiff::relaxation_vjp(inst, pool_prefix(k), sol, cx);
        count(g.diag);
        for (int i = 0; i < k; ++i) {
          cot_g[static_cast<std::size_t>(i)] += g.G_pool.row(i).transpose();
          cot_h[static_cast<std::size_t>(i)] += g.h_pool[i];
        }
      }
    }

    std::vector<Vec> dD(static_cast<std::size_t>(t.config.K));
    const int prev_src = t.state_source[static_cast<std::size_t>(r - 1)];
    for (; next_cut >= 0 && t.cuts[static_cast<std::size_t>(next_cut)].round == r; --next_cut) {
      const auto& cr = t.cuts[static_cast<std::size_t>(next_cut)];
      const auto ci = static_cast<std::size_t>(next_cut);
      if (cot_g[ci].squaredNorm() == 0.0 && cot_h[ci] == 0.0) continue;
      const auto g = autodiff::cgp_vjp(cr.problem, cr.candidate, cot_g[ci], cot_h[ci], cr.shift, true);
      count(g.diag);
      for (int i = 0; i < cr.problem.m_hat() - m; ++i) {
        cot_g[static_cast<std::size_t>(i)] += g.A_stack.row(m + i).transpose();
        cot_h[static_cast<std::size_t>(i)] += g.b_hat[m + i];
      }
      cot_relax[static_cast<std::size_t>(prev_src)] += g.x_bar;
      auto& d = dD[static_cast<std::size_t>(cr.head)];
      if (d.size() == 0) d = Vec::Zero(g.D_diag.size());
      d += g.D_diag;
    }
    if (rec.cache) policy::backward(pol, *rec.cache, dD, out.grad);
  }
  return out;
}

}  // namespace cplopt::engine
