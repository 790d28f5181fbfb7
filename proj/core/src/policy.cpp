// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "cplopt/policy.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cplopt::policy {

std::string to_string(Mode mode) { return mode == Mode::recurrent ? "recurrent" : "static"; }

Mode parse_mode(const std::string& text) {
  if (text == "recurrent") return Mode::recurrent;
  if (text == "static") return Mode::static_table;
  throw InvalidInput("policy mode must be 'recurrent' or 'static' (got '" + text + "')");
}

void Sizes::validate() const {
  if (n < 1 || m < 1) throw InvalidInput("policy sizes: n and m must be positive");
  if (R < 1 || K < 1) throw InvalidInput("policy sizes: R and K must be >= 1");
  if (hidden < 1) throw InvalidInput("policy sizes: hidden size must be >= 1");
  if (M < 1) throw InvalidInput("policy sizes: history length M must be >= 1");
}

namespace {

// Visits every trainable block in flatten order.
template <typename P, typename F>
void for_each_block(P& params, F&& f) {
  if (params.mode == Mode::recurrent) {
    f(params.Wx.data(), params.Wx.size());
    f(params.Wh.data(), params.Wh.size());
    f(params.bl.data(), params.bl.size());
    f(params.W1.data(), params.W1.size());
    f(params.b1.data(), params.b1.size());
    f(params.W2.data(), params.W2.size());
    f(params.b2.data(), params.b2.size());
    for (std::size_t k = 0; k < params.Wk.size(); ++k) {
      f(params.Wk[k].data(), params.Wk[k].size());
      f(params.bk[k].data(), params.bk[k].size());
    }
  } else {
    for (auto& row : params.table)
      for (auto& cell : row) f(cell.D.data(), cell.D.size());
  }
}

// Offsets of each block in the flat vector, in flatten order.
struct Layout {
  long Wx = 0, Wh = 0, bl = 0, W1 = 0, b1 = 0, W2 = 0, b2 = 0;
  std::vector<long> Wk, bk;
  std::vector<std::vector<long>> cell;
};

Layout layout_of(const PolicyParams& p) {
  Layout L;
  long off = 0;
  if (p.mode == Mode::recurrent) {
    L.Wx = off, off += p.Wx.size();
    L.Wh = off, off += p.Wh.size();
    L.bl = off, off += p.bl.size();
    L.W1 = off, off += p.W1.size();
    L.b1 = off, off += p.b1.size();
    L.W2 = off, off += p.W2.size();
    L.b2 = off, off += p.b2.size();
    for (std::size_t k = 0; k < p.Wk.size(); ++k) {
      L.Wk.push_back(off), off += p.Wk[k].size();
      L.bk.push_back(off), off += p.bk[k].size();
    }
  } else {
    for (const auto& row : p.table) {
      L.cell.emplace_back();
      for (const auto& cell : row) L.cell.back().push_back(off), off += cell.D.size();
    }
  }
  return L;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Mat uniform(std::mt19937_64& rng, int rows, int cols, int fan_in) {
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> U(-a, a);
  Mat W(rows, cols);
  // Column-major fill order is part of the seed contract.
  for (Eigen::Index j = 0; j < W.cols(); ++j)
    for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = U(rng);
  return W;
}

}  // namespace

Vec PolicyParams::flatten() const {
  Vec out(num_params());
  long off = 0;
  for_each_block(*this, [&](const double* data, long size) {
    out.segment(off, size) = Eigen::Map<const Vec>(data, size);
    off += size;
  });
  return out;
}

void PolicyParams::unflatten(const Vec& flat) {
  if (flat.size() != num_params())
    throw InvalidInput("policy: flat parameter vector has length " + std::to_string(flat.size()) +
                       ", expected " + std::to_string(num_params()));
  long off = 0;
  for_each_block(*this, [&](double* data, long size) {
    Eigen::Map<Vec>(data, size) = flat.segment(off, size);
    off += size;
  });
}

int PolicyParams::num_params() const {
  long total = 0;
  for_each_block(*this, [&](const double*, long size) { total += size; });
  return static_cast<int>(total);
}

PolicyParams init_params(std::uint64_t seed, const Sizes& sizes, Mode mode) {
  sizes.validate();
  PolicyParams p;
  p.mode = mode;
  p.sizes = sizes;
  std::mt19937_64 rng(seed);
  if (mode == Mode::recurrent) {
    const int H = sizes.hidden, E = sizes.encoding_len();
    p.Wx = uniform(rng, 4 * H, E, E);
    p.Wh = uniform(rng, 4 * H, H, H);
    p.bl = uniform(rng, 4 * H, 1, H);
    p.W1 = uniform(rng, sizes.fc1(), H, H);
    p.b1 = uniform(rng, sizes.fc1(), 1, H);
    p.W2 = uniform(rng, sizes.fc2(), sizes.fc1(), sizes.fc1());
    p.b2 = uniform(rng, sizes.fc2(), 1, sizes.fc1());
    for (int k = 0; k < sizes.K; ++k) {
      p.Wk.push_back(uniform(rng, sizes.head_out(), sizes.fc2(), sizes.fc2()));
      p.bk.push_back(uniform(rng, sizes.head_out(), 1, sizes.fc2()));
    }
  } else {
    const int mm = sizes.m_hat_max();
    StaticEntry trivial;
    trivial.D = Vec::Zero(sizes.norm_len());
    trivial.D[mm] = 1.0;
    trivial.D[2 * mm + 1] = 1.0;
    p.table.assign(static_cast<std::size_t>(sizes.R),
                   std::vector<StaticEntry>(static_cast<std::size_t>(sizes.K), trivial));
  }
  return p;
}

Vec encode_state(const ProblemInstance& instance, const AlgoState& state, int pool_capacity,
                 const Sizes& sizes) {
  const int n = sizes.n;
  Vec e = Vec::Zero(sizes.encoding_len());
  if (state.candidate.size() != n) throw InvalidInput("encode_state: candidate has the wrong dimension");
  e[0] = state.objective;
  e.segment(1, n) = state.candidate;
  for (int j : instance.integer_indices) e[1 + n + j] = fractional_distance(state.candidate[j]);
  const int k = static_cast<int>(state.G.rows());
  if (k > 0) {
    double sum = 0.0, mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
      const double v = (state.G.row(i).dot(state.candidate) - state.h[i]) /
                       std::max(state.G.row(i).norm(), 1e-12);
      sum += v;
      mx = std::max(mx, v);
    }
    e[1 + 2 * n] = sum / k;
    e[2 + 2 * n] = mx;
    e[3 + 2 * n] = pool_capacity > 0 ? static_cast<double>(k) / pool_capacity : 0.0;
  }
  return e;
}

std::vector<Vec> encode(const ProblemInstance& instance, const std::vector<AlgoState>& history,
                        int pool_capacity, const Sizes& sizes) {
  std::vector<Vec> out;
  const int M = sizes.M;
  const int have = static_cast<int>(history.size());
  for (int t = have - M; t < have; ++t)
    out.push_back(t < 0 ? Vec::Zero(sizes.encoding_len())
                        : encode_state(instance, history[static_cast<std::size_t>(t)], pool_capacity,
                                       sizes));
  return out;
}

std::vector<int> fractional_order(const Vec& x_bar, const std::vector<int>& integer_indices,
                                  double tol) {
  std::vector<int> idx;
  for (int j : integer_indices)
    if (fractional_distance(x_bar[j]) > tol) idx.push_back(j);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    // Round-off must not break index tie order (0.3 vs 0.7).
    return fractional_distance(x_bar[a]) > fractional_distance(x_bar[b]) + 1e-12;
  });
  return idx;
}

int padded_index(int i, int m_hat, int m_hat_max) {
  const int half = m_hat + 1;
  if (i < half) return i < m_hat ? i : m_hat_max;
  const int k = i - half;
  return k < m_hat ? m_hat_max + 1 + k : 2 * m_hat_max + 1;
}

ActResult act(const PolicyParams& params, const std::vector<Vec>& history, int round,
              const Vec& x_bar, const std::vector<int>& integer_indices, int m_hat, cgp::Norm p) {
  const Sizes& S = params.sizes;
  const int n = S.n, K = S.K, mm = S.m_hat_max();
  if (x_bar.size() != n) throw InvalidInput("act: x_bar has the wrong dimension");
  if (m_hat < 1 || m_hat > mm) throw InvalidInput("act: m_hat out of range");
  if (round < 1 || round > S.R) throw InvalidInput("act: round out of range");
  const int len = 2 * (m_hat + 1);

  ActResult res;
  auto& C = res.cache;
  C.round = round;
  C.m_hat = m_hat;
  C.valid_norm.resize(static_cast<std::size_t>(K));
  C.D.resize(static_cast<std::size_t>(K));
  C.active.assign(static_cast<std::size_t>(K), false);
  res.heads.resize(static_cast<std::size_t>(K));

  const auto order = fractional_order(x_bar, integer_indices);

  if (params.mode == Mode::static_table) {
    for (int k = 0; k < K; ++k) {
      const auto& cell = params.table[static_cast<std::size_t>(round - 1)][static_cast<std::size_t>(k)];
      cgp::CutGenParams sigma;
      if (cell.pi) {
        sigma.pi = *cell.pi;
        const double act_val = sigma.pi.dot(x_bar);
        if (fractional_distance(act_val) <= 1e-6) continue;
        sigma.eta = cell.eta ? *cell.eta : std::floor(act_val);
      } else {
        if (k >= static_cast<int>(order.size())) continue;
        const int j = order[static_cast<std::size_t>(k)];
        sigma.pi = Vec::Zero(n);
        sigma.pi[j] = 1.0;
        sigma.eta = std::floor(x_bar[j]);
      }
      sigma.D_diag.resize(len);
      for (int i = 0; i < len; ++i) sigma.D_diag[i] = std::max(cell.D[padded_index(i, m_hat, mm)], 0.0);
      if (!(sigma.D_diag.maxCoeff() > 0.0)) {
        spdlog::warn("static policy cell ({}, {}) has an all-zero normalization; head skipped", round, k);
        continue;
      }
      sigma.p = p;
      C.D[static_cast<std::size_t>(k)] = sigma.D_diag;
      C.active[static_cast<std::size_t>(k)] = true;
      res.heads[static_cast<std::size_t>(k)] = std::move(sigma);
    }
    return res;
  }

  // Recurrent trunk.
  const int H = S.hidden;
  if (static_cast<int>(history.size()) != S.M) throw InvalidInput("act: history length must equal M");
  Vec h = Vec::Zero(H), c = Vec::Zero(H);
  C.hs.push_back(h);
  C.cs.push_back(c);
  for (const Vec& e : history) {
    if (e.size() != S.encoding_len()) throw InvalidInput("act: encoding has the wrong length");
    Vec z = params.Wx * e + params.Wh * h + params.bl;
    for (int i = 0; i < H; ++i) {
      z[i] = sigmoid(z[i]);
      z[H + i] = sigmoid(z[H + i]);
      z[2 * H + i] = std::tanh(z[2 * H + i]);
      z[3 * H + i] = sigmoid(z[3 * H + i]);
    }
    c = z.segment(H, H).cwiseProduct(c) + z.head(H).cwiseProduct(z.segment(2 * H, H));
    h = z.tail(H).cwiseProduct(c.array().tanh().matrix());
    C.inputs.push_back(e);
    C.gates.push_back(z);
    C.hs.push_back(h);
    C.cs.push_back(c);
  }
  C.a1 = (params.W1 * h + params.b1).cwiseMax(0.0);
  C.a2 = (params.W2 * C.a1 + params.b2).cwiseMax(0.0);

  for (int k = 0; k < K; ++k) {
    if (order.empty()) break;
    const Vec out = params.Wk[static_cast<std::size_t>(k)] * C.a2 + params.bk[static_cast<std::size_t>(k)];
    int j = order.front();
    for (int cand : order)
      if (out[cand] > out[j] || (out[cand] == out[j] && cand < j)) j = cand;
    auto& valid = C.valid_norm[static_cast<std::size_t>(k)];
    valid.resize(static_cast<std::size_t>(len));
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < len; ++i) {
      valid[static_cast<std::size_t>(i)] = padded_index(i, m_hat, mm);
      mx = std::max(mx, out[n + valid[static_cast<std::size_t>(i)]]);
    }
    Vec sm(len);
    for (int i = 0; i < len; ++i) sm[i] = std::exp(out[n + valid[static_cast<std::size_t>(i)]] - mx);
    sm /= sm.sum();
    cgp::CutGenParams sigma;
    sigma.pi = Vec::Zero(n);
    sigma.pi[j] = 1.0;
    sigma.eta = std::floor(x_bar[j]);
    sigma.D_diag = static_cast<double>(len) * sm;
    sigma.p = p;
    C.D[static_cast<std::size_t>(k)] = sigma.D_diag;
    C.active[static_cast<std::size_t>(k)] = true;
    res.heads[static_cast<std::size_t>(k)] = std::move(sigma);
  }
  return res;
}

void backward(const PolicyParams& params, const ActCache& C, const std::vector<Vec>& dD, Vec& grad) {
  const Sizes& S = params.sizes;
  const int K = S.K, mm = S.m_hat_max(), n = S.n;
  if (grad.size() != params.num_params()) throw InvalidInput("policy backward: gradient has the wrong size");
  if (static_cast<int>(dD.size()) != K) throw InvalidInput("policy backward: need one dD per head");
  const Layout L = layout_of(params);
  const int len = 2 * (C.m_hat + 1);

  if (params.mode == Mode::static_table) {
    for (int k = 0; k < K; ++k) {
      const Vec& g = dD[static_cast<std::size_t>(k)];
      if (g.size() == 0 || !C.active[static_cast<std::size_t>(k)]) continue;
      if (g.size() != len) throw InvalidInput("policy backward: dD has the wrong length");
      const auto& cell = params.table[static_cast<std::size_t>(C.round - 1)][static_cast<std::size_t>(k)];
      const long base = L.cell[static_cast<std::size_t>(C.round - 1)][static_cast<std::size_t>(k)];
      for (int i = 0; i < len; ++i) {
        const int pi = padded_index(i, C.m_hat, mm);
        // max(D, 0) passes the gradient at D >= 0 so zero entries can move off the boundary.
        if (cell.D[pi] >= 0.0) grad[base + pi] += g[i];
      }
    }
    return;
  }

  const int H = S.hidden;
  Vec da2 = Vec::Zero(C.a2.size());
  bool any = false;
  for (int k = 0; k < K; ++k) {
    const Vec& g = dD[static_cast<std::size_t>(k)];
    if (g.size() == 0 || !C.active[static_cast<std::size_t>(k)]) continue;
    if (g.size() != len) throw InvalidInput("policy backward: dD has the wrong length");
    any = true;
    const Vec& D = C.D[static_cast<std::size_t>(k)];
    const Vec sm = D / static_cast<double>(len);
    const double avg = g.dot(sm);
    Vec dout = Vec::Zero(S.head_out());
    for (int i = 0; i < len; ++i)
      dout[n + C.valid_norm[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]] =
          static_cast<double>(len) * sm[i] * (g[i] - avg);
    Eigen::Map<Mat>(grad.data() + L.Wk[static_cast<std::size_t>(k)], S.head_out(), S.fc2()) +=
        dout * C.a2.transpose();
    grad.segment(L.bk[static_cast<std::size_t>(k)], S.head_out()) += dout;
    da2 += params.Wk[static_cast<std::size_t>(k)].transpose() * dout;
  }
  if (!any) return;
  const Vec dz2 = da2.cwiseProduct((C.a2.array() > 0.0).cast<double>().matrix());
  Eigen::Map<Mat>(grad.data() + L.W2, S.fc2(), S.fc1()) += dz2 * C.a1.transpose();
  grad.segment(L.b2, S.fc2()) += dz2;
  const Vec dz1 = (params.W2.transpose() * dz2).cwiseProduct((C.a1.array() > 0.0).cast<double>().matrix());
  const Vec& hT = C.hs.back();
  Eigen::Map<Mat>(grad.data() + L.W1, S.fc1(), H) += dz1 * hT.transpose();
  grad.segment(L.b1, S.fc1()) += dz1;

  Vec dh = params.W1.transpose() * dz1;
  Vec dc = Vec::Zero(H);
  auto dWx = Eigen::Map<Mat>(grad.data() + L.Wx, 4 * H, S.encoding_len());
  auto dWh = Eigen::Map<Mat>(grad.data() + L.Wh, 4 * H, H);
  for (int t = static_cast<int>(C.gates.size()) - 1; t >= 0; --t) {
    const Vec& z = C.gates[static_cast<std::size_t>(t)];
    const Vec& c_prev = C.cs[static_cast<std::size_t>(t)];
    const Vec& c_t = C.cs[static_cast<std::size_t>(t + 1)];
    const Vec tc = c_t.array().tanh().matrix();
    const auto i_g = z.head(H), f_g = z.segment(H, H), g_g = z.segment(2 * H, H), o_g = z.tail(H);
    dc += dh.cwiseProduct(o_g).cwiseProduct((1.0 - tc.array().square()).matrix());
    Vec dpre(4 * H);
    dpre.head(H) = dc.cwiseProduct(g_g).cwiseProduct((i_g.array() * (1.0 - i_g.array())).matrix());
    dpre.segment(H, H) = dc.cwiseProduct(c_prev).cwiseProduct((f_g.array() * (1.0 - f_g.array())).matrix());
    dpre.segment(2 * H, H) = dc.cwiseProduct(i_g).cwiseProduct((1.0 - g_g.array().square()).matrix());
    dpre.tail(H) = dh.cwiseProduct(tc).cwiseProduct((o_g.array() * (1.0 - o_g.array())).matrix());
    dWx += dpre * C.inputs[static_cast<std::size_t>(t)].transpose();
    dWh += dpre * C.hs[static_cast<std::size_t>(t)].transpose();
    grad.segment(L.bl, 4 * H) += dpre;
    dh = params.Wh.transpose() * dpre;
    dc = dc.cwiseProduct(f_g);
  }
}

}  // namespace cplopt::policy
