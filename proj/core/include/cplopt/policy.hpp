// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cplopt/cgp.hpp"
#include "cplopt/model.hpp"

namespace cplopt::policy {

enum class Mode { recurrent, static_table };
std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

/// Shapes shared by every instance of a family. m counts all rows of A
/// (bounds included); pools are padded to m_hat_max = m + R K.
struct Sizes {
  int n = 0;
  int m = 0;
  int R = 1;
  int K = 1;
  int hidden = 64;
  int M = 1;

  int m_hat_max() const { return m + R * K; }
  int norm_len() const { return 2 * (m_hat_max() + 1); }  // padded D layout
  int encoding_len() const { return 2 * n + 4; }
  int fc1() const { return 4 * (m_hat_max() + 1) + 2 * n; }
  int fc2() const { return 2 * (m_hat_max() + 1) + n; }
  int head_out() const { return n + norm_len(); }
  void validate() const;
};

/// One static-table cell. D uses the padded layout
/// [u_1..u_{m_hat_max}, u_0, v_1..v_{m_hat_max}, v_0]; entries are clamped at 0 when used.
/// Without pi the head splits on its k-th most fractional integer variable.
struct StaticEntry {
  Vec D;
  std::optional<Vec> pi;
  std::optional<double> eta;
};

struct PolicyParams {
  Mode mode = Mode::recurrent;
  Sizes sizes;

  // LSTM, gate order (input, forget, cell, output), each block `hidden` rows.
  Mat Wx, Wh;
  Vec bl;
  Mat W1, W2;
  Vec b1, b2;
  std::vector<Mat> Wk;  // K heads
  std::vector<Vec> bk;

  std::vector<std::vector<StaticEntry>> table;  // [round-1][head]

  /// Trainable parameters in a fixed order; pi/eta of static cells are not trainable.
  Vec flatten() const;
  void unflatten(const Vec& flat);
  int num_params() const;
};

/// Weights uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); static cells start at the
/// trivial normalization with most-fractional splits. Throws InvalidInput on bad sizes.
PolicyParams init_params(std::uint64_t seed, const Sizes& sizes, Mode mode);

/// (z~, x~ padded to n, fractionality on integer columns, mean and max normalized
/// pool violation at x~, pool fill fraction). Zero pool features when the pool is empty.
Vec encode_state(const ProblemInstance& instance, const AlgoState& state, int pool_capacity,
                 const Sizes& sizes);

/// Last M encodings, oldest first; missing early states are zero vectors.
std::vector<Vec> encode(const ProblemInstance& instance, const std::vector<AlgoState>& history,
                        int pool_capacity, const Sizes& sizes);

/// Integer columns sorted by fractionality (descending), ties by index; only
/// entries with fractional distance above tol.
std::vector<int> fractional_order(const Vec& x_bar, const std::vector<int>& integer_indices,
                                  double tol = 1e-6);

/// Everything the backward pass needs from one act call.
struct ActCache {
  int round = 0;
  int m_hat = 0;
  std::vector<Vec> inputs;                  // encodings
  std::vector<Vec> hs, cs, gates;           // LSTM trace (gates post-activation)
  Vec a1, a2;                               // FC outputs after ReLU
  std::vector<std::vector<int>> valid_norm; // per head: padded indices that were softmaxed
  std::vector<Vec> D;                       // per head: emitted D (current layout)
  std::vector<bool> active;                 // per head: params emitted
};

struct ActResult {
  std::vector<std::optional<cgp::CutGenParams>> heads;
  ActCache cache;
};

/// Emits K CutGenParams for round `round` (1-based). Heads with no fractional
/// integer variable return nullopt.
ActResult act(const PolicyParams& params, const std::vector<Vec>& history, int round,
              const Vec& x_bar, const std::vector<int>& integer_indices, int m_hat, cgp::Norm p);

/// Padded index of entry i of a current-layout D vector (length 2(m_hat+1)).
int padded_index(int i, int m_hat, int m_hat_max);

/// Adds d(loss)/d(params) to `grad` (flat layout) given d(loss)/dD for each head
/// in the current layout (empty vectors for heads without a gradient).
void backward(const PolicyParams& params, const ActCache& cache, const std::vector<Vec>& dD,
              Vec& grad);

}  // namespace cplopt::policy
