// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cplopt/engine.hpp"
#include "cplopt/instgen.hpp"
#include "cplopt/policy.hpp"

namespace cplopt::train {

struct TrainConfig {
  double learning_rate = 1e-5;
  double momentum = 0.9;
  double decay = 0.01;  // epoch e (from 1) uses learning_rate / (1 + decay (e - 1))
  int batch_size = 10;
  int max_epochs = 20;
  int patience = 5;     // epochs without a better validation gap
  std::uint64_t seed = 0;
  int jobs = 1;         // instance-level parallelism; results do not depend on it

  /// Throws InvalidInput unless learning_rate >= 0, momentum in [0, 1),
  /// decay >= 0, batch_size >= 1, max_epochs >= 0, patience >= 1 and jobs >= 1.
  void validate() const;
};

/// Gap, Infeas and MaxViol of a finished trajectory. MaxViol is measured at the
/// point the last cut-producing round separated.
QualityReport trajectory_quality(const ProblemInstance& instance,
                                 const engine::Trajectory& trajectory, double z_star);

struct InstanceResult {
  int index = 0;
  std::optional<double> gap;  // empty when z* is unknown
  double infeas = 0.0;
  double max_viol = 0.0;
  double loss = 0.0;
  double z_root = 0.0;
  double z_final = 0.0;
  int cuts = 0;
};

struct Evaluation {
  double mean_gap = 0.0;     // over instances with a known z*
  double mean_infeas = 0.0;
  double mean_maxviol = 0.0;
  double mean_loss = 0.0;
  int missing_z_star = 0;
  std::vector<InstanceResult> rows;
};

/// Runs every sample with `params` (null: the standard-normalization baseline) and
/// averages the metrics. NumericalAbort from a run propagates.
Evaluation evaluate(const policy::PolicyParams* params, const ParametricFamily& family,
                    const std::vector<instgen::Sample>& samples, const engine::RunConfig& config,
                    int jobs = 1);

struct BatchGradient {
  Vec grad;           // mean over the batch
  double loss = 0.0;  // mean over the batch
  bool finite = true; // false when any instance produced a non-finite value or aborted
};

/// Mean loss and gradient over samples[indices]; the reduction runs in index order.
BatchGradient batch_gradient(const policy::PolicyParams& params, const ParametricFamily& family,
                             const std::vector<instgen::Sample>& samples,
                             const std::vector<int>& indices, const engine::RunConfig& config,
                             int jobs = 1);

struct EpochMetrics {
  int epoch = 0;
  instgen::SplitName split = instgen::SplitName::train;
  double mean_gap = 0.0;
  double mean_infeas = 0.0;
  double mean_maxviol = 0.0;
  double mean_loss = 0.0;
};

struct FitResult {
  policy::PolicyParams best;  // parameters with the lowest validation gap seen
  int best_epoch = 0;
  double best_validation_gap = 0.0;
  std::vector<EpochMetrics> history;  // epoch 0 is the untrained policy
  int updates = 0;
  int skipped_updates = 0;
  bool early_stopped = false;
};

/// Called after each epoch's evaluation; return false to stop.
using EpochCallback = std::function<bool(int epoch, const policy::PolicyParams& params,
                                         const std::vector<EpochMetrics>& history)>;

/// Minibatch SGD with heavy-ball momentum, v <- momentum v + grad, rho <- rho - lr v.
/// Batches follow a per-epoch shuffle drawn from `seed`. Each epoch evaluates the
/// training and validation splits (the training split stands in when validation is
/// empty). A non-finite batch gradient skips the update and halves the learning rate;
/// three in a row throw NumericalAbort.
FitResult fit(const instgen::Dataset& dataset, policy::PolicyParams init,
              const engine::RunConfig& run_config, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

/// Header plus one row per entry: epoch,split,mean_gap,mean_infeas,mean_maxviol,mean_loss.
/// Numbers use 17 significant digits so the text is a pure function of the values.
std::string metrics_csv(const std::vector<EpochMetrics>& history);
inline constexpr const char* kMetricsColumns = "epoch,split,mean_gap,mean_infeas,mean_maxviol,mean_loss";

}  // namespace cplopt::train
