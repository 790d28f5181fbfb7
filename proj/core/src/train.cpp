// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "cplopt/train.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "cplopt/parallel.hpp"

namespace cplopt::train {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw InvalidInput("train config: learning_rate must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidInput("train config: momentum must be in [0, 1)");
  if (!(decay >= 0.0)) throw InvalidInput("train config: decay must be >= 0");
  if (batch_size < 1) throw InvalidInput("train config: batch_size must be >= 1");
  if (max_epochs < 0) throw InvalidInput("train config: max_epochs must be >= 0");
  if (patience < 1) throw InvalidInput("train config: patience must be >= 1");
  if (jobs < 1) throw InvalidInput("train config: jobs must be >= 1");
}

QualityReport trajectory_quality(const ProblemInstance& instance, const engine::Trajectory& t,
                                 double z_star) {
  const Vec& x = t.states.back().candidate;
  int separated_round = 0;
  for (auto it = t.rounds.rbegin(); it != t.rounds.rend(); ++it)
    if (!it->accepted.empty()) {
      separated_round = it->round;
      break;
    }
  const Vec& prev = separated_round > 0
                        ? t.states[static_cast<std::size_t>(separated_round - 1)].candidate
                        : x;
  return quality(instance, x, z_star, t.last_round_cuts(), prev);
}

Evaluation evaluate(const policy::PolicyParams* params, const ParametricFamily& family,
                    const std::vector<instgen::Sample>& samples, const engine::RunConfig& config,
                    int jobs) {
  Evaluation ev;
  ev.rows.resize(samples.size());
  parallel_for(static_cast<int>(samples.size()), jobs, [&](int i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    const auto inst = realize(family, s.theta);
    const auto t = params ? engine::run_forward(inst, params, config)
                          : engine::run_baseline(inst, config);
    InstanceResult& r = ev.rows[static_cast<std::size_t>(i)];
    r.index = i;
    const auto q = trajectory_quality(inst, t, s.z_star.value_or(0.0));
    if (s.z_star) r.gap = q.gap;
    r.infeas = q.infeas;
    r.max_viol = q.max_viol;
    r.loss = t.loss;
    r.z_root = t.states.front().objective;
    r.z_final = t.states.back().objective;
    r.cuts = t.pool.size();
  });
  if (samples.empty()) return ev;
  int with_gap = 0;
  for (const auto& r : ev.rows) {
    if (r.gap) {
      ev.mean_gap += *r.gap;
      ++with_gap;
    } else {
      ++ev.missing_z_star;
    }
    ev.mean_infeas += r.infeas;
    ev.mean_maxviol += r.max_viol;
    ev.mean_loss += r.loss;
  }
  const double count = static_cast<double>(samples.size());
  ev.mean_gap = with_gap > 0 ? ev.mean_gap / with_gap : std::nan("");
  ev.mean_infeas /= count;
  ev.mean_maxviol /= count;
  ev.mean_loss /= count;
  if (ev.missing_z_star > 0)
    spdlog::warn("evaluate: {} of {} instances have no z*; excluded from the mean gap",
                 ev.missing_z_star, samples.size());
  return ev;
}

BatchGradient batch_gradient(const policy::PolicyParams& params, const ParametricFamily& family,
                             const std::vector<instgen::Sample>& samples,
                             const std::vector<int>& indices, const engine::RunConfig& config,
                             int jobs) {
  struct Item {
    Vec grad;
    double loss = 0.0;
    bool ok = true;
  };
  std::vector<Item> items(indices.size());
  parallel_for(static_cast<int>(indices.size()), jobs, [&](int i) {
    Item& it = items[static_cast<std::size_t>(i)];
    const auto& s = samples.at(static_cast<std::size_t>(indices[static_cast<std::size_t>(i)]));
    try {
      const auto inst = realize(family, s.theta);
      const auto t = engine::run_forward(inst, &params, config);
      it.loss = t.loss;
      it.grad = engine::backward(t, params, inst).grad;
      it.ok = std::isfinite(it.loss) && it.grad.allFinite();
    } catch (const NumericalAbort& e) {
      spdlog::warn("training instance {} aborted: {}", indices[static_cast<std::size_t>(i)], e.what());
      it.ok = false;
    }
  });
  BatchGradient out;
  out.grad = Vec::Zero(params.num_params());
  for (const auto& it : items) {
    if (!it.ok) {
      out.finite = false;
      continue;
    }
    out.grad += it.grad;
    out.loss += it.loss;
  }
  if (!indices.empty()) {
    out.grad /= static_cast<double>(indices.size());
    out.loss /= static_cast<double>(indices.size());
  }
  return out;
}

namespace {

EpochMetrics metrics_of(int epoch, instgen::SplitName split, const Evaluation& ev) {
  EpochMetrics m;
  m.epoch = epoch;
  m.split = split;
  m.mean_gap = ev.mean_gap;
  m.mean_infeas = ev.mean_infeas;
  m.mean_maxviol = ev.mean_maxviol;
  m.mean_loss = ev.mean_loss;
  return m;
}

// Fisher-Yates with a plain modulus so the order does not depend on the
// standard library's distribution implementation.
void shuffle(std::vector<int>& order, std::mt19937_64& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
}

}  // namespace

FitResult fit(const instgen::Dataset& dataset, policy::PolicyParams init,
              const engine::RunConfig& run_config, const TrainConfig& config,
              const EpochCallback& on_epoch) {
  config.validate();
  run_config.validate();
  if (dataset.train.empty()) throw InvalidInput("fit: empty training split");
  if (run_config.mode != engine::RunMode::policy)
    throw InvalidInput("fit: the run config must be in policy mode");
  const auto& family = dataset.family;
  const bool has_validation = !dataset.validation.empty();
  spdlog::info("fit: {} train / {} validation / {} test instances, {} parameters",
               dataset.train.size(), dataset.validation.size(), dataset.test.size(),
               init.num_params());

  FitResult res;
  policy::PolicyParams params = std::move(init);
  Vec rho = params.flatten();
  Vec velocity = Vec::Zero(rho.size());

  auto run_epoch_eval = [&](int epoch) {
    const auto tr = evaluate(&params, family, dataset.train, run_config, config.jobs);
    res.history.push_back(metrics_of(epoch, instgen::SplitName::train, tr));
    if (!has_validation) return tr.mean_gap;
    const auto va = evaluate(&params, family, dataset.validation, run_config, config.jobs);
    res.history.push_back(metrics_of(epoch, instgen::SplitName::validation, va));
    return va.mean_gap;
  };

  double best = run_epoch_eval(0);
  res.best = params;
  res.best_epoch = 0;
  res.best_validation_gap = best;
  if (on_epoch && !on_epoch(0, params, res.history)) return res;

  std::mt19937_64 rng(config.seed);
  std::vector<int> order(dataset.train.size());
  double lr_scale = 1.0;
  int nan_streak = 0;
  int stale = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    const double lr = config.learning_rate / (1.0 + config.decay * (epoch - 1));
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(stop));
      const auto bg = batch_gradient(params, family, dataset.train, batch, run_config, config.jobs);
      if (!bg.finite) {
        ++res.skipped_updates;
        lr_scale *= 0.5;
        spdlog::warn("epoch {}: non-finite batch gradient, update skipped, learning rate scale {}",
                     epoch, lr_scale);
        if (++nan_streak >= 3) throw NumericalAbort("fit: three consecutive non-finite batch gradients");
        continue;
      }
      nan_streak = 0;
      velocity = config.momentum * velocity + bg.grad;
      rho -= lr * lr_scale * velocity;
      params.unflatten(rho);
      ++res.updates;
    }
    const double gap = run_epoch_eval(epoch);
    if (has_validation)
      spdlog::info("epoch {}: train gap {:.6g}, validation gap {:.6g}", epoch,
                   res.history[res.history.size() - 2].mean_gap, gap);
    else
      spdlog::info("epoch {}: train gap {:.6g}", epoch, gap);
    if (gap < best) {
      best = gap;
      res.best = params;
      res.best_epoch = epoch;
      res.best_validation_gap = gap;
      stale = 0;
    } else if (++stale >= config.patience) {
      res.early_stopped = true;
      spdlog::info("early stop after epoch {} (best epoch {})", epoch, res.best_epoch);
      break;
    }
    if (on_epoch && !on_epoch(epoch, params, res.history)) break;
  }
  return res;
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
  std::string out = std::string(kMetricsColumns) + "\n";
  char buf[256];
  for (const auto& m : history) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g,%.17g\n", m.epoch,
                  instgen::to_string(m.split).c_str(), m.mean_gap, m.mean_infeas, m.mean_maxviol,
                  m.mean_loss);
    out += buf;
  }
  return out;
}

}  // namespace cplopt::train
