// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "cplopt/conic.hpp"
#include "cplopt/engine.hpp"
#include "cplopt/instgen.hpp"

namespace {

using namespace cplopt;

ProblemInstance matching_instance(int nodes, int edges) {
  instgen::MatchingSpec spec;
  spec.nodes = nodes;
  spec.edges = edges;
  spec.n_train = 1;
  spec.n_validation = 0;
  spec.n_test = 0;
  spec.seed = 11;
  const auto d = instgen::gen_matching(spec);
  return realize(d.family, d.train[0].theta);
}

ProblemInstance control_instance() {
  instgen::ControlSpec spec;
  spec.n_train = 1;
  spec.n_validation = 0;
  spec.n_test = 0;
  spec.seed = 11;
  const auto d = instgen::gen_control(spec);
  return realize(d.family, d.train[0].theta);
}

policy::PolicyParams recurrent_policy(const ProblemInstance& inst, const engine::RunConfig& cfg) {
  policy::Sizes s;
  s.n = inst.n();
  s.m = inst.m();
  s.R = cfg.R;
  s.K = cfg.K;
  s.M = cfg.M;
  s.hidden = 64;
  return policy::init_params(5, s, policy::Mode::recurrent);
}

void BM_RelaxationSolve(benchmark::State& state) {
  const auto inst = matching_instance(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const CutPool pool(inst.n(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(conic::solve_relaxation(inst, pool).objective);
  state.SetLabel("n=" + std::to_string(inst.n()) + " m=" + std::to_string(inst.m()));
}
BENCHMARK(BM_RelaxationSolve)->Args({10, 20})->Args({16, 35})->Args({24, 60})->Unit(benchmark::kMillisecond);

void BM_ControlRelaxation(benchmark::State& state) {
  const auto inst = control_instance();
  const CutPool pool(inst.n(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(conic::solve_relaxation(inst, pool).objective);
}
BENCHMARK(BM_ControlRelaxation)->Unit(benchmark::kMillisecond);

void BM_BaselineForward(benchmark::State& state) {
  const auto inst = matching_instance(16, 35);
  engine::RunConfig cfg;
  cfg.R = static_cast<int>(state.range(0));
  cfg.K = 2;
  for (auto _ : state) benchmark::DoNotOptimize(engine::run_baseline(inst, cfg).loss);
}
BENCHMARK(BM_BaselineForward)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_PolicyForwardBackward(benchmark::State& state) {
  const auto inst = matching_instance(16, 35);
  engine::RunConfig cfg;
  cfg.R = 3;
  cfg.K = 2;
  cfg.p = cgp::Norm::l2;
  const auto P = recurrent_policy(inst, cfg);
  for (auto _ : state) {
    const auto t = engine::run_forward(inst, &P, cfg);
    benchmark::DoNotOptimize(engine::backward(t, P, inst).grad.data());
  }
}
BENCHMARK(BM_PolicyForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
