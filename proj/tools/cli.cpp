// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <spdlog/spdlog.h>
#include <spdlog/version.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <optional>
#include <random>

#include "cplopt/autodiff.hpp"
#include "cplopt/conic.hpp"
#include "cplopt/engine.hpp"
#include "cplopt/instgen.hpp"
#include "cplopt/serialize.hpp"
#include "cplopt/train.hpp"

#ifndef CPLOPT_VERSION
#define CPLOPT_VERSION "0.0.0"
#endif

namespace cplopt::cli {

namespace {

using io::Json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Flag groups. Every config field has exactly one flag; flags the user did not
// pass leave the base config (defaults or a checkpoint's echo) untouched.

struct RunFlags {
  engine::RunConfig cfg;
  std::string p = "1";
  std::string mode;
  std::vector<CLI::Option*> opts;
  CLI::Option *p_opt = nullptr, *mode_opt = nullptr;

  void add(CLI::App& app) {
    opts.push_back(app.add_option("--R", cfg.R, "cutting-plane rounds"));
    opts.push_back(app.add_option("--K", cfg.K, "cuts generated per round"));
    p_opt = app.add_option("--p", p, "normalization norm: 1, 2 or inf");
    opts.push_back(app.add_option("--gamma", cfg.gamma, "loss discount in (0, 1)"));
    opts.push_back(app.add_option("--eps-cut", cfg.eps_cut, "minimum violation to accept a cut"));
    opts.push_back(app.add_option("--M", cfg.M, "policy history length"));
    opts.push_back(app.add_option("--strengthen", cfg.strengthen, "monoidal strengthening (true/false)"));
    mode_opt = app.add_option("--mode", mode, "run mode: policy or baseline")
                   ->check(CLI::IsMember({"policy", "baseline"}));
    opts.push_back(app.add_option("--solver-tol", cfg.solver_tol, "solver tolerance (<= 0: default)"));
  }

  // Applies the flags the user set on top of `base`.
  engine::RunConfig resolve(engine::RunConfig base) const {
    auto pick = [&](CLI::Option* o, auto& dst, const auto& src) {
      if (o->count() > 0) dst = src;
    };
    pick(opts[0], base.R, cfg.R);
    pick(opts[1], base.K, cfg.K);
    if (p_opt->count() > 0) base.p = cgp::parse_norm(p);
    pick(opts[2], base.gamma, cfg.gamma);
    pick(opts[3], base.eps_cut, cfg.eps_cut);
    pick(opts[4], base.M, cfg.M);
    pick(opts[5], base.strengthen, cfg.strengthen);
    if (mode_opt->count() > 0)
      base.mode = mode == "baseline" ? engine::RunMode::baseline : engine::RunMode::policy;
    pick(opts[6], base.solver_tol, cfg.solver_tol);
    base.validate();
    return base;
  }
};

struct PolicyFlags {
  std::string arch = "recurrent";
  int hidden = 64;
  std::uint64_t init_seed = 0;
  std::string checkpoint;

  void add(CLI::App& app) {
    app.add_option("--policy", arch, "policy architecture: recurrent or static")
        ->check(CLI::IsMember({"recurrent", "static"}));
    app.add_option("--hidden", hidden, "LSTM hidden size");
    app.add_option("--init-seed", init_seed, "seed of the initial policy weights");
    app.add_option("--checkpoint", checkpoint, "checkpoint file (cplopt-ckpt-v1)");
  }

  Json to_json() const {
    Json j = Json::object();
    j["policy"] = arch;
    j["hidden"] = hidden;
    j["init_seed"] = init_seed;
    j["checkpoint"] = checkpoint;
    return j;
  }
};

struct TrainFlags {
  train::TrainConfig cfg;
  void add(CLI::App& app) {
    app.add_option("--learning-rate", cfg.learning_rate, "initial learning rate");
    app.add_option("--momentum", cfg.momentum, "heavy-ball momentum in [0, 1)");
    app.add_option("--decay", cfg.decay, "learning-rate decay per epoch");
    app.add_option("--batch-size", cfg.batch_size, "instances per update");
    app.add_option("--max-epochs", cfg.max_epochs, "epoch limit");
    app.add_option("--patience", cfg.patience, "epochs without validation improvement before stopping");
    app.add_option("--seed", cfg.seed, "shuffle seed");
  }
};

struct Args {
  std::vector<std::string> raw;
  std::string out;
  std::string family;
  std::string split = "all";
  int theta_index = 0;
  int jobs = 1;
};

// ---------------------------------------------------------------------------
// Helpers

Json versions() {
  Json v = Json::object();
  v["cplopt"] = CPLOPT_VERSION;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  v["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  v["spdlog"] = std::to_string(SPDLOG_VER_MAJOR) + "." + std::to_string(SPDLOG_VER_MINOR) + "." +
                std::to_string(SPDLOG_VER_PATCH);
  return v;
}

void write_manifest(const Args& a, const std::string& command, Json configs, Json outputs,
                    Json csv_columns = Json::object()) {
  Json m = Json::object();
  m["format"] = "cplopt-manifest-v1";
  m["command"] = command;
  m["argv"] = a.raw;
  m["inputs"] = Json::object();
  if (!a.family.empty()) m["inputs"]["family"] = a.family;
  m["configs"] = std::move(configs);
  m["solver_tol_default"] = conic::default_tolerance();
  m["jobs"] = a.jobs;
  m["versions"] = versions();
  m["outputs"] = std::move(outputs);
  m["csv_columns"] = std::move(csv_columns);
  io::write_json_file((fs::path(a.out) / "manifest.json").string(), m);
}

struct Selected {
  instgen::SplitName split;
  int index;  // within the split
  const instgen::Sample* sample;
};

std::vector<Selected> select(const instgen::Dataset& d, const std::string& split) {
  std::vector<Selected> out;
  for (auto s : {instgen::SplitName::train, instgen::SplitName::validation, instgen::SplitName::test}) {
    if (split != "all" && instgen::parse_split(split) != s) continue;
    const auto& v = d.split(s);
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back({s, static_cast<int>(i), &v[i]});
  }
  return out;
}

const Selected& pick_sample(const std::vector<Selected>& all, int index) {
  if (index < 0 || index >= static_cast<int>(all.size()))
    throw InvalidInput("--theta-index " + std::to_string(index) + " is out of range (" +
                       std::to_string(all.size()) + " samples)");
  return all[static_cast<std::size_t>(index)];
}

policy::PolicyParams make_policy(const PolicyFlags& pf, const ParametricFamily& f,
                                 const engine::RunConfig& rc) {
  policy::Sizes s;
  s.n = f.n();
  s.m = f.m();
  s.R = rc.R;
  s.K = rc.K;
  s.M = rc.M;
  s.hidden = pf.hidden;
  return policy::init_params(pf.init_seed, s, policy::parse_mode(pf.arch));
}

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string evaluation_csv(const std::vector<std::pair<instgen::SplitName, train::Evaluation>>& evs) {
  std::string out = "split,index,gap,infeas,max_viol,loss,z_root,z_final,cuts\n";
  for (const auto& [split, ev] : evs)
    for (const auto& r : ev.rows)
      out += instgen::to_string(split) + "," + std::to_string(r.index) + "," +
             (r.gap ? fmt_num(*r.gap) : std::string("NA")) + "," + fmt_num(r.infeas) + "," +
             fmt_num(r.max_viol) + "," + fmt_num(r.loss) + "," + fmt_num(r.z_root) + "," +
             fmt_num(r.z_final) + "," + std::to_string(r.cuts) + "\n";
  return out;
}

const char* kEvaluationColumns = "split,index,gap,infeas,max_viol,loss,z_root,z_final,cuts";

Json columns(const std::string& text) {
  Json a = Json::array();
  std::size_t start = 0;
  for (;;) {
    const auto comma = text.find(',', start);
    a.push_back(text.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return a;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_generate(const Args& a, const std::string& family, instgen::MatchingSpec ms,
                 instgen::ControlSpec cs, std::optional<int> n_train, std::optional<int> n_val,
                 std::optional<int> n_test, std::uint64_t seed, bool optima) {
  instgen::Dataset d;
  Json spec = Json::object();
  if (family == "matching") {
    ms.seed = seed;
    if (n_train) ms.n_train = *n_train;
    if (n_val) ms.n_validation = *n_val;
    if (n_test) ms.n_test = *n_test;
    d = instgen::gen_matching(ms);
    if (optima) instgen::compute_optima(d, a.jobs);
    spec = {{"nodes", ms.nodes}, {"edges", ms.edges}, {"edge_prob", ms.edge_prob},
            {"cost_mean", ms.cost_mean}, {"cost_sd", ms.cost_sd}, {"n_train", ms.n_train},
            {"n_validation", ms.n_validation}, {"n_test", ms.n_test}, {"seed", ms.seed}};
  } else {
    cs.seed = seed;
    if (n_train) cs.n_train = *n_train;
    if (n_val) cs.n_validation = *n_val;
    if (n_test) cs.n_test = *n_test;
    d = instgen::gen_control(cs);
    spec = {{"H", cs.H}, {"upsilon", cs.upsilon}, {"omega", cs.omega}, {"delta", cs.delta},
            {"E_min", cs.E_min}, {"E_max", cs.E_max}, {"P_max", cs.P_max}, {"N_sw", cs.N_sw},
            {"E_init_sd", cs.E_init_sd}, {"P_load_sd", cs.P_load_sd}, {"n_train", cs.n_train},
            {"n_validation", cs.n_validation}, {"n_test", cs.n_test}, {"seed", cs.seed}};
  }
  const auto path = (fs::path(a.out) / "family.json").string();
  io::write_json_file(path, io::dataset_to_json(d));
  std::printf("%s: %s family, n = %d, m = %d (%d excluding bounds), %zu/%zu/%zu samples\n",
              path.c_str(), family.c_str(), d.family.n(), d.family.m(), d.family.core_rows(),
              d.train.size(), d.validation.size(), d.test.size());
  Json cfg = Json::object();
  cfg["family"] = family;
  cfg["spec"] = spec;
  cfg["optima"] = optima;
  write_manifest(a, "generate", cfg, Json::array({"family.json"}));
  return kExitOk;
}

int cmd_train(const Args& a, const RunFlags& rf, const PolicyFlags& pf, TrainFlags tf) {
  auto d = io::dataset_from_json(io::read_json_file(a.family));
  std::optional<io::Checkpoint> init;
  if (!pf.checkpoint.empty()) init = io::checkpoint_from_json(io::read_json_file(pf.checkpoint));
  const auto rc = rf.resolve(init ? init->run_config : engine::RunConfig{});
  if (rc.mode != engine::RunMode::policy) throw InvalidInput("train: --mode must be 'policy'");
  auto params = init ? init->params : make_policy(pf, d.family, rc);
  tf.cfg.jobs = a.jobs;
  tf.cfg.validate();
  const auto res = train::fit(d, params, rc, tf.cfg);

  io::Checkpoint ck;
  ck.params = res.best;
  ck.run_config = rc;
  ck.extra["best_epoch"] = res.best_epoch;
  ck.extra["best_validation_gap"] = res.best_validation_gap;
  ck.extra["train_config"] = io::train_config_to_json(tf.cfg);
  io::write_json_file((fs::path(a.out) / "checkpoint.json").string(), io::checkpoint_to_json(ck));
  io::write_text_file((fs::path(a.out) / "metrics.csv").string(), train::metrics_csv(res.history));
  std::printf("best epoch %d, validation gap %.6g%%, %d updates (%d skipped)%s\n", res.best_epoch,
              res.best_validation_gap, res.updates, res.skipped_updates,
              res.early_stopped ? ", early stop" : "");

  Json cfg = Json::object();
  cfg["run"] = io::run_config_to_json(rc);
  cfg["train"] = io::train_config_to_json(tf.cfg);
  cfg["policy"] = pf.to_json();
  Json cols = Json::object();
  cols["metrics.csv"] = columns(train::kMetricsColumns);
  write_manifest(a, "train", cfg, Json::array({"checkpoint.json", "metrics.csv"}), cols);
  return kExitOk;
}

int cmd_evaluate(const Args& a, const RunFlags& rf, const PolicyFlags& pf, const std::string& command) {
  const auto d = io::dataset_from_json(io::read_json_file(a.family));
  std::optional<io::Checkpoint> ck;
  if (!pf.checkpoint.empty()) ck = io::checkpoint_from_json(io::read_json_file(pf.checkpoint));
  auto base = ck ? ck->run_config : engine::RunConfig{};
  if (!ck) base.mode = engine::RunMode::baseline;
  auto rc = rf.resolve(base);
  if (command == "baseline") rc.mode = engine::RunMode::baseline;
  if (rc.mode == engine::RunMode::policy && !ck)
    throw InvalidInput(command + ": policy mode needs --checkpoint");
  const policy::PolicyParams* params = rc.mode == engine::RunMode::policy ? &ck->params : nullptr;
  const int epoch = ck && ck->extra.contains("best_epoch") ? ck->extra["best_epoch"].get<int>() : 0;

  std::vector<std::pair<instgen::SplitName, train::Evaluation>> evs;
  std::vector<train::EpochMetrics> rows;
  for (auto s : {instgen::SplitName::train, instgen::SplitName::validation, instgen::SplitName::test}) {
    if (a.split != "all" && instgen::parse_split(a.split) != s) continue;
    if (d.split(s).empty()) continue;
    auto ev = train::evaluate(params, d.family, d.split(s), rc, a.jobs);
    rows.push_back({epoch, s, ev.mean_gap, ev.mean_infeas, ev.mean_maxviol, ev.mean_loss});
    std::printf("%-10s Gap %.4f%%  Infeas %.4f  MaxViol %.4f  (n = %zu, missing z* = %d)\n",
                instgen::to_string(s).c_str(), ev.mean_gap, ev.mean_infeas, ev.mean_maxviol,
                ev.rows.size(), ev.missing_z_star);
    evs.emplace_back(s, std::move(ev));
  }
  io::write_text_file((fs::path(a.out) / "metrics.csv").string(), train::metrics_csv(rows));
  io::write_text_file((fs::path(a.out) / "evaluation.csv").string(), evaluation_csv(evs));

  Json cfg = Json::object();
  cfg["run"] = io::run_config_to_json(rc);
  cfg["policy"] = pf.to_json();
  cfg["split"] = a.split;
  Json cols = Json::object();
  cols["metrics.csv"] = columns(train::kMetricsColumns);
  cols["evaluation.csv"] = columns(kEvaluationColumns);
  write_manifest(a, command, cfg, Json::array({"metrics.csv", "evaluation.csv"}), cols);
  return kExitOk;
}

int cmd_solve(const Args& a, const RunFlags& rf, const PolicyFlags& pf) {
  const auto d = io::dataset_from_json(io::read_json_file(a.family));
  const auto all = select(d, a.split);
  const auto& sel = pick_sample(all, a.theta_index);
  std::optional<io::Checkpoint> ck;
  if (!pf.checkpoint.empty()) ck = io::checkpoint_from_json(io::read_json_file(pf.checkpoint));
  const auto rc = rf.resolve(ck ? ck->run_config : engine::RunConfig{});
  const auto inst = realize(d.family, sel.sample->theta);
  std::optional<policy::PolicyParams> fresh;
  const policy::PolicyParams* params = nullptr;
  if (rc.mode == engine::RunMode::policy) {
    if (ck) {
      params = &ck->params;
    } else {
      fresh = make_policy(pf, d.family, rc);
      params = &*fresh;
    }
  }
  const auto t = params ? engine::run_forward(inst, params, rc) : engine::run_baseline(inst, rc);
  double z_star = 0.0;
  if (sel.sample->z_star) {
    z_star = *sel.sample->z_star;
  } else {
    BruteForceOptions o;
    o.max_integer_vars = 64;
    o.lp_bound_pruning = true;
    z_star = brute_force_optimum(inst, o).z;
  }
  const auto q = train::trajectory_quality(inst, t, z_star);
  Json doc = io::trajectory_to_json(t);
  doc["instance"] = {{"split", instgen::to_string(sel.split)}, {"index", sel.index}, {"z_star", z_star}};
  doc["quality"] = {{"gap", q.gap}, {"infeas", q.infeas}, {"max_viol", q.max_viol}};
  io::write_json_file((fs::path(a.out) / "trajectory.json").string(), doc);
  std::printf("z_root %.9g  z_final %.9g  z* %.9g  cuts %d\n", t.states.front().objective,
              t.states.back().objective, z_star, t.pool.size());
  std::printf("Gap %.6f%%  Infeas %.6f  MaxViol %.6f\n", q.gap, q.infeas, q.max_viol);

  Json cfg = Json::object();
  cfg["run"] = io::run_config_to_json(rc);
  cfg["policy"] = pf.to_json();
  cfg["split"] = a.split;
  cfg["theta_index"] = a.theta_index;
  write_manifest(a, "solve", cfg, Json::array({"trajectory.json"}));
  return kExitOk;
}

int cmd_gradcheck(const Args& a, const RunFlags& rf, const PolicyFlags& pf, double step, double tol,
                  int max_coords) {
  const auto d = io::dataset_from_json(io::read_json_file(a.family));
  const auto all = select(d, a.split);
  const auto& sel = pick_sample(all, a.theta_index);
  std::optional<io::Checkpoint> ck;
  if (!pf.checkpoint.empty()) ck = io::checkpoint_from_json(io::read_json_file(pf.checkpoint));
  const auto rc = rf.resolve(ck ? ck->run_config : engine::RunConfig{});
  if (rc.mode != engine::RunMode::policy) throw InvalidInput("gradcheck: --mode must be 'policy'");
  const auto params = ck ? ck->params : make_policy(pf, d.family, rc);
  const auto inst = realize(d.family, sel.sample->theta);
  const auto t = engine::run_forward(inst, &params, rc);
  const auto bw = engine::backward(t, params, inst);
  const Vec theta = params.flatten();

  // Largest analytic entries first, then a seeded sample of the rest.
  std::vector<int> order(static_cast<std::size_t>(theta.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return std::abs(bw.grad[i]) > std::abs(bw.grad[j]); });
  const int take = std::min<int>(max_coords, static_cast<int>(order.size()));
  std::vector<int> coords(order.begin(), order.begin() + take / 2);
  std::vector<int> rest(order.begin() + take / 2, order.end());
  std::mt19937_64 rng(pf.init_seed);
  for (std::size_t i = rest.size(); i > 1; --i) std::swap(rest[i - 1], rest[static_cast<std::size_t>(rng() % i)]);
  coords.insert(coords.end(), rest.begin(), rest.begin() + (take - take / 2));
  std::sort(coords.begin(), coords.end());

  Vec sub(static_cast<int>(coords.size())), sub_grad(static_cast<int>(coords.size()));
  for (std::size_t k = 0; k < coords.size(); ++k) {
    sub[static_cast<int>(k)] = theta[coords[k]];
    sub_grad[static_cast<int>(k)] = bw.grad[coords[k]];
  }
  auto f = [&](const Vec& s) {
    Vec full = theta;
    for (std::size_t k = 0; k < coords.size(); ++k) full[coords[k]] = s[static_cast<int>(k)];
    auto P = params;
    P.unflatten(full);
    return engine::run_forward(inst, &P, rc).loss;
  };
  const auto rep = autodiff::finite_diff_check(f, sub, sub_grad, step);
  const bool pass = rep.passed(tol);

  Json doc = Json::object();
  doc["format"] = "cplopt-gradcheck-v1";
  doc["loss"] = t.loss;
  doc["grad_norm"] = bw.grad.norm();
  doc["max_rel_error"] = rep.max_rel_error;
  doc["pass_fraction"] = rep.pass_fraction(tol);
  doc["unreliable"] = rep.unreliable;
  doc["tol"] = tol;
  doc["passed"] = pass;
  Json cs = Json::array();
  for (std::size_t k = 0; k < rep.coords.size(); ++k) {
    const auto& c = rep.coords[k];
    cs.push_back({{"index", coords[k]}, {"analytic", c.analytic}, {"numeric", c.numeric},
                  {"rel_error", c.rel_error}, {"reliable", c.reliable}});
  }
  doc["coords"] = std::move(cs);
  io::write_json_file((fs::path(a.out) / "gradcheck.json").string(), doc);
  std::printf("checked %zu of %d coordinates: max rel error %.3e, %.1f%% within %.0e, %d unreliable -> %s\n",
              coords.size(), static_cast<int>(theta.size()), rep.max_rel_error,
              100.0 * rep.pass_fraction(tol), tol, rep.unreliable, pass ? "PASS" : "FAIL");

  Json cfg = Json::object();
  cfg["run"] = io::run_config_to_json(rc);
  cfg["policy"] = pf.to_json();
  cfg["split"] = a.split;
  cfg["theta_index"] = a.theta_index;
  cfg["step"] = step;
  cfg["tol"] = tol;
  cfg["max_coords"] = max_coords;
  write_manifest(a, "gradcheck", cfg, Json::array({"gradcheck.json"}));
  return kExitOk;
}

std::vector<std::string> replay_args(const std::string& manifest, const std::string& out) {
  const auto m = io::read_json_file(manifest);
  if (!m.contains("argv") || !m["argv"].is_array()) throw InvalidInput(manifest + ": missing field 'argv'");
  auto args = m["argv"].get<std::vector<std::string>>();
  if (!out.empty()) {
    bool replaced = false;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--out" && i + 1 < args.size()) {
        args[i + 1] = out;
        replaced = true;
      } else if (args[i].rfind("--out=", 0) == 0) {
        args[i] = "--out=" + out;
        replaced = true;
      }
    }
    if (!replaced) throw InvalidInput(manifest + ": argv has no --out to redirect");
  }
  return args;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"differentiable cutting-plane layers for parametric integer programs", "cplopt"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");
  Args a;
  a.raw = args;

  auto add_common = [&](CLI::App* sub, bool needs_family) {
    sub->add_option("--out", a.out, "output directory")->required();
    sub->add_option("--jobs", a.jobs, "worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
    if (needs_family)
      sub->add_option("--family", a.family, "family file (cplopt-family-v1)")
          ->required()
          ->check(CLI::ExistingFile);
  };

  // generate
  auto* gen = app.add_subcommand("generate", "generate a parametric family with theta samples");
  std::string family_kind;
  std::uint64_t gen_seed = 0;
  std::optional<int> n_train, n_val, n_test;
  bool no_optima = false;
  instgen::MatchingSpec ms;
  instgen::ControlSpec cs;
  gen->add_option("--family", family_kind, "matching or control")
      ->required()
      ->check(CLI::IsMember({"matching", "control"}));
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--n-train", n_train, "training samples");
  gen->add_option("--n-validation", n_val, "validation samples");
  gen->add_option("--n-test", n_test, "test samples");
  gen->add_flag("--no-optima", no_optima, "skip the exact optimum of each matching sample");
  gen->add_option("--nodes", ms.nodes, "matching: graph nodes");
  gen->add_option("--edges", ms.edges, "matching: graph edges");
  gen->add_option("--edge-prob", ms.edge_prob, "matching: Erdos-Renyi probability (<= 0: edges / C(nodes, 2))");
  gen->add_option("--cost-mean", ms.cost_mean, "matching: edge weight mean");
  gen->add_option("--cost-sd", ms.cost_sd, "matching: edge weight standard deviation");
  gen->add_option("--H", cs.H, "control: horizon");
  gen->add_option("--upsilon", cs.upsilon, "control: energy step");
  gen->add_option("--omega", cs.omega, "control: power cost");
  gen->add_option("--delta", cs.delta, "control: on-state cost");
  gen->add_option("--E-min", cs.E_min, "control: lower energy limit");
  gen->add_option("--E-max", cs.E_max, "control: upper energy limit");
  gen->add_option("--P-max", cs.P_max, "control: fuel-cell power limit");
  gen->add_option("--N-sw", cs.N_sw, "control: switches allowed per horizon window");
  gen->add_option("--E-init-sd", cs.E_init_sd, "control: spread of the initial energy");
  gen->add_option("--P-load-sd", cs.P_load_sd, "control: spread of the power load");
  add_common(gen, false);

  // train
  auto* tr = app.add_subcommand("train", "fit a policy on the training split");
  RunFlags tr_run;
  PolicyFlags tr_pol;
  TrainFlags tr_cfg;
  tr_run.add(*tr);
  tr_pol.add(*tr);
  tr_cfg.add(*tr);
  add_common(tr, true);

  // evaluate / baseline
  auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint (or the baseline) on a split");
  RunFlags ev_run;
  PolicyFlags ev_pol;
  ev_run.add(*ev);
  ev_pol.add(*ev);
  std::string ev_split = "test";
  ev->add_option("--split", ev_split, "train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));
  add_common(ev, true);

  auto* bl = app.add_subcommand("baseline", "evaluate the standard-normalization baseline");
  RunFlags bl_run;
  PolicyFlags bl_pol;
  bl_run.add(*bl);
  std::string bl_split = "all";
  bl->add_option("--split", bl_split, "train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));
  add_common(bl, true);

  // solve
  auto* so = app.add_subcommand("solve", "run the cutting-plane loop on one sample");
  RunFlags so_run;
  PolicyFlags so_pol;
  so_run.add(*so);
  so_pol.add(*so);
  std::string so_split = "all";
  so->add_option("--theta-index", a.theta_index, "sample index within --split")->required();
  so->add_option("--split", so_split, "train, validation, test or all (concatenated)")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));
  add_common(so, true);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "compare the policy gradient with finite differences");
  RunFlags gc_run;
  PolicyFlags gc_pol;
  gc_run.add(*gc);
  gc_pol.add(*gc);
  std::string gc_split = "all";
  double step = 1e-5, tol = 1e-3;
  int max_coords = 64;
  gc->add_option("--theta-index", a.theta_index, "sample index within --split")->required();
  gc->add_option("--split", gc_split, "train, validation, test or all (concatenated)")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));
  gc->add_option("--step", step, "central-difference step");
  gc->add_option("--tol", tol, "relative error threshold");
  gc->add_option("--max-coords", max_coords, "coordinates to check")->check(CLI::PositiveNumber);
  add_common(gc, true);

  // replay
  auto* rp = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  std::string manifest, replay_out;
  rp->add_option("--manifest", manifest, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);
  rp->add_option("--out", replay_out, "output directory (default: the recorded one)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const auto level = spdlog::level::from_str(log_level);
  spdlog::set_level(level);

  try {
    if (*rp) return run(replay_args(manifest, replay_out));
    if (*gen)
      return cmd_generate(a, family_kind, ms, cs, n_train, n_val, n_test, gen_seed, !no_optima);
    if (*tr) return cmd_train(a, tr_run, tr_pol, tr_cfg);
    if (*ev) {
      a.split = ev_split;
      return cmd_evaluate(a, ev_run, ev_pol, "evaluate");
    }
    if (*bl) {
      a.split = bl_split;
      return cmd_evaluate(a, bl_run, bl_pol, "baseline");
    }
    if (*so) {
      a.split = so_split;
      return cmd_solve(a, so_run, so_pol);
    }
    if (*gc) {
      a.split = gc_split;
      return cmd_gradcheck(a, gc_run, gc_pol, step, tol, max_coords);
    }
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const NumericalAbort& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace cplopt::cli
