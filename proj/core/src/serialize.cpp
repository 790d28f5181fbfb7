// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#include "cplopt/serialize.hpp"

#include <sodium.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cplopt::io {

namespace {

[[noreturn]] void fail(const std::string& what) { throw InvalidInput(what); }

const Json& field(const Json& doc, const std::string& name, const std::string& ctx) {
  if (!doc.is_object()) fail(ctx + ": expected an object");
  auto it = doc.find(name);
  if (it == doc.end()) fail(ctx + ": missing field '" + name + "'");
  return *it;
}

template <class T>
T get(const Json& doc, const std::string& name, const std::string& ctx) {
  const Json& j = field(doc, name, ctx);
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ctx + ": field '" + name + "' has the wrong type");
  }
}

template <class T>
T get_or(const Json& doc, const std::string& name, const std::string& ctx, T fallback) {
  if (!doc.contains(name)) return fallback;
  return get<T>(doc, name, ctx);
}

void expect_format(const Json& doc, const char* format) {
  const auto got = get<std::string>(doc, "format", "document");
  if (got != format) fail("document: format is '" + got + "', expected '" + format + "'");
}

Json mat_to_json(const Mat& A) {
  Json rows = Json::array();
  for (int i = 0; i < A.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < A.cols(); ++j) row.push_back(A(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const Json& j, int rows, int cols, const std::string& name) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    fail("field '" + name + "': expected " + std::to_string(rows) + " rows");
  Mat A(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const Vec r = vec_from_json(j[static_cast<std::size_t>(i)], name + "[" + std::to_string(i) + "]");
    if (r.size() != cols)
      fail("field '" + name + "[" + std::to_string(i) + "]': expected " + std::to_string(cols) + " entries");
    A.row(i) = r.transpose();
  }
  return A;
}

std::string target_name(AffineEntry::Target t) {
  switch (t) {
    case AffineEntry::Target::A: return "A";
    case AffineEntry::Target::b: return "b";
    case AffineEntry::Target::c: return "c";
  }
  return "c";
}

AffineEntry::Target parse_target(const std::string& s, const std::string& ctx) {
  if (s == "A") return AffineEntry::Target::A;
  if (s == "b") return AffineEntry::Target::b;
  if (s == "c") return AffineEntry::Target::c;
  fail(ctx + ": unknown target '" + s + "'");
}

Json sigma_to_json(const cgp::CutGenParams& s) {
  Json j = Json::object();
  j["pi"] = vec_to_json(s.pi);
  j["eta"] = s.eta;
  j["p"] = cgp::to_string(s.p);
  j["D_diag"] = vec_to_json(s.D_diag);
  if (s.D_dense) j["D_dense"] = mat_to_json(*s.D_dense);
  return j;
}

}  // namespace

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Translate the byte offset into a line/column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("cannot write '" + path + "'");
  out << text;
  if (!out) fail("write failed for '" + path + "'");
}

void write_json_file(const std::string& path, const Json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const Json& j, const std::string& name) {
  if (!j.is_array()) fail("field '" + name + "': expected an array of numbers");
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail("field '" + name + "[" + std::to_string(i) + "]': expected a number");
    v[static_cast<int>(i)] = j[i].get<double>();
  }
  return v;
}

// ---------------------------------------------------------------------------
// Families

Json dataset_to_json(const instgen::Dataset& d) {
  const auto& f = d.family;
  Json doc = Json::object();
  doc["format"] = kFamilyFormat;
  doc["name"] = f.name;
  doc["n"] = f.n();
  doc["m"] = f.m();
  doc["bound_rows"] = f.bound_rows;
  doc["A"] = mat_to_json(f.A);
  doc["b"] = vec_to_json(f.b);
  doc["c"] = vec_to_json(f.c);
  doc["integer_indices"] = f.integer_indices;
  doc["theta_dim"] = f.theta_dim;
  Json map = Json::array();
  for (const auto& e : f.theta_map) {
    Json je = Json::object();
    je["target"] = target_name(e.target);
    je["row"] = e.row;
    if (e.target == AffineEntry::Target::A) je["col"] = e.col;
    je["offset"] = e.offset;
    Json terms = Json::array();
    for (const auto& [k, coeff] : e.terms) terms.push_back(Json::array({k, coeff}));
    je["terms"] = std::move(terms);
    map.push_back(std::move(je));
  }
  doc["theta_map"] = std::move(map);
  Json samples = Json::array();
  for (auto split : {instgen::SplitName::train, instgen::SplitName::validation, instgen::SplitName::test})
    for (const auto& s : d.split(split)) {
      Json js = Json::object();
      js["split"] = instgen::to_string(split);
      js["theta"] = vec_to_json(s.theta);
      js["z_star"] = s.z_star ? Json(*s.z_star) : Json(nullptr);
      samples.push_back(std::move(js));
    }
  doc["theta_samples"] = std::move(samples);
  doc["seed"] = d.seed;
  return doc;
}

instgen::Dataset dataset_from_json(const Json& doc) {
  expect_format(doc, kFamilyFormat);
  const std::string ctx = "family";
  instgen::Dataset d;
  auto& f = d.family;
  f.name = get_or<std::string>(doc, "name", ctx, "family");
  const int n = get<int>(doc, "n", ctx), m = get<int>(doc, "m", ctx);
  if (n < 1 || m < 1) fail("family: n and m must be positive");
  f.A = mat_from_json(field(doc, "A", ctx), m, n, "A");
  f.b = vec_from_json(field(doc, "b", ctx), "b");
  f.c = vec_from_json(field(doc, "c", ctx), "c");
  if (f.b.size() != m) fail("field 'b': expected " + std::to_string(m) + " entries");
  if (f.c.size() != n) fail("field 'c': expected " + std::to_string(n) + " entries");
  f.integer_indices = get<std::vector<int>>(doc, "integer_indices", ctx);
  f.bound_rows = get_or<int>(doc, "bound_rows", ctx, 0);
  f.theta_dim = get_or<int>(doc, "theta_dim", ctx, 0);
  const Json& map = doc.contains("theta_map") ? doc["theta_map"] : Json::array();
  if (!map.is_array()) fail("field 'theta_map': expected an array");
  for (std::size_t i = 0; i < map.size(); ++i) {
    const std::string ectx = "theta_map[" + std::to_string(i) + "]";
    const Json& je = map[i];
    AffineEntry e;
    e.target = parse_target(get<std::string>(je, "target", ectx), ectx);
    e.row = get<int>(je, "row", ectx);
    e.col = get_or<int>(je, "col", ectx, 0);
    e.offset = get_or<double>(je, "offset", ectx, 0.0);
    const Json& terms = field(je, "terms", ectx);
    if (!terms.is_array()) fail(ectx + ": field 'terms' must be an array");
    for (const auto& t : terms) {
      if (!t.is_array() || t.size() != 2 || !t[0].is_number_integer() || !t[1].is_number())
        fail(ectx + ": each term must be [theta_index, coefficient]");
      e.terms.emplace_back(t[0].get<int>(), t[1].get<double>());
    }
    f.theta_map.push_back(std::move(e));
  }
  f.validate();
  d.seed = get_or<std::uint64_t>(doc, "seed", ctx, 0);
  const Json& samples = doc.contains("theta_samples") ? doc["theta_samples"] : Json::array();
  if (!samples.is_array()) fail("field 'theta_samples': expected an array");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string sctx = "theta_samples[" + std::to_string(i) + "]";
    instgen::Sample s;
    s.theta = vec_from_json(field(samples[i], "theta", sctx), sctx + ".theta");
    if (s.theta.size() != f.theta_dim)
      fail(sctx + ": theta has " + std::to_string(s.theta.size()) + " entries, expected " +
           std::to_string(f.theta_dim));
    if (samples[i].contains("z_star") && !samples[i]["z_star"].is_null())
      s.z_star = get<double>(samples[i], "z_star", sctx);
    instgen::SplitName split = instgen::SplitName::train;
    try {
      split = instgen::parse_split(get_or<std::string>(samples[i], "split", sctx, "train"));
    } catch (const InvalidInput& e) {
      fail(sctx + ": " + e.what());
    }
    d.split(split).push_back(std::move(s));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Configs

Json run_config_to_json(const engine::RunConfig& c) {
  Json j = Json::object();
  j["R"] = c.R;
  j["K"] = c.K;
  j["p"] = cgp::to_string(c.p);
  j["gamma"] = c.gamma;
  j["eps_cut"] = c.eps_cut;
  j["M"] = c.M;
  j["strengthen"] = c.strengthen;
  j["mode"] = c.mode == engine::RunMode::policy ? "policy" : "baseline";
  j["solver_tol"] = c.solver_tol;
  return j;
}

engine::RunConfig run_config_from_json(const Json& j) {
  const std::string ctx = "run_config";
  engine::RunConfig c;
  c.R = get<int>(j, "R", ctx);
  c.K = get<int>(j, "K", ctx);
  c.p = cgp::parse_norm(get<std::string>(j, "p", ctx));
  c.gamma = get<double>(j, "gamma", ctx);
  c.eps_cut = get<double>(j, "eps_cut", ctx);
  c.M = get<int>(j, "M", ctx);
  c.strengthen = get<bool>(j, "strengthen", ctx);
  const auto mode = get<std::string>(j, "mode", ctx);
  if (mode != "policy" && mode != "baseline") fail(ctx + ": unknown mode '" + mode + "'");
  c.mode = mode == "policy" ? engine::RunMode::policy : engine::RunMode::baseline;
  c.solver_tol = get<double>(j, "solver_tol", ctx);
  c.validate();
  return c;
}

Json train_config_to_json(const train::TrainConfig& c) {
  Json j = Json::object();
  j["learning_rate"] = c.learning_rate;
  j["momentum"] = c.momentum;
  j["decay"] = c.decay;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  return j;
}

train::TrainConfig train_config_from_json(const Json& j) {
  const std::string ctx = "train_config";
  train::TrainConfig c;
  c.learning_rate = get<double>(j, "learning_rate", ctx);
  c.momentum = get<double>(j, "momentum", ctx);
  c.decay = get<double>(j, "decay", ctx);
  c.batch_size = get<int>(j, "batch_size", ctx);
  c.max_epochs = get<int>(j, "max_epochs", ctx);
  c.patience = get<int>(j, "patience", ctx);
  c.seed = get<std::uint64_t>(j, "seed", ctx);
  c.jobs = get_or<int>(j, "jobs", ctx, 1);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string encode_doubles(const Vec& values) {
  std::vector<unsigned char> bytes(static_cast<std::size_t>(values.size()) * 8);
  for (int i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int k = 0; k < 8; ++k)
      bytes[static_cast<std::size_t>(i) * 8 + static_cast<std::size_t>(k)] =
          static_cast<unsigned char>((bits >> (8 * k)) & 0xffu);
  }
  const std::size_t len = sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  std::string out(len, '\0');
  sodium_bin2base64(out.data(), len, bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(len - 1);  // drop the terminator
  return out;
}

Vec decode_doubles(const std::string& text) {
  std::vector<unsigned char> bytes(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(bytes.data(), bytes.size(), text.data(), text.size(), nullptr, &len, &end,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != text.data() + text.size())
    fail("weights: malformed base64");
  if (len % 8 != 0) fail("weights: byte count is not a multiple of 8");
  Vec v(static_cast<int>(len / 8));
  for (int i = 0; i < v.size(); ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k)
      bits |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(i) * 8 + static_cast<std::size_t>(k)])
              << (8 * k);
    v[i] = std::bit_cast<double>(bits);
  }
  return v;
}

Json checkpoint_to_json(const Checkpoint& ck) {
  const auto& P = ck.params;
  Json doc = Json::object();
  doc["format"] = kCheckpointFormat;
  doc["mode"] = policy::to_string(P.mode);
  Json sizes = Json::object();
  sizes["n"] = P.sizes.n;
  sizes["m"] = P.sizes.m;
  sizes["R"] = P.sizes.R;
  sizes["K"] = P.sizes.K;
  sizes["hidden"] = P.sizes.hidden;
  sizes["M"] = P.sizes.M;
  doc["sizes"] = std::move(sizes);
  doc["num_params"] = P.num_params();
  doc["weights"] = encode_doubles(P.flatten());
  Json cells = Json::array();
  for (const auto& round : P.table) {
    Json r = Json::array();
    for (const auto& cell : round) {
      Json jc = Json::object();
      jc["pi"] = cell.pi ? vec_to_json(*cell.pi) : Json(nullptr);
      jc["eta"] = cell.eta ? Json(*cell.eta) : Json(nullptr);
      r.push_back(std::move(jc));
    }
    cells.push_back(std::move(r));
  }
  doc["static_cells"] = std::move(cells);
  doc["run_config"] = run_config_to_json(ck.run_config);
  doc["extra"] = ck.extra;
  return doc;
}

Checkpoint checkpoint_from_json(const Json& doc) {
  expect_format(doc, kCheckpointFormat);
  const std::string ctx = "checkpoint";
  Checkpoint ck;
  policy::Mode mode;
  try {
    mode = policy::parse_mode(get<std::string>(doc, "mode", ctx));
  } catch (const InvalidInput& e) {
    fail(ctx + ": " + e.what());
  }
  const Json& js = field(doc, "sizes", ctx);
  policy::Sizes s;
  s.n = get<int>(js, "n", "sizes");
  s.m = get<int>(js, "m", "sizes");
  s.R = get<int>(js, "R", "sizes");
  s.K = get<int>(js, "K", "sizes");
  s.hidden = get<int>(js, "hidden", "sizes");
  s.M = get<int>(js, "M", "sizes");
  ck.params = policy::init_params(0, s, mode);
  const Vec w = decode_doubles(get<std::string>(doc, "weights", ctx));
  if (w.size() != ck.params.num_params() || get<int>(doc, "num_params", ctx) != w.size())
    fail(ctx + ": weights hold " + std::to_string(w.size()) + " values, sizes imply " +
         std::to_string(ck.params.num_params()));
  ck.params.unflatten(w);
  if (mode == policy::Mode::static_table) {
    const Json& cells = field(doc, "static_cells", ctx);
    if (!cells.is_array() || cells.size() != ck.params.table.size())
      fail(ctx + ": static_cells must have one entry per round");
    for (std::size_t r = 0; r < cells.size(); ++r) {
      if (!cells[r].is_array() || cells[r].size() != ck.params.table[r].size())
        fail(ctx + ": static_cells[" + std::to_string(r) + "] must have one entry per head");
      for (std::size_t k = 0; k < cells[r].size(); ++k) {
        const std::string cctx = "static_cells[" + std::to_string(r) + "][" + std::to_string(k) + "]";
        const Json& jc = cells[r][k];
        auto& cell = ck.params.table[r][k];
        if (jc.contains("pi") && !jc["pi"].is_null()) {
          cell.pi = vec_from_json(jc["pi"], cctx + ".pi");
          if (cell.pi->size() != s.n) fail(cctx + ": pi must have n entries");
        }
        if (jc.contains("eta") && !jc["eta"].is_null()) cell.eta = get<double>(jc, "eta", cctx);
      }
    }
  }
  ck.run_config = run_config_from_json(field(doc, "run_config", ctx));
  if (doc.contains("extra")) ck.extra = doc["extra"];
  return ck;
}

// ---------------------------------------------------------------------------
// Trajectories

Json trajectory_to_json(const engine::Trajectory& t) {
  Json doc = Json::object();
  doc["format"] = kTrajectoryFormat;
  doc["config"] = run_config_to_json(t.config);
  Json states = Json::array();
  for (const auto& s : t.states) {
    Json js = Json::object();
    js["round"] = s.round;
    js["objective"] = s.objective;
    js["candidate"] = vec_to_json(s.candidate);
    states.push_back(std::move(js));
  }
  doc["states"] = std::move(states);
  doc["state_source"] = t.state_source;
  Json cuts = Json::array();
  for (const auto& c : t.cuts) {
    const Cut& pc = t.pool[c.pool_index];
    Json jc = Json::object();
    jc["round"] = c.round;
    jc["head"] = c.head;
    jc["pool_index"] = c.pool_index;
    jc["g"] = vec_to_json(pc.g);
    jc["h"] = pc.h;
    jc["violation"] = pc.violation_at_birth;
    jc["sigma"] = sigma_to_json(c.problem.params);
    jc["shift"] = c.shift;
    cuts.push_back(std::move(jc));
  }
  doc["cuts"] = std::move(cuts);
  Json rounds = Json::array();
  for (const auto& r : t.rounds) {
    Json jr = Json::object();
    jr["round"] = r.round;
    jr["accepted"] = r.accepted;
    jr["no_cut"] = r.no_cut;
    jr["duplicates"] = r.duplicates;
    Json sig = Json::array();
    for (const auto& s : r.sigma) sig.push_back(s ? sigma_to_json(*s) : Json(nullptr));
    jr["sigma"] = std::move(sig);
    rounds.push_back(std::move(jr));
  }
  doc["rounds"] = std::move(rounds);
  doc["loss"] = t.loss;
  Json diag = Json::object();
  diag["no_cut"] = t.diag.no_cut;
  diag["duplicates"] = t.diag.duplicates;
  diag["reduced_accuracy"] = t.diag.reduced_accuracy;
  diag["early_exit_round"] = t.diag.early_exit_round;
  diag["regularized_backward"] = t.diag.regularized_backward;
  doc["diagnostics"] = std::move(diag);
  return doc;
}

}  // namespace cplopt::io
