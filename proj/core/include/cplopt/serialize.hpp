// Copyright 2026 The cplopt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <string>

#include "cplopt/engine.hpp"
#include "cplopt/instgen.hpp"
#include "cplopt/policy.hpp"
#include "cplopt/train.hpp"

// JSON interchange. Every reader throws InvalidInput naming the offending field
// (and the line/column for syntax errors).
namespace cplopt::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kFamilyFormat = "cplopt-family-v1";
inline constexpr const char* kCheckpointFormat = "cplopt-ckpt-v1";
inline constexpr const char* kTrajectoryFormat = "cplopt-traj-v1";

Json read_json_file(const std::string& path);
/// Pretty-printed with a trailing newline; creates parent directories.
void write_json_file(const std::string& path, const Json& doc);
void write_text_file(const std::string& path, const std::string& text);

/// cplopt-family-v1: {format, name, n, m, bound_rows, A (dense row-major), b, c,
/// integer_indices, theta_dim, theta_map, theta_samples [{split, theta, z_star?}], seed}.
Json dataset_to_json(const instgen::Dataset& dataset);
instgen::Dataset dataset_from_json(const Json& doc);

Json run_config_to_json(const engine::RunConfig& config);
engine::RunConfig run_config_from_json(const Json& doc);
Json train_config_to_json(const train::TrainConfig& config);
train::TrainConfig train_config_from_json(const Json& doc);

/// Little-endian IEEE-754 doubles, standard base64 alphabet with padding.
std::string encode_doubles(const Vec& values);
Vec decode_doubles(const std::string& text);

struct Checkpoint {
  policy::PolicyParams params;
  engine::RunConfig run_config;
  Json extra = Json::object();  // free-form echo (training config, epoch, ...)
};

/// cplopt-ckpt-v1: {format, mode, sizes, num_params, weights (base64), static_cells,
/// run_config, extra}. static_cells holds the non-trainable pi/eta of static tables.
Json checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const Json& doc);

/// cplopt-traj-v1: config, states, cuts with their sigma, per-round counters, loss
/// and diagnostics.
Json trajectory_to_json(const engine::Trajectory& trajectory);

Json vec_to_json(const Vec& v);
Vec vec_from_json(const Json& j, const std::string& field);

}  // namespace cplopt::io
