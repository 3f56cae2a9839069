// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gemo/autodiff/tensor.hpp"
#include "gemo/model/vsim.hpp"
#include "gemo/nn/adam.hpp"

namespace gemo::data {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int version = kCheckpointVersion;
  nlohmann::json config;
  // Parameter values widened to double; f32 values survive the round trip.
  std::vector<std::pair<std::string, ad::Tensor<double>>> params;
  nn::AdamState adam;
  model::SimStats sim_stats;
  std::size_t epoch = 0;  // completed epochs
  nlohmann::json extra = nlohmann::json::object();  // harness bookkeeping
};

nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);  // VersionError on mismatch

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gemo::data
