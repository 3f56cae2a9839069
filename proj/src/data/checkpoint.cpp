// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/data/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "gemo/errors.hpp"

namespace gemo::data {

nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  nlohmann::json j;
  j["version"] = c.version;
  j["config"] = c.config;
  j["epoch"] = c.epoch;
  j["extra"] = c.extra;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : c.params) {
    params[name] = {{"shape", t.shape()}, {"data", t.values()}};
  }
  j["params"] = std::move(params);
  nlohmann::json moments = nlohmann::json::object();
  for (const auto& [name, m] : c.adam.moments) moments[name] = {{"m", m.m}, {"v", m.v}};
  j["adam_state"] = {{"t", c.adam.t}, {"moments", std::move(moments)}};
  j["sim_stats"] = {{"mean", c.sim_stats.mean},
                    {"std", c.sim_stats.std},
                    {"momentum", c.sim_stats.momentum},
                    {"count", c.sim_stats.count}};
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  Checkpoint c;
  try {
    c.version = j.at("version").get<int>();
    if (c.version != kCheckpointVersion) {
      throw VersionError("checkpoint version " + std::to_string(c.version) + " is not supported (expected " +
                         std::to_string(kCheckpointVersion) + ")");
    }
    c.config = j.at("config");
    c.epoch = j.at("epoch").get<std::size_t>();
    if (j.contains("extra")) c.extra = j.at("extra");
    for (const auto& [name, p] : j.at("params").items()) {
      ad::Shape shape = p.at("shape").get<ad::Shape>();
      std::vector<double> data = p.at("data").get<std::vector<double>>();
      c.params.emplace_back(name, ad::Tensor<double>(std::move(shape), std::move(data)));
    }
    const auto& adam = j.at("adam_state");
    c.adam.t = adam.at("t").get<std::uint64_t>();
    for (const auto& [name, m] : adam.at("moments").items()) {
      c.adam.moments[name] = {m.at("m").get<std::vector<double>>(), m.at("v").get<std::vector<double>>()};
    }
    const auto& s = j.at("sim_stats");
    c.sim_stats.mean = s.at("mean").get<double>();
    c.sim_stats.std = s.at("std").get<double>();
    c.sim_stats.momentum = s.at("momentum").get<double>();
    c.sim_stats.count = s.at("count").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const DimensionError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(c).dump() << "\n";
  if (!out) throw IoError("write failed for checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("checkpoint '" + path + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace gemo::data
