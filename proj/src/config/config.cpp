// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/config.hpp"

#include <fstream>

#include "gemo/errors.hpp"

namespace gemo {

namespace {

struct VariantInfo {
  Variant kind;
  std::string_view name;
  std::string_view label;
};

constexpr std::array<VariantInfo, 7> kVariantInfo = {{
    {Variant::kB1, "B1", "B1"},
    {Variant::kB2NoCam, "B2_noCAM", "B2 w/o CAM"},
    {Variant::kB2, "B2", "B2"},
    {Variant::kB3, "B3", "B3"},
    {Variant::kB4NoSam, "B4_noSAM", "B4 w/o L_SAM"},
    {Variant::kB4NoSff, "B4_noSFF", "B4 w/o SFF"},
    {Variant::kB4, "B4", "B4 (ours)"},
}};

const VariantInfo& info(Variant v) {
  for (const auto& i : kVariantInfo)
    if (i.kind == v) return i;
  throw ContractError("unknown variant enum value");
}

template <typename F>
void read_field(const nlohmann::json& j, const char* key, F& field) {
  try {
    field = j.at(key).get<F>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string_view variant_name(Variant v) { return info(v).name; }
std::string_view variant_table_label(Variant v) { return info(v).label; }

Variant parse_variant(std::string_view text) {
  for (const auto& i : kVariantInfo)
    if (i.name == text) return i.kind;
  throw ConfigError("variant: unknown value '" + std::string(text) +
                    "' (expected B1, B2_noCAM, B2, B3, B4_noSAM, B4_noSFF or B4)");
}

Precision RunConfig::precision_kind() const {
  if (precision == "f32") return Precision::kF32;
  if (precision == "f64") return Precision::kF64;
  throw ConfigError("precision: expected f32 or f64, got '" + precision + "'");
}

GateMode RunConfig::gate_kind() const {
  if (gate_mode == "per_row") return GateMode::kPerRow;
  if (gate_mode == "per_scale") return GateMode::kPerScale;
  throw ConfigError("gate_mode: expected per_row or per_scale, got '" + gate_mode + "'");
}

ClassPool RunConfig::pool_kind() const {
  if (class_pool == "sum") return ClassPool::kSum;
  if (class_pool == "concat") return ClassPool::kConcat;
  throw ConfigError("class_pool: expected sum or concat, got '" + class_pool + "'");
}

void RunConfig::validate() const {
  auto positive = [](const char* name, auto v) {
    if (!(v > 0)) throw ConfigError(std::string(name) + ": must be positive");
  };
  positive("hidden", hidden);
  positive("heads", heads);
  positive("depth", depth);
  positive("scales", scales);
  positive("d_e", d_e);
  positive("tau", tau);
  positive("sam_eps", sam_eps);
  positive("lr", lr);
  positive("lr_decay", lr_decay);
  positive("adam_eps", adam_eps);
  positive("batch_size", batch_size);
  positive("epochs", epochs);
  if (hidden % heads != 0) {
    throw ConfigError("heads: " + std::to_string(heads) + " does not divide hidden size " +
                      std::to_string(hidden));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout: must lie in [0, 1)");
  if (!(sim_momentum >= 0.0 && sim_momentum < 1.0)) throw ConfigError("sim_momentum: must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1: must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2: must lie in [0, 1)");
  if (lr_decay_unit != "epoch" && lr_decay_unit != "iteration") {
    throw ConfigError("lr_decay_unit: expected epoch or iteration, got '" + lr_decay_unit + "'");
  }
  (void)variant_kind();
  (void)precision_kind();
  (void)gate_kind();
  (void)pool_kind();
}

nlohmann::json to_json(const RunConfig& c) {
  return nlohmann::json{
      {"hidden", c.hidden},         {"heads", c.heads},
      {"depth", c.depth},           {"scales", c.scales},
      {"d_e", c.d_e},               {"d_h", c.d_h},
      {"dropout", c.dropout},       {"gate_mode", c.gate_mode},
      {"class_pool", c.class_pool}, {"sim_momentum", c.sim_momentum},
      {"tau", c.tau},               {"sam_eps", c.sam_eps},
      {"sam_alpha_literal", c.sam_alpha_literal},
      {"lr", c.lr},                 {"lr_decay", c.lr_decay},
      {"lr_decay_unit", c.lr_decay_unit},
      {"beta1", c.beta1},           {"beta2", c.beta2},
      {"adam_eps", c.adam_eps},     {"batch_size", c.batch_size},
      {"epochs", c.epochs},         {"seed", c.seed},
      {"variant", c.variant},       {"precision", c.precision},
      {"data", c.data},             {"lexicons", c.lexicons},
      {"out", c.out},
  };
}

RunConfig merge_json(RunConfig c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  const nlohmann::json known = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("config: unknown field '" + key + "'");
    (void)value;
  }
#define GEMO_READ(name) \
  if (j.contains(#name)) read_field(j, #name, c.name)
  GEMO_READ(hidden);
  GEMO_READ(heads);
  GEMO_READ(depth);
  GEMO_READ(scales);
  GEMO_READ(d_e);
  GEMO_READ(d_h);
  GEMO_READ(dropout);
  GEMO_READ(gate_mode);
  GEMO_READ(class_pool);
  GEMO_READ(sim_momentum);
  GEMO_READ(tau);
  GEMO_READ(sam_eps);
  GEMO_READ(sam_alpha_literal);
  GEMO_READ(lr);
  GEMO_READ(lr_decay);
  GEMO_READ(lr_decay_unit);
  GEMO_READ(beta1);
  GEMO_READ(beta2);
  GEMO_READ(adam_eps);
  GEMO_READ(batch_size);
  GEMO_READ(epochs);
  GEMO_READ(seed);
  GEMO_READ(variant);
  GEMO_READ(precision);
  GEMO_READ(data);
  GEMO_READ(lexicons);
  GEMO_READ(out);
#undef GEMO_READ
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return merge_json(RunConfig{}, j);
}

}  // namespace gemo
