// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

namespace gemo {

// Ablation wirings, from the cue-only baseline to the full model.
enum class Variant { kB1, kB2NoCam, kB2, kB3, kB4NoSam, kB4NoSff, kB4 };

inline constexpr std::array<Variant, 7> kAllVariants = {
    Variant::kB1,     Variant::kB2NoCam,  Variant::kB2,  Variant::kB3,
    Variant::kB4NoSam, Variant::kB4NoSff, Variant::kB4};

std::string_view variant_name(Variant v);         // "B4_noSAM"
std::string_view variant_table_label(Variant v);  // "B4 w/o L_SAM"
Variant parse_variant(std::string_view text);     // ConfigError when unknown

enum class Precision { kF32, kF64 };
enum class GateMode { kPerRow, kPerScale };
enum class ClassPool { kSum, kConcat };

/// Every knob of a run. Field names double as JSON keys and, with
/// underscores turned into hyphens, as command-line flags.
struct RunConfig {
  // architecture
  std::size_t hidden = 512;
  std::size_t heads = 8;
  std::size_t depth = 4;    // fusion encoder blocks (visual and group)
  std::size_t scales = 4;   // K
  std::size_t d_e = 50;     // lexicon embedding width
  std::size_t d_h = 0;      // GCN width; 0 means "same as d_e"
  double dropout = 0.1;
  std::string gate_mode = "per_row";  // or per_scale
  std::string class_pool = "sum";     // or concat
  double sim_momentum = 0.9;

  // objective
  double tau = 0.02;
  double sam_eps = 1e-8;
  bool sam_alpha_literal = false;

  // optimization
  double lr = 1e-3;
  double lr_decay = 0.9;
  std::string lr_decay_unit = "epoch";  // or iteration
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 4;
  std::size_t epochs = 30;
  std::uint64_t seed = 7;
  std::string variant = "B4";
  std::string precision = "f32";

  // paths
  std::string data = "data/manifest.json";
  std::string lexicons = "assets/lexicons/default.json";
  std::string out = "runs";

  std::size_t gcn_width() const { return d_h == 0 ? d_e : d_h; }
  Variant variant_kind() const { return parse_variant(variant); }
  Precision precision_kind() const;
  GateMode gate_kind() const;
  ClassPool pool_kind() const;

  // Throws ConfigError naming the first offending field.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);

// Applies the keys present in `j` on top of `base`; unknown keys and
// mistyped values are ConfigErrors.
RunConfig merge_json(RunConfig base, const nlohmann::json& j);

RunConfig load_config(const std::string& path);

}  // namespace gemo
