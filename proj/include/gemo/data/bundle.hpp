// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gemo/autodiff/tensor.hpp"

namespace gemo::data {

using ad::Tensor;

// JSON flavour whose numbers are parsed and printed as 32-bit floats, so a
// written feature reads back bit-exact.
using FloatJson = nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t,
                                       std::uint64_t, float>;

/// One image's precomputed cues. Label 0 positive, 1 neutral, 2 negative.
struct FeatureBundle {
  std::string id;
  int label = 0;
  Tensor<float> faces;    // I×D
  Tensor<float> objects;  // J×D, J may be 0
  Tensor<float> scenes;   // K×D

  std::size_t dim() const { return faces.cols(); }
  bool operator==(const FeatureBundle&) const = default;
};

struct BundleExpectations {
  std::size_t dim = 0;     // 0 accepts any width
  std::size_t scales = 0;  // 0 accepts any K
};

// ValidationError on I = 0, wrong widths or K, bad label, non-finite values.
void validate_bundle(const FeatureBundle& b, const BundleExpectations& expect = {});

FeatureBundle bundle_from_json(const FloatJson& j);
FloatJson bundle_to_json(const FeatureBundle& b);

// Canonical JSON form; ".bin" selects the packed little-endian variant.
void save_bundle(const FeatureBundle& b, const std::string& path);
FeatureBundle load_bundle(const std::string& path, const BundleExpectations& expect = {});

}  // namespace gemo::data
