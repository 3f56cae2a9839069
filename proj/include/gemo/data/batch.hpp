// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gemo/data/bundle.hpp"

namespace gemo::data {

using ad::RowMask;

/// N samples with faces/objects zero-padded to the batch maxima.
template <typename T>
struct Batch {
  std::size_t size = 0;
  std::size_t max_faces = 0;
  std::size_t max_objects = 0;
  std::size_t scales = 0;
  std::size_t dim = 0;
  Tensor<T> faces;    // N×I_max×D
  Tensor<T> objects;  // N×J_max×D
  Tensor<T> scenes;   // N×K×D
  std::vector<RowMask> face_mask;
  std::vector<RowMask> object_mask;
  std::vector<int> labels;
  std::vector<std::size_t> face_counts;
  std::vector<std::size_t> object_counts;
  std::vector<std::string> ids;

  // Rank-2 slices for sample n.
  Tensor<T> sample_faces(std::size_t n) const;
  Tensor<T> sample_objects(std::size_t n) const;
  Tensor<T> sample_scenes(std::size_t n) const;
};

// ContractError on an empty list, more than max_batch bundles (0 = no
// limit) or mixed widths / scale counts.
template <typename T>
Batch<T> collate(const std::vector<const FeatureBundle*>& bundles, std::size_t max_batch = 0);

template <typename T>
Batch<T> collate(const std::vector<FeatureBundle>& bundles, std::size_t max_batch = 0);

}  // namespace gemo::data
