// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gemo/data/bundle.hpp"

namespace gemo::data {

struct SyntheticSpec {
  std::size_t train = 300;
  std::size_t val = 60;
  std::size_t test = 90;
  std::size_t dim = 512;
  std::size_t scales = 4;
  std::size_t min_faces = 1;
  std::size_t max_faces = 4;
  std::size_t min_objects = 0;
  std::size_t max_objects = 3;
  double margin = 5.0;
  double noise = 0.1;
  std::uint64_t seed = 7;
  std::string format = "json";  // or bin

  void validate() const;
};

/// Split name → bundle paths (resolved against the manifest's directory).
struct Manifest {
  std::string root;
  std::map<std::string, std::vector<std::string>> splits;

  std::size_t total() const;
  const std::vector<std::string>& split(const std::string& name) const;  // IoError when absent
};

// Class anchors: unit Gaussian directions scaled by the margin, one per class.
std::vector<std::vector<double>> class_anchors(const SyntheticSpec& spec);

// The in-memory samples of one split, labels cycling 0,1,2.
std::vector<FeatureBundle> synthesize_split(const SyntheticSpec& spec, const std::string& split,
                                            std::size_t count);

// Writes <out>/<split>/<id>.<ext> for every sample and <out>/manifest.json.
Manifest generate_synthetic_dataset(const SyntheticSpec& spec, const std::string& out_dir);

Manifest load_manifest(const std::string& path);

std::vector<FeatureBundle> load_split(const Manifest& m, const std::string& split,
                                      const BundleExpectations& expect = {});

}  // namespace gemo::data
