// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <json.hpp>

#include "gemo/objectives.hpp"

namespace gemo::harness {

struct Metrics {
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [true][predicted]
  std::array<double, 3> per_class_accuracy{};  // 0 for a class with no samples
  double overall_accuracy = 0.0;
  std::size_t count = 0;
  obj::LossReport losses;  // sample-weighted means

  void add(int truth, std::size_t predicted);
  // Recomputes the accuracies from the confusion matrix.
  void finalize();
  std::size_t correct() const;
};

Metrics metrics_from_predictions(const std::vector<int>& truth, const std::vector<std::size_t>& predicted);

nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const obj::LossReport& r);

}  // namespace gemo::harness
