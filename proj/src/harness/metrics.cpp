// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/harness/metrics.hpp"

#include "gemo/errors.hpp"

namespace gemo::harness {

void Metrics::add(int truth, std::size_t predicted) {
  if (truth < 0 || truth > 2 || predicted > 2) throw ContractError("metrics: class index outside {0,1,2}");
  ++confusion[static_cast<std::size_t>(truth)][predicted];
  ++count;
}

std::size_t Metrics::correct() const { return confusion[0][0] + confusion[1][1] + confusion[2][2]; }

void Metrics::finalize() {
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t row = confusion[c][0] + confusion[c][1] + confusion[c][2];
    per_class_accuracy[c] = row ? static_cast<double>(confusion[c][c]) / static_cast<double>(row) : 0.0;
  }
  overall_accuracy = count ? static_cast<double>(correct()) / static_cast<double>(count) : 0.0;
}

Metrics metrics_from_predictions(const std::vector<int>& truth, const std::vector<std::size_t>& predicted) {
  if (truth.size() != predicted.size()) throw DimensionError("metrics: prediction count mismatch");
  Metrics m;
  for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], predicted[i]);
  m.finalize();
  return m;
}

nlohmann::json to_json(const obj::LossReport& r) {
  return {{"l_group", r.l_group}, {"l_s", r.l_s},     {"l_f", r.l_f},
          {"l_o", r.l_o},         {"l_sam", r.l_sam}, {"l_total", r.l_total}};
}

nlohmann::json to_json(const Metrics& m) {
  nlohmann::json confusion = nlohmann::json::array();
  for (const auto& row : m.confusion) confusion.push_back(row);
  return {{"confusion", confusion},
          {"classes", {"positive", "neutral", "negative"}},
          {"per_class_accuracy", m.per_class_accuracy},
          {"overall_accuracy", m.overall_accuracy},
          {"count", m.count},
          {"losses", to_json(m.losses)}};
}

}  // namespace gemo::harness
