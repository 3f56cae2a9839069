// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gemo/autodiff/grad_check.hpp"
#include "gemo/config.hpp"
#include "gemo/model/lexicon.hpp"

namespace gemo::harness {

// The tiny double-precision setup every suite runs on: hidden 6, two heads,
// d_e 5, d_h 6, two faces/objects/scales per sample, dropout off.
RunConfig micro_config();
model::LexiconSet micro_lexicons(std::size_t dim = 5);

struct GradCase {
  std::string suite;
  std::string name;
  ad::GradCheckResult result;
};

struct GradSuiteReport {
  std::vector<GradCase> cases;
  double seconds = 0.0;

  bool passed() const;
  const GradCase* worst() const;  // highest relative error, nullptr when empty
};

// primitives, nn, vcem, esem, vsim, objectives, model
const std::vector<std::string>& grad_suite_names();

// Runs the named suites (all when empty). ConfigError on an unknown name.
GradSuiteReport run_grad_suite(const std::vector<std::string>& suites = {}, std::uint64_t seed = 7,
                               double tolerance = 1e-4);

}  // namespace gemo::harness
