// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gemo/config.hpp"
#include "gemo/data/bundle.hpp"
#include "gemo/data/checkpoint.hpp"
#include "gemo/harness/metrics.hpp"
#include "gemo/harness/model.hpp"
#include "gemo/model/lexicon.hpp"

namespace gemo::harness {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  obj::LossReport losses;  // mean over the epoch's steps
  double train_acc = 0.0;
  std::size_t steps = 0;
  std::optional<double> val_acc;
  std::optional<double> val_loss;
};

nlohmann::json to_json(const EpochLog& e);

struct TrainOptions {
  // Continue from this state (takes precedence over resume_path).
  const data::Checkpoint* resume_state = nullptr;
  std::string resume_path;
  // Stop once this many epochs are complete; 0 runs to cfg.epochs.
  std::size_t stop_after_epoch = 0;
  // Write last.json, best.json, train_log.jsonl and config.json under cfg.out.
  bool write_files = true;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::vector<obj::LossReport> steps;
  std::uint64_t optimizer_steps = 0;
  double max_identity_error = 0.0;  // |l_total - Σ components| over all steps
  data::Checkpoint last;            // state after the final epoch
  std::optional<data::Checkpoint> best;  // best by validation accuracy, then lower loss
};

TrainResult train_on(const RunConfig& cfg, const model::LexiconSet& lexicons,
                     const std::vector<data::FeatureBundle>& train_set,
                     const std::vector<data::FeatureBundle>& val_set, const TrainOptions& opts = {});

// Loads lexicons and the train/val splits named by cfg, then trains.
TrainResult train(const RunConfig& cfg, const TrainOptions& opts = {});

template <typename T>
Metrics evaluate(GroupEmotionModel<T>& model, const std::vector<data::FeatureBundle>& samples,
                 std::size_t batch_size);

// Rebuilds the model recorded in a checkpoint and evaluates it.
Metrics evaluate_state(const data::Checkpoint& ckpt, const std::vector<data::FeatureBundle>& samples,
                       std::size_t batch_size);

// Config stored in a checkpoint, and the lexicons embedded next to it.
RunConfig checkpoint_config(const data::Checkpoint& ckpt);
model::LexiconSet checkpoint_lexicons(const data::Checkpoint& ckpt);

struct AblationRow {
  Variant variant;
  std::string label;
  Metrics metrics;
  std::size_t epochs = 0;
};

// Trains and evaluates every variant with cfg's seed and data; metrics come
// from each variant's best checkpoint on `eval_split`.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::string& eval_split = "test",
                                      bool write_files = true);

std::vector<AblationRow> run_ablation_on(const RunConfig& cfg, const model::LexiconSet& lexicons,
                                         const std::vector<data::FeatureBundle>& train_set,
                                         const std::vector<data::FeatureBundle>& val_set,
                                         const std::vector<data::FeatureBundle>& eval_set,
                                         bool write_files = true);

// variant,pos,neu,neg,overall with accuracies in percent.
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace gemo::harness
