// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/harness/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "gemo/data/batch.hpp"
#include "gemo/data/lexicon_io.hpp"
#include "gemo/data/synthetic.hpp"
#include "gemo/errors.hpp"
#include "gemo/nn/adam.hpp"
#include "gemo/rng.hpp"

namespace gemo::harness {

namespace fs = std::filesystem;

nlohmann::json to_json(const EpochLog& e) {
  nlohmann::json j{{"epoch", e.epoch}, {"lr", e.lr}, {"losses", to_json(e.losses)},
                   {"train_acc", e.train_acc}, {"steps", e.steps}};
  if (e.val_acc) j["val_acc"] = *e.val_acc;
  if (e.val_loss) j["val_loss"] = *e.val_loss;
  return j;
}

namespace {

nn::AdamOptions adam_options(const RunConfig& cfg) {
  nn::AdamOptions o;
  o.lr = cfg.lr;
  o.beta1 = cfg.beta1;
  o.beta2 = cfg.beta2;
  o.eps = cfg.adam_eps;
  o.decay = cfg.lr_decay;
  o.decay_unit = cfg.lr_decay_unit == "iteration" ? nn::DecayUnit::kIteration : nn::DecayUnit::kEpoch;
  return o;
}

data::BundleExpectations expectations(const RunConfig& cfg) { return {cfg.hidden, cfg.scales}; }

void add_scaled(obj::LossReport& acc, const obj::LossReport& r, double w) {
  acc.l_group += w * r.l_group;
  acc.l_s += w * r.l_s;
  acc.l_f += w * r.l_f;
  acc.l_o += w * r.l_o;
  acc.l_sam += w * r.l_sam;
  acc.l_total += w * r.l_total;
}

std::string describe(const obj::LossReport& r) {
  std::ostringstream os;
  os << "l_group=" << r.l_group << " l_s=" << r.l_s << " l_f=" << r.l_f << " l_o=" << r.l_o
     << " l_sam=" << r.l_sam << " l_total=" << r.l_total;
  return os.str();
}

bool all_finite(const obj::LossReport& r) {
  return std::isfinite(r.l_group) && std::isfinite(r.l_s) && std::isfinite(r.l_f) && std::isfinite(r.l_o) &&
         std::isfinite(r.l_sam) && std::isfinite(r.l_total);
}

struct BestInfo {
  double acc = -1.0;
  double loss = std::numeric_limits<double>::infinity();
  std::size_t epoch = 0;

  bool improved_by(double a, double l) const { return a > acc || (a == acc && l < loss); }
  nlohmann::json json() const {
    nlohmann::json j{{"acc", acc}, {"epoch", epoch}};
    j["loss"] = std::isfinite(loss) ? nlohmann::json(loss) : nlohmann::json(nullptr);
    return j;
  }
  static BestInfo from(const nlohmann::json& extra) {
    BestInfo b;
    if (!extra.contains("best")) return b;
    const auto& j = extra.at("best");
    b.acc = j.value("acc", -1.0);
    b.epoch = j.value("epoch", std::size_t{0});
    if (j.contains("loss") && j.at("loss").is_number()) b.loss = j.at("loss").get<double>();
    return b;
  }
};

void append_line(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to '" + path.string() + "'");
  out << j.dump() << "\n";
}

template <typename T>
TrainResult train_impl(const RunConfig& cfg, const model::LexiconSet& lexicons,
                       const std::vector<data::FeatureBundle>& train_set,
                       const std::vector<data::FeatureBundle>& val_set, const TrainOptions& opts) {
  if (train_set.empty()) throw ContractError("train: the training split is empty");
  GroupEmotionModel<T> model(cfg, lexicons);
  const nn::AdamOptions adam_opt = adam_options(cfg);
  nn::AdamState adam;
  std::size_t start_epoch = 0;
  BestInfo best;

  std::optional<data::Checkpoint> loaded;
  const data::Checkpoint* resume = opts.resume_state;
  if (!resume && !opts.resume_path.empty()) {
    loaded = data::load_checkpoint(opts.resume_path);
    resume = &*loaded;
  }
  TrainResult result;
  if (resume) {
    model.import_state(*resume);
    adam = resume->adam;
    start_epoch = resume->epoch;
    best = BestInfo::from(resume->extra);
    if (resume->extra.contains("best_state")) {
      result.best = data::checkpoint_from_json(resume->extra.at("best_state"));
    } else if (loaded) {
      const fs::path sibling = fs::path(opts.resume_path).parent_path() / "best.json";
      if (fs::exists(sibling)) result.best = data::load_checkpoint(sibling.string());
    }
  }

  const fs::path out_dir(cfg.out);
  if (opts.write_files) {
    fs::create_directories(out_dir);
    std::ofstream cfg_out(out_dir / "config.json", std::ios::trunc);
    if (!cfg_out) throw IoError("cannot write '" + (out_dir / "config.json").string() + "'");
    cfg_out << to_json(cfg).dump(2) << "\n";
    if (!resume) std::ofstream(out_dir / "train_log.jsonl", std::ios::trunc);
  }

  const std::uint64_t shuffle_stream = mix_seed(cfg.seed, hash_text("shuffle"));
  const std::uint64_t dropout_stream = mix_seed(cfg.seed, hash_text("dropout"));
  const nlohmann::json lexicon_json = data::lexicons_to_json(lexicons);
  std::size_t end_epoch = cfg.epochs;
  if (opts.stop_after_epoch) end_epoch = std::min(end_epoch, opts.stop_after_epoch);

  for (std::size_t epoch = start_epoch; epoch < end_epoch; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(mix_seed(shuffle_stream, epoch));
    shuffle_rng.shuffle(order.begin(), order.end());

    EpochLog log;
    log.epoch = epoch + 1;
    log.lr = nn::scheduled_lr(adam_opt, epoch, adam.t);
    std::size_t correct = 0;

    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
      const std::size_t last = std::min(order.size(), first + cfg.batch_size);
      std::vector<const data::FeatureBundle*> members;
      for (std::size_t i = first; i < last; ++i) members.push_back(&train_set[order[i]]);
      const auto batch = data::collate<T>(members, cfg.batch_size);

      const std::uint64_t step = adam.t;
      const double lr = nn::scheduled_lr(adam_opt, epoch, step);
      Rng dropout_rng(mix_seed(dropout_stream, step));
      model.params().zero_grad();
      Graph<T> g;
      auto fwd = [&] {
        try {
          return model.forward(g, batch, true, &dropout_rng);
        } catch (const DomainError& e) {
          // inputs are validated finite, so this means activations blew up
          throw DivergenceError("epoch " + std::to_string(epoch + 1) + " step " + std::to_string(step + 1) +
                                ": " + e.what());
        }
      }();
      const obj::LossReport& report = fwd.loss.report;
      if (!all_finite(report)) {
        throw DivergenceError("epoch " + std::to_string(epoch + 1) + " step " + std::to_string(step + 1) +
                              ": non-finite loss (" + describe(report) + ")");
      }
      result.max_identity_error =
          std::max(result.max_identity_error, std::abs(report.l_total - report.component_sum()));
      g.backward(fwd.loss.total);
      nn::adam_step(model.params().all(), adam, adam_opt, lr);

      const auto pred = argmax_rows(fwd.group_logits.value());
      for (std::size_t i = 0; i < pred.size(); ++i)
        if (static_cast<int>(pred[i]) == batch.labels[i]) ++correct;
      add_scaled(log.losses, report, 1.0);
      result.steps.push_back(report);
      ++log.steps;
    }
    const double inv = 1.0 / static_cast<double>(log.steps);
    obj::LossReport mean;
    add_scaled(mean, log.losses, inv);
    log.losses = mean;
    log.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());

    // Selection falls back to training accuracy when there is no validation split.
    double sel_acc = log.train_acc, sel_loss = log.losses.l_total;
    if (!val_set.empty()) {
      const Metrics vm = evaluate(model, val_set, cfg.batch_size);
      log.val_acc = vm.overall_accuracy;
      log.val_loss = vm.losses.l_total;
      sel_acc = vm.overall_accuracy;
      sel_loss = vm.losses.l_total;
    }

    data::Checkpoint ckpt;
    ckpt.config = to_json(cfg);
    model.export_state(ckpt);
    ckpt.adam = adam;
    ckpt.epoch = epoch + 1;
    ckpt.extra["lexicons"] = lexicon_json;
    const bool improved = best.improved_by(sel_acc, sel_loss);
    if (improved) best = BestInfo{sel_acc, sel_loss, epoch + 1};
    ckpt.extra["best"] = best.json();
    if (improved) {
      result.best = ckpt;
    }
    // The best snapshot travels inside `last` so that resuming keeps it.
    if (result.best) ckpt.extra["best_state"] = data::checkpoint_to_json(*result.best);

    if (opts.write_files) {
      data::Checkpoint slim = ckpt;
      slim.extra.erase("best_state");
      save_checkpoint(slim, (out_dir / "last.json").string());
      if (improved) save_checkpoint(slim, (out_dir / "best.json").string());
      append_line(out_dir / "train_log.jsonl", to_json(log));
    }
    spdlog::info("epoch {}/{} lr={:.3g} loss={:.4f} train_acc={:.3f}{}", epoch + 1, cfg.epochs, log.lr,
                 log.losses.l_total, log.train_acc,
                 log.val_acc ? fmt::format(" val_acc={:.3f}", *log.val_acc) : std::string());
    result.last = std::move(ckpt);
    result.epochs.push_back(log);
  }
  if (result.epochs.empty() && resume) result.last = *resume;
  result.optimizer_steps = adam.t;
  if (result.best) result.best->extra.erase("best_state");
  return result;
}

}  // namespace

template <typename T>
Metrics evaluate(GroupEmotionModel<T>& model, const std::vector<data::FeatureBundle>& samples,
                 std::size_t batch_size) {
  if (batch_size == 0) throw ContractError("evaluate: batch size must be positive");
  Metrics m;
  obj::LossReport sum;
  for (std::size_t first = 0; first < samples.size(); first += batch_size) {
    const std::size_t last = std::min(samples.size(), first + batch_size);
    std::vector<const data::FeatureBundle*> members;
    for (std::size_t i = first; i < last; ++i) members.push_back(&samples[i]);
    const auto batch = data::collate<T>(members, batch_size);
    Graph<T> g(ad::GradMode::kDisabled);
    auto fwd = model.forward(g, batch, false, nullptr, false);
    const auto pred = argmax_rows(fwd.group_logits.value());
    for (std::size_t i = 0; i < pred.size(); ++i) m.add(batch.labels[i], pred[i]);
    add_scaled(sum, fwd.loss.report, static_cast<double>(batch.size));
  }
  m.finalize();
  if (m.count) add_scaled(m.losses, sum, 1.0 / static_cast<double>(m.count));
  return m;
}

template Metrics evaluate<float>(GroupEmotionModel<float>&, const std::vector<data::FeatureBundle>&, std::size_t);
template Metrics evaluate<double>(GroupEmotionModel<double>&, const std::vector<data::FeatureBundle>&,
                                  std::size_t);

TrainResult train_on(const RunConfig& cfg, const model::LexiconSet& lexicons,
                     const std::vector<data::FeatureBundle>& train_set,
                     const std::vector<data::FeatureBundle>& val_set, const TrainOptions& opts) {
  cfg.validate();
  if (cfg.precision_kind() == Precision::kF64) return train_impl<double>(cfg, lexicons, train_set, val_set, opts);
  return train_impl<float>(cfg, lexicons, train_set, val_set, opts);
}

TrainResult train(const RunConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  const auto lexicons = data::load_lexicons(cfg.lexicons, cfg.d_e);
  const auto manifest = data::load_manifest(cfg.data);
  const auto train_set = data::load_split(manifest, "train", expectations(cfg));
  std::vector<data::FeatureBundle> val_set;
  if (manifest.splits.count("val")) val_set = data::load_split(manifest, "val", expectations(cfg));
  spdlog::info("training {} on {} samples ({} validation)", cfg.variant, train_set.size(), val_set.size());
  return train_on(cfg, lexicons, train_set, val_set, opts);
}

RunConfig checkpoint_config(const data::Checkpoint& ckpt) { return merge_json(RunConfig{}, ckpt.config); }

model::LexiconSet checkpoint_lexicons(const data::Checkpoint& ckpt) {
  if (!ckpt.extra.contains("lexicons")) throw ParseError("checkpoint: no embedded lexicons");
  const RunConfig cfg = checkpoint_config(ckpt);
  return data::lexicons_from_json(ckpt.extra.at("lexicons"), cfg.d_e);
}

Metrics evaluate_state(const data::Checkpoint& ckpt, const std::vector<data::FeatureBundle>& samples,
                       std::size_t batch_size) {
  const RunConfig cfg = checkpoint_config(ckpt);
  const auto lexicons = checkpoint_lexicons(ckpt);
  if (cfg.precision_kind() == Precision::kF64) {
    GroupEmotionModel<double> model(cfg, lexicons);
    model.import_state(ckpt);
    return evaluate(model, samples, batch_size);
  }
  GroupEmotionModel<float> model(cfg, lexicons);
  model.import_state(ckpt);
  return evaluate(model, samples, batch_size);
}

std::vector<AblationRow> run_ablation_on(const RunConfig& cfg, const model::LexiconSet& lexicons,
                                         const std::vector<data::FeatureBundle>& train_set,
                                         const std::vector<data::FeatureBundle>& val_set,
                                         const std::vector<data::FeatureBundle>& eval_set, bool write_files) {
  std::vector<AblationRow> rows;
  for (Variant v : kAllVariants) {
    RunConfig vc = cfg;
    vc.variant = std::string(variant_name(v));
    vc.out = (fs::path(cfg.out) / "ablation" / vc.variant).string();
    TrainOptions opts;
    opts.write_files = write_files;
    spdlog::info("ablation: training {}", vc.variant);
    const TrainResult tr = train_on(vc, lexicons, train_set, val_set, opts);
    const data::Checkpoint& chosen = tr.best ? *tr.best : tr.last;
    AblationRow row{v, std::string(variant_table_label(v)), evaluate_state(chosen, eval_set, vc.batch_size),
                    tr.epochs.size()};
    spdlog::info("ablation: {} overall {:.2f}%", vc.variant, 100.0 * row.metrics.overall_accuracy);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::string& eval_split, bool write_files) {
  cfg.validate();
  const auto lexicons = data::load_lexicons(cfg.lexicons, cfg.d_e);
  const auto manifest = data::load_manifest(cfg.data);
  const auto train_set = data::load_split(manifest, "train", expectations(cfg));
  std::vector<data::FeatureBundle> val_set;
  if (manifest.splits.count("val")) val_set = data::load_split(manifest, "val", expectations(cfg));
  const auto eval_set = data::load_split(manifest, eval_split, expectations(cfg));
  auto rows = run_ablation_on(cfg, lexicons, train_set, val_set, eval_set, write_files);
  if (write_files) {
    fs::create_directories(cfg.out);
    const fs::path csv = fs::path(cfg.out) / "ablation.csv";
    std::ofstream out(csv, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + csv.string() + "'");
    out << ablation_csv(rows);
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "variant,pos,neu,neg,overall\n";
  os.setf(std::ios::fixed);
  os.precision(2);
  for (const auto& r : rows) {
    os << r.label << ',' << 100.0 * r.metrics.per_class_accuracy[0] << ',' << 100.0 * r.metrics.per_class_accuracy[1]
       << ',' << 100.0 * r.metrics.per_class_accuracy[2] << ',' << 100.0 * r.metrics.overall_accuracy << "\n";
  }
  return os.str();
}

}  // namespace gemo::harness
