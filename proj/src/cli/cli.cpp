// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/cli/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "gemo/config.hpp"
#include "gemo/data/checkpoint.hpp"
#include "gemo/data/lexicon_io.hpp"
#include "gemo/data/synthetic.hpp"
#include "gemo/errors.hpp"
#include "gemo/harness/grad_suite.hpp"
#include "gemo/harness/train.hpp"
#include "gemo/model/lexicon.hpp"

namespace gemo::cli {

namespace {

struct FieldHelp {
  const char* key;
  const char* help;
};

// One entry per RunConfig field, in the order --help lists them.
constexpr FieldHelp kFields[] = {
    {"seed", "Run seed (initialization, shuffling, dropout)"},
    {"variant", "Model variant: B1, B2_noCAM, B2, B3, B4_noSAM, B4_noSFF, B4"},
    {"epochs", "Training epochs"},
    {"batch_size", "Samples per batch"},
    {"lr", "Initial Adam learning rate"},
    {"lr_decay", "Multiplicative learning-rate decay"},
    {"lr_decay_unit", "Decay applied per epoch or per iteration"},
    {"beta1", "Adam first-moment decay"},
    {"beta2", "Adam second-moment decay"},
    {"adam_eps", "Adam denominator epsilon"},
    {"tau", "SAM temperature"},
    {"sam_eps", "SAM log epsilon"},
    {"sam_alpha_literal", "Use exp(tau*sim) instead of exp(sim/tau) in SAM"},
    {"hidden", "Feature width (must match the data)"},
    {"heads", "Attention heads"},
    {"depth", "Encoder blocks per fusion stack"},
    {"scales", "Scene scales K (must match the data)"},
    {"d_e", "Lexicon embedding width"},
    {"d_h", "GCN width, 0 for d_e"},
    {"dropout", "Dropout rate"},
    {"gate_mode", "Scale gate: per_row or per_scale"},
    {"class_pool", "Class pooling: sum or concat"},
    {"sim_momentum", "Momentum of the running similarity statistics"},
    {"precision", "Float precision: f32 or f64"},
    {"data", "Dataset manifest"},
    {"lexicons", "Lexicon file"},
    {"out", "Output directory"},
};

std::string flag_name(const std::string& key) {
  std::string s = key;
  for (auto& ch : s)
    if (ch == '_') ch = '-';
  return "--" + s;
}

std::string display(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

// Converts a flag's text to the JSON type the config field expects.
nlohmann::json convert(const nlohmann::json& like, const std::string& text, const std::string& flag) {
  auto fail = [&](const char* what) {
    return ConfigError(flag + ": expected " + what + ", got '" + text + "'");
  };
  if (like.is_string()) return text;
  if (like.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw fail("true or false");
  }
  std::size_t used = 0;
  try {
    if (like.is_number_unsigned()) {
      if (text.empty() || text[0] == '-' || text[0] == '+') throw fail("a non-negative integer");
      const unsigned long long v = std::stoull(text, &used);
      if (used != text.size()) throw fail("a non-negative integer");
      return v;
    }
    const double v = std::stod(text, &used);
    if (used != text.size()) throw fail("a number");
    return v;
  } catch (const std::logic_error&) {
    throw fail(like.is_number_unsigned() ? "a non-negative integer" : "a number");
  }
}

// The RunConfig flags shared by train, eval and ablate. Values are kept as
// text and applied on top of --config, so a flag always wins over the file.
class RunFlags {
 public:
  void attach(CLI::App* app) {
    app->add_option("--config", config_path_, "JSON config applied before the flags below");
    const nlohmann::json defaults = to_json(RunConfig{});
    for (const auto& f : kFields) {
      const auto& def = defaults.at(f.key);
      auto* opt = app->add_option(flag_name(f.key), raw_[f.key], f.help)->default_str(display(def));
      opt->type_name(def.is_boolean() ? "BOOL" : def.is_number_unsigned() ? "UINT" : def.is_number() ? "FLOAT" : "TEXT");
      if (std::string(f.key) == "precision") opt->check(CLI::IsMember({"f32", "f64"}));
      opts_[f.key] = opt;
    }
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path_.empty() ? RunConfig{} : load_config(config_path_);
    const nlohmann::json defaults = to_json(RunConfig{});
    nlohmann::json patch = nlohmann::json::object();
    for (const auto& [key, opt] : opts_) {
      if (opt->count() == 0) continue;
      patch[key] = convert(defaults.at(key), raw_.at(key), flag_name(key));
    }
    cfg = merge_json(cfg, patch);
    cfg.validate();
    return cfg;
  }

 private:
  std::string config_path_;
  std::map<std::string, std::string> raw_;
  std::map<std::string, CLI::Option*> opts_;
};

spdlog::level::level_enum log_level_from_env() {
  const char* env = std::getenv("GAN_LOG_LEVEL");
  if (!env || !*env) return spdlog::level::info;
  const std::string v(env);
  if (v == "error") return spdlog::level::err;
  if (v == "info") return spdlog::level::info;
  if (v == "debug") return spdlog::level::debug;
  throw ConfigError("GAN_LOG_LEVEL: expected error, info or debug, got '" + v + "'");
}

// Routes spdlog to `err` for the duration of one run().
class LogScope {
 public:
  explicit LogScope(std::ostream& err) {
    auto logger = std::make_shared<spdlog::logger>("gemo", std::make_shared<spdlog::sinks::ostream_sink_mt>(err));
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
  }
  ~LogScope() {
    auto logger = std::make_shared<spdlog::logger>("gemo", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    spdlog::set_default_logger(logger);
  }
  LogScope(const LogScope&) = delete;
  LogScope& operator=(const LogScope&) = delete;
};

int gen_data(const data::SyntheticSpec& spec, const std::string& out_dir, std::ostream& out) {
  spec.validate();
  const auto manifest = data::generate_synthetic_dataset(spec, out_dir);
  out << "wrote " << manifest.total() << " bundles to " << out_dir << " (";
  bool first = true;
  for (const auto& [name, paths] : manifest.splits) {
    out << (first ? "" : ", ") << name << " " << paths.size();
    first = false;
  }
  out << ")\n";
  return kExitOk;
}

int train_cmd(const RunConfig& cfg, const std::string& resume, std::ostream& out) {
  harness::TrainOptions opts;
  opts.resume_path = resume;
  const auto result = harness::train(cfg, opts);
  out << "trained " << cfg.variant << " for " << result.last.epoch << " epochs (" << result.optimizer_steps
      << " steps)";
  if (!result.epochs.empty()) out << ", final train accuracy " << result.epochs.back().train_acc;
  if (result.last.extra.contains("best")) out << ", best " << result.last.extra["best"].dump();
  out << "\ncheckpoints in " << cfg.out << "\n";
  return kExitOk;
}

int eval_cmd(const RunConfig& cfg, const std::string& checkpoint, const std::string& split,
             const std::string& metrics_path, std::ostream& out) {
  const auto ckpt = data::load_checkpoint(checkpoint);
  const RunConfig model_cfg = harness::checkpoint_config(ckpt);
  const auto manifest = data::load_manifest(cfg.data);
  const auto samples = data::load_split(manifest, split, {model_cfg.hidden, model_cfg.scales});
  const auto metrics = harness::evaluate_state(ckpt, samples, cfg.batch_size);
  const std::string text = harness::to_json(metrics).dump(2);
  out << text << "\n";
  if (!metrics_path.empty()) {
    std::ofstream f(metrics_path, std::ios::trunc);
    if (!f) throw IoError("cannot write '" + metrics_path + "'");
    f << text << "\n";
  }
  return kExitOk;
}

int ablate_cmd(const RunConfig& cfg, const std::string& split, std::ostream& out) {
  const auto rows = harness::run_ablation(cfg, split, true);
  out << harness::ablation_csv(rows);
  return kExitOk;
}

int gradcheck_cmd(const std::vector<std::string>& suites, std::uint64_t seed, double tolerance, std::ostream& out,
                  std::ostream& err) {
  const auto report = harness::run_grad_suite(suites, seed, tolerance);
  for (const auto& c : report.cases) {
    out << (c.result.passed ? "PASS " : "FAIL ") << c.suite << "/" << c.name
        << "  max_rel_err=" << c.result.max_rel_error << "  entries=" << c.result.checked << "\n";
  }
  out << report.cases.size() << " checks in " << report.seconds << " s\n";
  if (report.passed()) return kExitOk;
  for (const auto& c : report.cases) {
    if (c.result.passed) continue;
    err << "gradient mismatch in " << c.suite << "/" << c.name << ": parameter '" << c.result.worst_name
        << "' entry " << c.result.worst_index << " analytic " << c.result.worst_analytic << " numeric "
        << c.result.worst_numeric << "\n";
  }
  return kExitRuntime;
}

int inspect_cmd(const std::string& path, std::size_t dim, std::ostream& out) {
  model::LexiconSet set;
  try {
    set = data::load_lexicons(path, dim);
  } catch (const IoError& e) {
    // An unreadable lexicon file is an input problem, not a runtime one.
    throw ConfigError(e.what());
  }
  out << model::render_tree(model::build_emotion_tree(set));
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Group emotion recognition from precomputed visual cues and emotion lexicons", "gemo"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  data::SyntheticSpec spec;
  std::string gen_out = "data";
  auto* gen = app.add_subcommand("gen-data", "Generate a separable synthetic dataset");
  gen->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->capture_default_str();
  gen->add_option("--train", spec.train, "Training samples")->capture_default_str();
  gen->add_option("--val", spec.val, "Validation samples")->capture_default_str();
  gen->add_option("--test", spec.test, "Test samples")->capture_default_str();
  gen->add_option("--dim", spec.dim, "Feature width")->capture_default_str();
  gen->add_option("--scales", spec.scales, "Scene scales per sample")->capture_default_str();
  gen->add_option("--min-faces", spec.min_faces, "Fewest faces per sample")->capture_default_str();
  gen->add_option("--max-faces", spec.max_faces, "Most faces per sample")->capture_default_str();
  gen->add_option("--min-objects", spec.min_objects, "Fewest objects per sample")->capture_default_str();
  gen->add_option("--max-objects", spec.max_objects, "Most objects per sample")->capture_default_str();
  gen->add_option("--margin", spec.margin, "Distance of class anchors from the origin")->capture_default_str();
  gen->add_option("--noise", spec.noise, "Per-feature noise standard deviation")->capture_default_str();
  gen->add_option("--format", spec.format, "Bundle format")->capture_default_str()->check(CLI::IsMember({"json", "bin"}));

  RunFlags train_flags, eval_flags, ablate_flags;
  std::string resume;
  auto* train = app.add_subcommand("train", "Train one variant");
  train_flags.attach(train);
  train->add_option("--resume", resume, "Continue from a checkpoint (last.json)");

  std::string checkpoint, eval_split = "test", metrics_path;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  eval_flags.attach(eval);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required();
  eval->add_option("--split", eval_split, "Split to evaluate")->capture_default_str();
  eval->add_option("--metrics", metrics_path, "Also write the metrics JSON here");

  std::string ablate_split = "test";
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate all seven variants, print the CSV table");
  ablate_flags.attach(ablate);
  ablate->add_option("--split", ablate_split, "Split the table is computed on")->capture_default_str();

  std::vector<std::string> suites;
  std::uint64_t grad_seed = RunConfig{}.seed;
  double tolerance = 1e-4;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks on a tiny 64-bit setup");
  grad->add_option("--suite", suites, "Suites to run (default all): primitives nn vcem esem vsim objectives model")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  grad->add_option("--seed", grad_seed, "Seed for weights and inputs")->capture_default_str();
  grad->add_option("--tolerance", tolerance, "Largest accepted relative error")->capture_default_str();

  std::string lexicon_path = RunConfig{}.lexicons;
  std::size_t lexicon_dim = RunConfig{}.d_e;
  auto* inspect = app.add_subcommand("inspect-lexicons", "Print the emotion tree of a lexicon file");
  inspect->add_option("path,--lexicons", lexicon_path, "Lexicon file")->capture_default_str();
  inspect->add_option("--d-e", lexicon_dim, "Width for words without stored embeddings")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e, out, err);
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  try {
    LogScope logs(err);
    spdlog::set_level(log_level_from_env());
    if (gen->parsed()) return gen_data(spec, gen_out, out);
    if (train->parsed()) return train_cmd(train_flags.resolve(), resume, out);
    if (eval->parsed()) return eval_cmd(eval_flags.resolve(), checkpoint, eval_split, metrics_path, out);
    if (ablate->parsed()) return ablate_cmd(ablate_flags.resolve(), ablate_split, out);
    if (grad->parsed()) return gradcheck_cmd(suites, grad_seed, tolerance, out, err);
    if (inspect->parsed()) return inspect_cmd(lexicon_path, lexicon_dim, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const VersionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const DivergenceError& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitInvalid;
}

}  // namespace gemo::cli
