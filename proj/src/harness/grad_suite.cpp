// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/harness/grad_suite.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <memory>

#include "gemo/data/batch.hpp"
#include "gemo/data/synthetic.hpp"
#include "gemo/errors.hpp"
#include "gemo/harness/model.hpp"
#include "gemo/nn/layers.hpp"
#include "gemo/rng.hpp"

namespace gemo::harness {

using D = double;
using Fn = std::function<Var<D>(Graph<D>&)>;
using Params = std::vector<ad::Parameter<D>*>;

RunConfig micro_config() {
  RunConfig c;
  c.hidden = 6;
  c.heads = 2;
  c.depth = 2;
  c.scales = 2;
  c.d_e = 5;
  c.d_h = 6;
  c.dropout = 0.0;
  c.batch_size = 3;
  c.precision = "f64";
  return c;
}

model::LexiconSet micro_lexicons(std::size_t dim) {
  static const char* const kWords[3][3] = {
      {"joy", "cheer", "smile"}, {"calm", "plain", "still"}, {"grief", "anger", "fear"}};
  model::LexiconSet set;
  set.dim = dim;
  for (std::size_t c = 0; c < model::kNumClasses; ++c) {
    auto& cls = set.classes[c];
    cls.class_word = std::string(model::kClassTitles[c]);
    cls.class_embedding = model::hash_embedding(cls.class_word, dim);
    cls.class_hashed = true;
    for (const char* w : kWords[c]) cls.lexicons.push_back({w, model::hash_embedding(w, dim), true});
  }
  return set;
}

bool GradSuiteReport::passed() const {
  return std::all_of(cases.begin(), cases.end(), [](const GradCase& c) { return c.result.passed; });
}

const GradCase* GradSuiteReport::worst() const {
  const GradCase* w = nullptr;
  for (const auto& c : cases)
    if (!w || c.result.max_rel_error > w->result.max_rel_error) w = &c;
  return w;
}

const std::vector<std::string>& grad_suite_names() {
  static const std::vector<std::string> names = {"primitives", "nn",         "vcem", "esem",
                                                 "vsim",       "objectives", "model"};
  return names;
}

namespace {

Tensor<D> random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Tensor<D> t({rows, cols});
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

// A fixed random projection to a scalar, so every output entry carries a
// distinct weight into the checked loss.
Var<D> probe(const Var<D>& v, std::uint64_t seed) {
  Rng rng(mix_seed(seed, v.rows() * 131 + v.cols()));
  return ad::sum(ad::mul(v, v.graph().constant(random_tensor(rng, v.rows(), v.cols()))));
}

class Runner {
 public:
  Runner(GradSuiteReport& report, std::string suite, double tolerance)
      : report_(report), suite_(std::move(suite)), tolerance_(tolerance) {}

  void check(const std::string& name, const Params& params, const Fn& fn) {
    ad::GradCheckOptions opt;
    opt.tolerance = tolerance_;
    report_.cases.push_back({suite_, name, ad::check_gradients<D>(params, fn, opt)});
  }

 private:
  GradSuiteReport& report_;
  std::string suite_;
  double tolerance_;
};

void primitives_suite(Runner& run, std::uint64_t seed) {
  nn::ParamStore<D> s(seed);
  Rng rng(mix_seed(seed, hash_text("grad.primitives")));
  auto& a = s.add("a", random_tensor(rng, 3, 4));
  auto& b = s.add("b", random_tensor(rng, 4, 2));
  auto& c = s.add("c", random_tensor(rng, 3, 4));
  auto& row = s.add("row", random_tensor(rng, 1, 4));
  auto& col = s.add("col", random_tensor(rng, 3, 1));
  Tensor<D> pos_init = random_tensor(rng, 3, 4);
  for (auto& v : pos_init.data()) v = 0.5 + std::abs(v);
  auto& pos = s.add("pos", pos_init);
  Tensor<D> weights({3, 4});
  for (auto& v : weights.data()) v = rng.uniform();

  const ad::RowMask keys{1, 0, 1, 1};
  const ad::RowMask rows{1, 0, 1};
  run.check("matmul", {&a, &b}, [&](Graph<D>& g) { return probe(ad::matmul(g.parameter(a), g.parameter(b)), seed); });
  run.check("softmax_masked", {&a}, [&](Graph<D>& g) { return probe(ad::softmax_masked(g.parameter(a), keys), seed); });
  run.check("log_softmax_rows", {&a}, [&](Graph<D>& g) { return probe(ad::log_softmax_rows(g.parameter(a)), seed); });
  run.check("layer_norm_rows", {&a, &row, &c}, [&](Graph<D>& g) {
    auto beta = ad::slice_rows(g.parameter(c), 0, 1);
    return probe(ad::layer_norm_rows(g.parameter(a), g.parameter(row), beta), seed);
  });
  run.check("pairwise_cosine", {&a, &c}, [&](Graph<D>& g) { return probe(ad::pairwise_cosine(g.parameter(a), g.parameter(c)), seed); });
  run.check("standardize", {&col}, [&](Graph<D>& g) { return probe(ad::standardize(g.parameter(col), 1e-8), seed); });
  run.check("masked_mean_and_max", {&a}, [&](Graph<D>& g) {
    auto x = g.parameter(a);
    return probe(ad::concat_cols<D>({ad::masked_mean_rows(x, rows), ad::max_rows(x)}), seed);
  });
  run.check("gates_and_rows", {&a, &col, &row}, [&](Graph<D>& g) {
    auto x = ad::add_row(g.parameter(a), g.parameter(row));
    return probe(ad::scale_rows(ad::sigmoid(x), g.parameter(col)), seed);
  });
  run.check("log_and_weighted_log_sum", {&pos}, [&](Graph<D>& g) {
    auto p = g.parameter(pos);
    return ad::add(probe(ad::log(p), seed), ad::weighted_log_sum(p, weights, 1e-8));
  });
  run.check("concat_slice", {&a, &c}, [&](Graph<D>& g) {
    auto x = ad::concat_rows<D>({g.parameter(a), g.parameter(c)});
    return probe(ad::slice_cols(ad::slice_rows(x, 1, 4), 1, 2), seed);
  });
}

void nn_suite(Runner& run, const RunConfig& cfg, std::uint64_t seed) {
  nn::ParamStore<D> s(seed);
  Rng rng(mix_seed(seed, hash_text("grad.nn")));
  const std::size_t h = cfg.hidden;
  auto lin = nn::make_linear(s, "lin", h, 3);
  auto norm = nn::make_layer_norm(s, "norm", h);
  auto attn = nn::make_attention(s, "attn", h, cfg.heads);
  auto block = nn::make_encoder_block(s, "block", h, cfg.heads, h);
  auto& gcn_w = s.glorot("gcn", h, 4);
  auto& x = s.add("x", random_tensor(rng, 4, h));
  auto& kv = s.add("kv", random_tensor(rng, 3, h));
  const ad::RowMask mask{1, 1, 0, 1};
  Tensor<D> a_hat({4, 4});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) a_hat(i, j) = i == j ? 0.5 : 0.125 * static_cast<double>((i + j) % 3);

  const nn::ForwardContext ctx{true, 0.0, nullptr};
  run.check("linear", s.all(), [&](Graph<D>& g) { return probe(nn::linear(g.parameter(x), lin), seed); });
  run.check("layer_norm", s.all(), [&](Graph<D>& g) { return probe(nn::layer_norm(g.parameter(x), norm), seed); });
  run.check("multi_head_attention", s.all(), [&](Graph<D>& g) {
    auto k = g.parameter(kv);
    return probe(nn::multi_head_attention(g.parameter(x), k, k, ad::RowMask{1, 0, 1}, attn), seed);
  });
  run.check("encoder_block", s.all(), [&](Graph<D>& g) {
    return probe(nn::encoder_block(g.parameter(x), mask, block, ctx), seed);
  });
  run.check("gcn_layer", s.all(), [&](Graph<D>& g) {
    return probe(nn::gcn_layer(g.parameter(x), a_hat, g.parameter(gcn_w)), seed);
  });
}

struct CueInputs {
  ad::Parameter<D>* faces;
  ad::Parameter<D>* objects;
  ad::Parameter<D>* scenes;
};

CueInputs cue_inputs(nn::ParamStore<D>& s, const RunConfig& cfg, std::uint64_t seed) {
  Rng rng(mix_seed(seed, hash_text("grad.cues")));
  return {&s.add("in.faces", random_tensor(rng, 2, cfg.hidden)), &s.add("in.objects", random_tensor(rng, 2, cfg.hidden)),
          &s.add("in.scenes", random_tensor(rng, cfg.scales, cfg.hidden))};
}

model::VisualCues<D> bind(Graph<D>& g, const CueInputs& in) {
  model::VisualCues<D> c;
  c.faces = g.parameter(*in.faces);
  c.objects = g.parameter(*in.objects);
  c.scenes = g.parameter(*in.scenes);
  c.face_mask = {1, 1};
  c.object_mask = {1, 0};
  return c;
}

void vcem_suite(Runner& run, const RunConfig& cfg, std::uint64_t seed) {
  nn::ParamStore<D> s(seed);
  auto p = model::make_vcem_params(s, cfg);
  const CueInputs in = cue_inputs(s, cfg, seed);
  const nn::ForwardContext ctx{true, 0.0, nullptr};
  run.check("cam_cross_attention", s.all(), [&](Graph<D>& g) {
    auto cues = bind(g, in);
    return probe(model::cam_cross_attention(ad::slice_rows(cues.scenes, 0, 1), cues.faces, cues.face_mask, p), seed);
  });
  run.check("vcem_forward", s.all(), [&](Graph<D>& g) { return probe(model::vcem_forward(bind(g, in), p, ctx), seed); });
  run.check("vcem_forward_without_cam", s.all(),
            [&](Graph<D>& g) { return probe(model::vcem_forward_without_cam(bind(g, in), p, ctx), seed); });
  run.check("cue_logits", s.all(), [&](Graph<D>& g) {
    auto l = model::cue_logits(bind(g, in), p);
    return probe(ad::concat_rows<D>({l.scene, l.face, l.object}), seed);
  });
}

void esem_suite(Runner& run, const RunConfig& cfg, std::uint64_t seed) {
  const auto lex = micro_lexicons(cfg.d_e);
  std::array<model::ClassGraph<D>, model::kNumClasses> graphs;
  for (std::size_t c = 0; c < model::kNumClasses; ++c) graphs[c] = model::build_class_graph<D>(lex.classes[c]);
  for (const char* pool : {"sum", "concat"}) {
    RunConfig pc = cfg;
    pc.class_pool = pool;
    auto s = std::make_shared<nn::ParamStore<D>>(seed);
    auto p = model::make_esem_params(*s, pc);
    const nn::ForwardContext ctx{false, 0.0, nullptr};
    run.check(std::string("esem_forward_") + pool, s->all(), [&](Graph<D>& g) {
      auto out = model::esem_forward(g, graphs, p, ctx);
      return probe(ad::concat_rows<D>({out.semantic, out.class_semantics[0], out.class_semantics[2]}), seed);
    });
  }
}

void vsim_suite(Runner& run, const RunConfig& cfg, std::uint64_t seed) {
  nn::ParamStore<D> s(seed);
  Rng rng(mix_seed(seed, hash_text("grad.vsim")));
  auto p = model::make_vsim_params(s, cfg);
  auto& visual = s.add("in.visual", random_tensor(rng, 3, cfg.hidden));
  auto& semantic = s.add("in.semantic", random_tensor(rng, 1, cfg.hidden));
  auto encode_all = [&](const model::SimilarityFusion<D>& f, const nn::ForwardContext& ctx) {
    std::vector<Var<D>> rows;
    for (const auto& t : f.tokens) rows.push_back(model::group_encode(t, p, ctx).logits);
    return ad::concat_rows(rows);
  };
  const nn::ForwardContext train{true, 0.0, nullptr};
  const nn::ForwardContext eval{false, 0.0, nullptr};
  run.check("similarity_fuse_batch_stats", s.all(), [&](Graph<D>& g) {
    model::SimStats stats;
    auto f = model::similarity_fuse(g.parameter(visual), g.parameter(semantic), stats, p, train, false);
    return probe(encode_all(f, train), seed);
  });
  run.check("similarity_fuse_running_stats", s.all(), [&](Graph<D>& g) {
    model::SimStats stats;
    stats.mean = 0.1;
    stats.std = 0.4;
    auto f = model::similarity_fuse(g.parameter(visual), g.parameter(semantic), stats, p, eval, false);
    return probe(encode_all(f, eval), seed);
  });
  run.check("plain_fuse", s.all(), [&](Graph<D>& g) {
    auto f = model::plain_fuse(g.parameter(visual), g.parameter(semantic), p);
    return probe(encode_all(f, eval), seed);
  });
}

void objectives_suite(Runner& run, std::uint64_t seed) {
  nn::ParamStore<D> s(seed);
  Rng rng(mix_seed(seed, hash_text("grad.objectives")));
  auto& logits = s.add("logits", random_tensor(rng, 4, 3));
  auto& fv = s.add("fv", random_tensor(rng, 4, 6));
  auto& ft = s.add("ft", random_tensor(rng, 4, 6));
  const std::vector<int> labels{0, 2, 1, 0};
  run.check("cross_entropy", {&logits}, [&](Graph<D>& g) { return obj::cross_entropy(g.parameter(logits), labels); });
  run.check("cross_entropy_subset", {&logits}, [&](Graph<D>& g) {
    return obj::cross_entropy(g.parameter(logits), labels, {1, 0, 1, 0});
  });
  obj::SamConfig sam;
  run.check("sam_loss", {&fv, &ft}, [&](Graph<D>& g) { return obj::sam_loss(g.parameter(fv), g.parameter(ft), labels, sam); });
  obj::SamConfig literal = sam;
  literal.alpha_literal = true;
  literal.tau = 2.0;
  run.check("sam_loss_literal", {&fv, &ft},
            [&](Graph<D>& g) { return obj::sam_loss(g.parameter(fv), g.parameter(ft), labels, literal); });
  run.check("total_loss", {&logits, &fv, &ft}, [&](Graph<D>& g) {
    auto l = g.parameter(logits);
    auto sam_term = obj::sam_loss(g.parameter(fv), g.parameter(ft), labels, sam);
    return obj::total_loss(obj::cross_entropy(l, labels), obj::cross_entropy(ad::scale(l, 0.5), labels),
                           obj::cross_entropy(ad::sigmoid(l), labels), obj::cross_entropy(l, labels, {0, 1, 1, 0}),
                           sam_term)
        .total;
  });
}

void model_suite(Runner& run, const RunConfig& cfg, std::uint64_t seed) {
  data::SyntheticSpec spec;
  spec.dim = cfg.hidden;
  spec.scales = cfg.scales;
  spec.min_faces = 2;
  spec.max_faces = 2;
  spec.min_objects = 2;
  spec.max_objects = 2;
  spec.margin = 1.0;
  spec.noise = 0.5;
  spec.seed = seed;
  const auto samples = data::synthesize_split(spec, "grad", 2);
  const auto batch = data::collate<D>(samples);
  const auto lex = micro_lexicons(cfg.d_e);
  for (Variant v : kAllVariants) {
    RunConfig vc = cfg;
    vc.variant = std::string(variant_name(v));
    GroupEmotionModel<D> model(vc, lex);
    run.check("full_" + vc.variant, model.params().all(), [&](Graph<D>& g) {
      Rng rng(seed);
      return model.forward(g, batch, true, &rng, false).loss.total;
    });
  }
}

}  // namespace

GradSuiteReport run_grad_suite(const std::vector<std::string>& suites, std::uint64_t seed, double tolerance) {
  const auto& known = grad_suite_names();
  for (const auto& s : suites) {
    if (std::find(known.begin(), known.end(), s) == known.end()) throw ConfigError("unknown gradient suite '" + s + "'");
  }
  auto wanted = [&](const std::string& name) {
    return suites.empty() || std::find(suites.begin(), suites.end(), name) != suites.end();
  };
  const RunConfig cfg = micro_config();
  GradSuiteReport report;
  const auto t0 = std::chrono::steady_clock::now();
  if (wanted("primitives")) {
    Runner r(report, "primitives", tolerance);
    primitives_suite(r, seed);
  }
  if (wanted("nn")) {
    Runner r(report, "nn", tolerance);
    nn_suite(r, cfg, seed);
  }
  if (wanted("vcem")) {
    Runner r(report, "vcem", tolerance);
    vcem_suite(r, cfg, seed);
  }
  if (wanted("esem")) {
    Runner r(report, "esem", tolerance);
    esem_suite(r, cfg, seed);
  }
  if (wanted("vsim")) {
    Runner r(report, "vsim", tolerance);
    vsim_suite(r, cfg, seed);
  }
  if (wanted("objectives")) {
    Runner r(report, "objectives", tolerance);
    objectives_suite(r, seed);
  }
  if (wanted("model")) {
    Runner r(report, "model", tolerance);
    model_suite(r, cfg, seed);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace gemo::harness
