// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gemo/data/lexicon_io.hpp"
#include "gemo/errors.hpp"
#include "gemo/model/esem.hpp"
#include "gemo/model/lexicon.hpp"
#include "gemo/model/vcem.hpp"
#include "gemo/model/vsim.hpp"
#include "reference.hpp"

namespace gemo::model {
namespace {

using ad::Graph;
using namespace gemo::reftest;  // NOLINT

RunConfig tiny_config(std::size_t hidden = 6, std::size_t scales = 2) {
  RunConfig c;
  c.hidden = hidden;
  c.heads = 2;
  c.depth = 2;
  c.scales = scales;
  c.d_e = 5;
  c.d_h = 6;
  c.dropout = 0.0;
  return c;
}

LexiconClass make_class(const std::string& word, std::vector<double> class_vec,
                        std::vector<std::pair<std::string, std::vector<double>>> words) {
  LexiconClass c;
  c.class_word = word;
  c.class_embedding = std::move(class_vec);
  for (auto& [w, v] : words) c.lexicons.push_back({w, std::move(v), false});
  return c;
}

LexiconSet hashed_set(std::size_t dim, std::size_t per_class) {
  LexiconSet s;
  s.dim = dim;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    s.classes[c].class_word = std::string(kClassTitles[c]);
    s.classes[c].class_embedding = hash_embedding(s.classes[c].class_word, dim);
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::string w = s.classes[c].class_word + "_" + std::to_string(i);
      s.classes[c].lexicons.push_back({w, hash_embedding(w, dim), true});
    }
  }
  return s;
}

Tensor<double> two_rows(const Tensor<double>& row) { return from_m({row.values(), row.values()}); }

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs_diff(const Tensor<float>& a, const Tensor<float>& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

// ---- lexicons and the emotion tree ------------------------------------------

TEST(HashEmbedding, UnitNormDeterministicAndWordSpecific) {
  const auto a = hash_embedding("Joy", 50);
  const auto b = hash_embedding("Joy", 50);
  const auto c = hash_embedding("Grief", 50);
  double n = 0;
  for (double v : a) n += v * v;
  EXPECT_NEAR(std::sqrt(n), 1.0, 1e-12);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(ValidateLexicons, RejectsEmptyClassDuplicateWidthAndNonFinite) {
  LexiconSet ok = hashed_set(4, 2);
  EXPECT_NO_THROW(validate_lexicons(ok));

  LexiconSet empty = ok;
  empty.classes[1].lexicons.clear();
  EXPECT_THROW(validate_lexicons(empty), ValidationError);

  LexiconSet dup = ok;
  dup.classes[0].lexicons[1].word = dup.classes[0].lexicons[0].word;
  EXPECT_THROW(validate_lexicons(dup), ValidationError);

  LexiconSet width = ok;
  width.classes[2].lexicons[0].embedding.push_back(0.5);
  EXPECT_THROW(validate_lexicons(width), ValidationError);

  LexiconSet nan = ok;
  nan.classes[2].class_embedding[0] = std::nan("");
  EXPECT_THROW(validate_lexicons(nan), ValidationError);
}

TEST(EmotionTree, OneWordPerClassGivesThreeLeaves) {
  const auto tree = build_emotion_tree(hashed_set(3, 1));
  EXPECT_EQ(tree.root, "Emotion");
  std::size_t leaves = 0;
  for (const auto& c : tree.classes) leaves += c.leaves.size();
  EXPECT_EQ(leaves, 3u);
  EXPECT_EQ(tree.classes[0].name, "Positive");
  EXPECT_EQ(tree.classes[2].name, "Negative");
}

TEST(EmotionTree, LeavesKeepFileOrderAndRenderUnderTheirClass) {
  LexiconSet s = hashed_set(3, 1);
  s.classes[0].lexicons = {{"Zeal", hash_embedding("Zeal", 3), true}, {"Awe", hash_embedding("Awe", 3), true}};
  const auto tree = build_emotion_tree(s);
  ASSERT_EQ(tree.classes[0].leaves.size(), 2u);
  EXPECT_EQ(tree.classes[0].leaves[0], "Zeal");
  EXPECT_EQ(tree.classes[0].leaves[1], "Awe");
  const std::string text = render_tree(tree);
  EXPECT_NE(text.find("Positive [2 lexicons]"), std::string::npos);
  EXPECT_LT(text.find("Positive"), text.find("Zeal"));
  EXPECT_LT(text.find("Zeal"), text.find("Neutral"));
}

TEST(EmotionTree, EmptyClassRejected) {
  LexiconSet s = hashed_set(3, 1);
  s.classes[1].lexicons.clear();
  EXPECT_THROW(build_emotion_tree(s), ValidationError);
}

TEST(DefaultLexicons, ThreeClassesOfTwelveWithJoyUnitySolidarityUnderPositive) {
  const auto set = data::load_lexicons(std::string(GEMO_SOURCE_DIR) + "/assets/lexicons/default.json");
  EXPECT_EQ(set.dim, 50u);
  for (const auto& c : set.classes) {
    EXPECT_EQ(c.lexicons.size(), 12u);
    EXPECT_FALSE(c.class_hashed);
  }
  const auto tree = build_emotion_tree(set);
  EXPECT_EQ(tree.classes[0].name, "Positive");
  const auto& pos = tree.classes[0].leaves;
  for (const char* w : {"Joy", "Unity", "Solidarity"}) {
    EXPECT_NE(std::find(pos.begin(), pos.end(), w), pos.end()) << w;
  }
}

// ---- class graphs -------------------------------------------------------------

TEST(ClassGraph, IdenticalEmbeddingsGiveUnitAffinity) {
  const auto cls = make_class("C", {1, 2, 3}, {{"a", {1, 2, 3}}});
  const auto g = build_class_graph<double>(cls);
  EXPECT_NEAR(g.adjacency(0, 1), 1.0, 1e-12);
  EXPECT_NEAR(g.adjacency(1, 0), 1.0, 1e-12);
}

TEST(ClassGraph, OrthogonalEmbeddingsGiveIdentityNormalization) {
  const auto cls = make_class("C", {0, 0, 1}, {{"a", {1, 0, 0}}, {"b", {0, 1, 0}}});
  const auto g = build_class_graph<double>(cls);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(g.adjacency(i, j), i == j ? 1.0 : 0.0);
      EXPECT_NEAR(g.normalized(i, j), i == j ? 1.0 : 0.0, 1e-15);
    }
}

TEST(ClassGraph, ThreeNodeCaseMatchesDirectCosines) {
  const std::vector<double> a{1, 0, 0}, b{1, 1, 0}, e{1, 1, 1};
  const auto g = build_class_graph<double>(make_class("C", e, {{"a", a}, {"b", b}}));
  const double ab = 1 / std::sqrt(2.0), ae = 1 / std::sqrt(3.0), be = 2 / std::sqrt(6.0);
  const double A[3][3] = {{1, ab, ae}, {ab, 1, be}, {ae, be, 1}};
  double deg[3];
  for (int i = 0; i < 3; ++i) deg[i] = A[i][0] + A[i][1] + A[i][2];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(g.adjacency(i, j), A[i][j], 1e-12);
      EXPECT_NEAR(g.normalized(i, j), A[i][j] / std::sqrt(deg[i] * deg[j]), 1e-12);
    }
  // class embedding is the last node row
  EXPECT_EQ(g.nodes(2, 2), 1.0);
  EXPECT_EQ(g.nodes(0, 1), 0.0);
}

TEST(ClassGraph, NegativeCosineClampedToZero) {
  const auto g = build_class_graph<double>(make_class("C", {0, 1}, {{"a", {1, 0}}, {"b", {-1, 0}}}));
  EXPECT_EQ(g.adjacency(0, 1), 0.0);
}

TEST(ClassGraph, ZeroNormEmbeddingRejected) {
  EXPECT_THROW(build_class_graph<double>(make_class("C", {1, 0}, {{"a", {0, 0}}})), DegenerateVectorError);
}

TEST(ClassGraph, SymmetricUnitDiagonalAndBoundedForRandomClasses) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto set = hashed_set(8, 2 + seed);
    for (const auto& cls : set.classes) {
      const auto g = build_class_graph<double>(cls);
      const std::size_t n = g.adjacency.rows();
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_EQ(g.adjacency(i, i), 1.0);
        for (std::size_t j = 0; j < n; ++j) {
          EXPECT_EQ(g.adjacency(i, j), g.adjacency(j, i));
          EXPECT_NEAR(g.normalized(i, j), g.normalized(j, i), 1e-15);
          EXPECT_GE(g.adjacency(i, j), 0.0);
          EXPECT_LE(g.adjacency(i, j), 1.0);
        }
      }
    }
  }
}

// ---- class semantics ------------------------------------------------------------

struct EsemFixture {
  explicit EsemFixture(RunConfig c) : cfg(std::move(c)), store(cfg.seed), p(make_esem_params(store, cfg)) {}
  RunConfig cfg;
  nn::ParamStore<double> store;
  EsemParams<double> p;
};

TEST(ClassSemantics, IdenticalNodesGiveUniformAttentionAndFourTimesTheRow) {
  RunConfig c = tiny_config();
  c.d_e = 3;
  c.d_h = 3;
  EsemFixture f(c);
  const std::vector<double> v{0.3, 0.5, 0.2};
  const auto graph = build_class_graph<double>(make_class("C", v, {{"a", v}, {"b", v}}));
  Graph<double> g;
  auto enc = encode_class_semantics(g, graph, f.p, nn::ForwardContext{});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(enc.attention[i], 1.0 / 3.0, 1e-12);
  const auto& h = enc.nodes.value();
  for (std::size_t c2 = 0; c2 < 3; ++c2) EXPECT_NEAR(enc.pooled.value()[c2], 4.0 * h(0, c2), 1e-12);
}

// Two nodes, identity GCN weights: every step of the pipeline by hand.
TEST(ClassSemantics, SingleLexiconClassMatchesStepByStepEvaluation) {
  RunConfig c = tiny_config();
  c.d_e = 2;
  c.d_h = 2;
  EsemFixture f(c);
  f.p.gcn1->value = Tensor<double>::matrix({{1, 0}, {0, 1}});
  f.p.gcn2->value = Tensor<double>::matrix({{1, 0}, {0, 1}});
  const std::vector<double> lex{0.6, 0.8}, cls{1.0, 0.5};
  const auto graph = build_class_graph<double>(make_class("C", cls, {{"w", lex}}));

  const double cosv = (0.6 * 1.0 + 0.8 * 0.5) / (1.0 * std::sqrt(1.25));
  const double deg = 1 + cosv;
  const double an[2][2] = {{1 / deg, cosv / deg}, {cosv / deg, 1 / deg}};
  const double v[2][2] = {{0.6, 0.8}, {1.0, 0.5}};
  double h1[2][2], h[2][2];
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) h1[i][j] = std::max(0.0, an[i][0] * v[0][j] + an[i][1] * v[1][j]);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) h[i][j] = std::max(0.0, an[i][0] * h1[0][j] + an[i][1] * h1[1][j]);
  const double s0 = h[0][0] * cls[0] + h[0][1] * cls[1];
  const double s1 = h[1][0] * cls[0] + h[1][1] * cls[1];
  const double a0 = 1 / (1 + std::exp(s1 - s0)), a1 = 1 - a0;
  double fc[2];
  for (int j = 0; j < 2; ++j) {
    const double pooled = a0 * h[0][j] + a1 * h[1][j];
    const double r0 = h[0][j] + pooled, r1 = h[1][j] + pooled;
    fc[j] = 0.5 * (r0 + r1) + std::max(r0, r1);
  }

  Graph<double> g;
  auto enc = encode_class_semantics(g, graph, f.p, nn::ForwardContext{});
  EXPECT_NEAR(enc.attention[0], a0, 1e-12);
  EXPECT_NEAR(enc.attention[1], a1, 1e-12);
  EXPECT_NEAR(enc.pooled.value()[0], fc[0], 1e-12);
  EXPECT_NEAR(enc.pooled.value()[1], fc[1], 1e-12);
}

TEST(ClassSemantics, AttentionIsADistribution) {
  EsemFixture f(tiny_config());
  const auto set = hashed_set(5, 4);
  for (const auto& cls : set.classes) {
    Graph<double> g;
    auto enc = encode_class_semantics(g, build_class_graph<double>(cls), f.p, nn::ForwardContext{});
    double sum = 0;
    for (double a : enc.attention.values()) {
      EXPECT_GE(a, 0.0);
      sum += a;
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(ClassSemantics, InvariantToLexiconOrder) {
  RunConfig c = tiny_config();
  nn::ParamStore<float> store(c.seed);
  auto p = make_esem_params(store, c);
  const auto set = hashed_set(5, 5);
  LexiconClass shuffled = set.classes[0];
  std::reverse(shuffled.lexicons.begin(), shuffled.lexicons.end());
  std::swap(shuffled.lexicons[0], shuffled.lexicons[2]);
  Graph<float> g;
  auto a = encode_class_semantics(g, build_class_graph<float>(set.classes[0]), p, nn::ForwardContext{});
  auto b = encode_class_semantics(g, build_class_graph<float>(shuffled), p, nn::ForwardContext{});
  EXPECT_LE(max_abs_diff(a.pooled.value(), b.pooled.value()), 1e-5);
}

TEST(ClassSemantics, ConcatPoolStacksMeanAndMax) {
  RunConfig c = tiny_config();
  c.class_pool = "concat";
  EsemFixture f(c);
  EXPECT_EQ(class_width(f.p), 2 * f.p.d_h);
  Graph<double> g;
  auto enc = encode_class_semantics(g, build_class_graph<double>(hashed_set(5, 3).classes[1]), f.p,
                                    nn::ForwardContext{});
  ASSERT_EQ(enc.pooled.cols(), 12u);
  // recompute h = H + Σ a_i H_i from the exposed nodes and attention
  const auto& H = enc.nodes.value();
  std::vector<double> s(6, 0.0);
  for (std::size_t i = 0; i < H.rows(); ++i)
    for (std::size_t j = 0; j < 6; ++j) s[j] += enc.attention[i] * H(i, j);
  for (std::size_t j = 0; j < 6; ++j) {
    double mean = 0, mx = -INFINITY;
    for (std::size_t i = 0; i < H.rows(); ++i) {
      mean += H(i, j) + s[j];
      mx = std::max(mx, H(i, j) + s[j]);
    }
    mean /= static_cast<double>(H.rows());
    EXPECT_NEAR(enc.pooled.value()[j], mean, 1e-12);
    EXPECT_NEAR(enc.pooled.value()[6 + j], mx, 1e-12);
  }
}

// ---- semantic assembly ------------------------------------------------------

std::array<Var<double>, kNumClasses> class_vars(Graph<double>& g, std::uint64_t seed, std::size_t w) {
  return {g.constant(random_tensor({1, w}, seed)), g.constant(random_tensor({1, w}, seed + 1)),
          g.constant(random_tensor({1, w}, seed + 2))};
}

TEST(SemanticRep, ZeroClassVectorsGiveTheBias) {
  EsemFixture f(tiny_config());
  f.p.semantic_head.bias->value = random_tensor({1, 6}, 9);
  Graph<double> g;
  std::array<Var<double>, kNumClasses> zeros{g.constant(Tensor<double>({1, 6})), g.constant(Tensor<double>({1, 6})),
                                             g.constant(Tensor<double>({1, 6}))};
  EXPECT_EQ(max_abs_diff(assemble_semantic_rep(zeros, f.p).value(), f.p.semantic_head.bias->value), 0.0);
}

TEST(SemanticRep, MatchesLinearOracleAndDependsOnClassOrder) {
  EsemFixture f(tiny_config());
  f.p.semantic_head.bias->value = random_tensor({1, 6}, 4);
  Graph<double> g;
  auto cls = class_vars(g, 21, 6);
  const auto ft = assemble_semantic_rep(cls, f.p).value();
  M x(1);
  for (const auto& c : cls)
    for (double v : c.value().values()) x[0].push_back(v);
  const M expected = affine(x, *f.p.semantic_head.weight, f.p.semantic_head.bias);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(ft[j], expected[0][j], 1e-12);

  std::array<Var<double>, kNumClasses> swapped{cls[2], cls[1], cls[0]};
  EXPECT_GT(max_abs_diff(assemble_semantic_rep(swapped, f.p).value(), ft), 1e-6);
}

TEST(SemanticRep, LabelLookupProjectsOnlyThatClass) {
  EsemFixture f(tiny_config());
  f.p.semantic_head.bias->value = random_tensor({1, 6}, 5);
  Graph<double> g;
  auto cls = class_vars(g, 31, 6);
  const auto neg = class_semantic_for_label(cls, 2, f.p).value();
  const auto& W = f.p.semantic_head.weight->value;  // 18×6
  for (std::size_t j = 0; j < 6; ++j) {
    double v = f.p.semantic_head.bias->value[j];
    for (std::size_t k = 0; k < 6; ++k) v += cls[2].value()[k] * W(12 + k, j);
    EXPECT_NEAR(neg[j], v, 1e-12);
  }
  EXPECT_EQ(max_abs_diff(class_semantic_for_label(cls, 0, f.p).value(),
                         class_semantic_for_label(cls, 0, f.p).value()),
            0.0);
  EXPECT_THROW(class_semantic_for_label(cls, 3, f.p), ContractError);
  EXPECT_THROW(class_semantic_for_label(cls, -1, f.p), ContractError);
}

// ---- VCEM -------------------------------------------------------------------

struct VcemFixture {
  explicit VcemFixture(RunConfig c) : cfg(std::move(c)), store(cfg.seed), p(make_vcem_params(store, cfg)) {
    randomize(store, 77);
  }
  RunConfig cfg;
  nn::ParamStore<double> store;
  VcemParams<double> p;
};

M ref_cam(const M& scene, const M& faces, const std::vector<int>& mask, const VcemParams<double>& p) {
  M rows = scene;
  rows.insert(rows.end(), faces.begin(), faces.end());
  const M q = mm(rows, to_m(p.w_q->value));
  const M k = mm(faces, to_m(p.w_k->value));
  const M v = mm(faces, to_m(p.w_v->value));
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.hidden));
  M out(rows.size(), std::vector<double>(p.hidden, 0.0));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<double> w(faces.size(), 0.0);
    double z = 0;
    for (std::size_t j = 0; j < faces.size(); ++j) {
      if (!mask[j]) continue;
      double dot = 0;
      for (std::size_t c = 0; c < p.hidden; ++c) dot += q[i][c] * k[j][c];
      w[j] = std::exp(dot * scale);
      z += w[j];
    }
    for (std::size_t j = 0; j < faces.size(); ++j)
      for (std::size_t c = 0; c < p.hidden; ++c) out[i][c] += w[j] / z * v[j][c];
  }
  return out;
}

TEST(Cam, SingleFaceGivesItsValueProjectionOnEveryRow) {
  VcemFixture f(tiny_config());
  Graph<double> g;
  auto face = g.constant(random_tensor({1, 6}, 2));
  auto out = cam_cross_attention(g.constant(random_tensor({1, 6}, 3)), face, {1}, f.p).value();
  const M v = mm(to_m(face.value()), to_m(f.p.w_v->value));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(out(r, c), v[0][c], 1e-12);
}

TEST(Cam, IdenticalFacesGiveTheSharedValueProjection) {
  VcemFixture f(tiny_config());
  Graph<double> g;
  const auto one = random_tensor({1, 6}, 4);
  auto faces = g.constant(two_rows(one));
  Tensor<double> weights;
  auto out = cam_cross_attention(g.constant(random_tensor({1, 6}, 5)), faces, {1, 1}, f.p, &weights).value();
  const M v = mm(to_m(one), to_m(f.p.w_v->value));
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_NEAR(weights(r, 0), 0.5, 1e-12);
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(out(r, c), v[0][c], 1e-12);
  }
}

TEST(Cam, TwoFacesTwoDimsMatchDenseOracle) {
  RunConfig c = tiny_config(2);
  c.heads = 1;
  VcemFixture f(c);
  f.p.w_q->value = Tensor<double>::matrix({{0.5, -0.2}, {0.1, 0.3}});
  f.p.w_k->value = Tensor<double>::matrix({{0.4, 0.0}, {-0.3, 0.2}});
  f.p.w_v->value = Tensor<double>::matrix({{1.0, 0.5}, {-0.5, 2.0}});
  const M scene{{1.0, -1.0}}, faces{{0.5, 0.25}, {-1.0, 2.0}};
  Graph<double> g;
  auto out = cam_cross_attention(g.constant(from_m(scene)), g.constant(from_m(faces)), {1, 1}, f.p).value();
  const M expected = ref_cam(scene, faces, {1, 1}, f.p);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t col = 0; col < 2; ++col) EXPECT_NEAR(out(r, col), expected[r][col], 1e-12);
}

TEST(Cam, MaskedFacesAreIgnoredAndRowsSumToOne) {
  VcemFixture f(tiny_config());
  Graph<double> g;
  const auto faces = random_tensor({3, 6}, 8);
  Tensor<double> weights;
  auto out = cam_cross_attention(g.constant(random_tensor({1, 6}, 9)), g.constant(faces), {1, 0, 1}, f.p, &weights);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(weights(r, 1), 0.0);
    EXPECT_NEAR(weights(r, 0) + weights(r, 1) + weights(r, 2), 1.0, 1e-6);
  }
  const M expected = ref_cam(to_m(random_tensor({1, 6}, 9)), to_m(faces), {1, 0, 1}, f.p);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(out.value()(r, c), expected[r][c], 1e-12);
}

TEST(Cam, NoValidFaceIsAnInvalidMask) {
  VcemFixture f(tiny_config());
  Graph<double> g;
  EXPECT_THROW(cam_cross_attention(g.constant(random_tensor({1, 6}, 1)), g.constant(random_tensor({2, 6}, 2)),
                                   {0, 0}, f.p),
               InvalidMaskError);
}

TEST(ScaleGates, ZeroGateWeightsGiveOneHalf) {
  VcemFixture f(tiny_config(6, 1));
  f.p.gate.weight->value = Tensor<double>({6, 1});
  Graph<double> g;
  auto h = g.constant(random_tensor({3, 6}, 3));
  std::vector<Tensor<double>> gates;
  auto v = multiscale_gate_fuse<double>({h}, g.constant(random_tensor({1, 6}, 4)), g.constant(random_tensor({2, 6}, 5)),
                                        {1, 1}, f.p, &gates)
               .value();
  for (double w : gates[0].values()) EXPECT_EQ(w, 0.5);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], 0.5 * h.value()[i]);
}

TEST(ScaleGates, IdenticalScalesDoubleTheGatedMap) {
  VcemFixture f(tiny_config(6, 2));
  Graph<double> g;
  const auto scene = random_tensor({1, 6}, 6);
  auto scenes = g.constant(two_rows(scene));
  auto faces = g.constant(random_tensor({2, 6}, 7));
  auto h = g.constant(random_tensor({3, 6}, 8));
  std::vector<Tensor<double>> gates;
  auto v = multiscale_gate_fuse<double>({h, h}, scenes, faces, {1, 1}, f.p, &gates).value();
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(v(r, c), 2.0 * gates[0][r] * h.value()(r, c), 1e-12);
}

TEST(ScaleGates, TwoScalesMatchExplicitLoop) {
  RunConfig c = tiny_config(2, 2);
  c.heads = 1;
  VcemFixture f(c);
  const M scenes = to_m(random_tensor({2, 2}, 11)), faces = to_m(random_tensor({2, 2}, 12));
  const M h0 = to_m(random_tensor({3, 2}, 13)), h1 = to_m(random_tensor({3, 2}, 14));
  Graph<double> g;
  auto v = multiscale_gate_fuse<double>({g.constant(from_m(h0)), g.constant(from_m(h1))}, g.constant(from_m(scenes)),
                                        g.constant(from_m(faces)), {1, 1}, f.p)
               .value();
  const auto& w = f.p.gate.weight->value;
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t col = 0; col < 2; ++col) {
      double expect = 0;
      for (std::size_t k = 0; k < 2; ++k) {
        const auto& row = r == 0 ? scenes[k] : faces[r - 1];
        const double gate = sigmoid(row[0] * w(0, 0) + row[1] * w(1, 0));
        expect += gate * (k == 0 ? h0 : h1)[r][col];
      }
      EXPECT_NEAR(v(r, col), expect, 1e-12);
    }
  }
}

TEST(ScaleGates, StrictlyInsideTheUnitInterval) {
  VcemFixture f(tiny_config(6, 3));
  Graph<double> g;
  std::vector<Tensor<double>> gates;
  auto h = g.constant(random_tensor({3, 6}, 1));
  multiscale_gate_fuse<double>({h, h, h}, g.constant(random_tensor({3, 6}, 2)), g.constant(random_tensor({2, 6}, 3)),
                               {1, 1}, f.p, &gates);
  for (const auto& t : gates)
    for (double w : t.values()) {
      EXPECT_GT(w, 0.0);
      EXPECT_LT(w, 1.0);
    }
}

TEST(ScaleGates, PerScaleModeSharesOneGate) {
  RunConfig c = tiny_config(6, 2);
  c.gate_mode = "per_scale";
  VcemFixture f(c);
  Graph<double> g;
  auto w = scale_gates(g.constant(random_tensor({1, 6}, 1)), g.constant(random_tensor({3, 6}, 2)), {1, 1, 0}, f.p)
               .value();
  ASSERT_EQ(w.rows(), 4u);
  for (std::size_t r = 1; r < 4; ++r) EXPECT_EQ(w[r], w[0]);
}

TEST(ScaleGates, CountMismatchIsAContractError) {
  VcemFixture f(tiny_config(6, 2));
  Graph<double> g;
  auto h = g.constant(random_tensor({3, 6}, 1));
  EXPECT_THROW(multiscale_gate_fuse<double>({h}, g.constant(random_tensor({2, 6}, 2)),
                                            g.constant(random_tensor({2, 6}, 3)), {1, 1}, f.p),
               ContractError);
}

TEST(FaceSceneMix, RowCountAndEncoderOracle) {
  VcemFixture f(tiny_config(6, 2));
  const M vf = to_m(random_tensor({3, 6}, 1)), scenes = to_m(random_tensor({2, 6}, 2));
  Graph<double> g;
  auto out = face_scene_mix(g.constant(from_m(vf)), g.constant(from_m(scenes)), {1, 0}, f.p, nn::ForwardContext{})
                 .value();
  ASSERT_EQ(out.rows(), 5u);
  M tokens = vf;
  tokens.insert(tokens.end(), scenes.begin(), scenes.end());
  const M expected = ref_encoder(tokens, {1, 1, 0, 1, 1}, f.p.mixer);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(out(r, c), expected[r][c], 1e-10);
}

TEST(FaceSceneMix, PermutingFaceRowsPermutesOutputs) {
  VcemFixture f(tiny_config(6, 2));
  M vf = to_m(random_tensor({3, 6}, 5));
  const auto scenes = random_tensor({2, 6}, 6);
  Graph<double> g;
  auto a = face_scene_mix(g.constant(from_m(vf)), g.constant(scenes), {1, 1}, f.p, nn::ForwardContext{}).value();
  std::swap(vf[1], vf[2]);
  auto b = face_scene_mix(g.constant(from_m(vf)), g.constant(scenes), {1, 1}, f.p, nn::ForwardContext{}).value();
  for (std::size_t c = 0; c < 6; ++c) {
    EXPECT_NEAR(a(1, c), b(2, c), 1e-12);
    EXPECT_NEAR(a(2, c), b(1, c), 1e-12);
    EXPECT_NEAR(a(0, c), b(0, c), 1e-12);
  }
}

TEST(VisualFuse, NoObjectsPoolsTheMixedRowsOnly) {
  VcemFixture f(tiny_config());
  const M vfs = to_m(random_tensor({4, 6}, 3));
  Graph<double> g;
  auto fv = visual_fuse(g.constant(from_m(vfs)), {1, 1, 0, 1}, g.constant(Tensor<double>({0, 6})), {}, f.p,
                        nn::ForwardContext{})
                .value();
  const auto expected = ref_masked_mean(ref_stack(vfs, {1, 1, 0, 1}, f.p.fusion), {1, 1, 0, 1});
  for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(fv[c], expected[c], 1e-10);
}

TEST(VisualFuse, ThreeRowMicroCaseMatchesComposedOracle) {
  VcemFixture f(tiny_config());
  const M vfs = to_m(random_tensor({2, 6}, 4)), objects = to_m(random_tensor({1, 6}, 5));
  Graph<double> g;
  auto fv = visual_fuse(g.constant(from_m(vfs)), {1, 1}, g.constant(from_m(objects)), {1}, f.p, nn::ForwardContext{})
                .value();
  M tokens = vfs;
  tokens.push_back(objects[0]);
  const auto expected = ref_masked_mean(ref_stack(tokens, {1, 1, 1}, f.p.fusion), {1, 1, 1});
  for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(fv[c], expected[c], 1e-10);
}

TEST(VisualFuse, ObjectOrderDoesNotMatter) {
  VcemFixture f(tiny_config());
  M objects = to_m(random_tensor({3, 6}, 6));
  const auto vfs = random_tensor({3, 6}, 7);
  Graph<double> g;
  auto a = visual_fuse(g.constant(vfs), {1, 1, 1}, g.constant(from_m(objects)), {1, 1, 1}, f.p, nn::ForwardContext{});
  std::rotate(objects.begin(), objects.begin() + 1, objects.end());
  auto b = visual_fuse(g.constant(vfs), {1, 1, 1}, g.constant(from_m(objects)), {1, 1, 1}, f.p, nn::ForwardContext{});
  EXPECT_LE(max_abs_diff(a.value(), b.value()), 1e-12);
}

TEST(CueLogits, PoolingIdentitiesAndBias) {
  VcemFixture f(tiny_config());
  Graph<double> g;
  const auto face = random_tensor({1, 6}, 3);
  VisualCues<double> one{g.constant(face), g.constant(Tensor<double>({0, 6})), g.constant(Tensor<double>({2, 6})), {1}, {}};
  auto l = cue_logits(one, f.p);
  const M expect_face = affine(to_m(face), *f.p.face_head.weight, f.p.face_head.bias);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(l.face.value()[c], expect_face[0][c], 1e-12);
    EXPECT_EQ(l.scene.value()[c], f.p.scene_head.bias->value[c]);  // zero scenes
    EXPECT_EQ(l.object.value()[c], 0.0);
  }
  EXPECT_FALSE(l.has_objects);

  const auto faces = random_tensor({3, 6}, 4);
  VisualCues<double> two{g.constant(faces), g.constant(random_tensor({1, 6}, 5)), g.constant(random_tensor({2, 6}, 6)),
                         {1, 0, 1}, {1}};
  auto l2 = cue_logits(two, f.p);
  M mean(1, std::vector<double>(6));
  for (std::size_t c = 0; c < 6; ++c) mean[0][c] = 0.5 * (faces(0, c) + faces(2, c));
  const M expect = affine(mean, *f.p.face_head.weight, f.p.face_head.bias);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(l2.face.value()[c], expect[0][c], 1e-12);
  EXPECT_TRUE(l2.has_objects);
}

VisualCues<float> float_cues(Graph<float>& g, const Tensor<double>& faces, const Tensor<double>& objects,
                             const Tensor<double>& scenes, RowMask fm, RowMask om) {
  return {g.constant(faces.cast<float>()), g.constant(objects.cast<float>()), g.constant(scenes.cast<float>()),
          std::move(fm), std::move(om)};
}

TEST(VcemForward, InvariantToFaceAndObjectOrderAt32Bit) {
  RunConfig c = tiny_config(8, 2);
  nn::ParamStore<float> store(c.seed);
  auto p = make_vcem_params(store, c);
  const auto faces = random_tensor({3, 8}, 1), objects = random_tensor({2, 8}, 2), scenes = random_tensor({2, 8}, 3);
  Graph<float> g;
  auto base = vcem_forward(float_cues(g, faces, objects, scenes, {1, 1, 1}, {1, 1}), p, nn::ForwardContext{}).value();

  M f = to_m(faces), o = to_m(objects);
  std::swap(f[0], f[2]);
  std::swap(o[0], o[1]);
  auto perm = vcem_forward(float_cues(g, from_m(f), from_m(o), scenes, {1, 1, 1}, {1, 1}), p, nn::ForwardContext{})
                  .value();
  EXPECT_LE(max_abs_diff(base, perm), 1e-5);
}

TEST(VcemForward, PaddingRowsDoNotChangeTheOutput) {
  RunConfig c = tiny_config(8, 2);
  nn::ParamStore<float> store(c.seed);
  auto p = make_vcem_params(store, c);
  const auto faces = random_tensor({2, 8}, 4), objects = random_tensor({1, 8}, 5), scenes = random_tensor({2, 8}, 6);
  Graph<float> g;
  auto alone = vcem_forward(float_cues(g, faces, objects, scenes, {1, 1}, {1}), p, nn::ForwardContext{}).value();
  M f = to_m(faces), o = to_m(objects);
  f.push_back(std::vector<double>(8, 0.0));
  f.push_back(std::vector<double>(8, 0.0));
  o.push_back(std::vector<double>(8, 0.0));
  auto padded = vcem_forward(float_cues(g, from_m(f), from_m(o), scenes, {1, 1, 0, 0}, {1, 0}), p, nn::ForwardContext{})
                    .value();
  EXPECT_LE(max_abs_diff(alone, padded), 1e-5);
}

// ---- VSIM -------------------------------------------------------------------

struct VsimFixture {
  explicit VsimFixture(std::size_t hidden)
      : cfg(tiny_config(hidden)), store(cfg.seed), p(make_vsim_params(store, cfg)) {
    // identity projection so the similarity is computed on the raw inputs
    Tensor<double> eye({hidden, hidden});
    for (std::size_t i = 0; i < hidden; ++i) eye(i, i) = 1.0;
    p.visual_proj.weight->value = eye;
  }
  RunConfig cfg;
  nn::ParamStore<double> store;
  VsimParams<double> p;
};

TEST(SimStatsUpdate, FirstCopiesThenBlendsAndFloorsStd) {
  SimStats s;
  s.update(0.4, 0.2);
  EXPECT_EQ(s.mean, 0.4);
  EXPECT_EQ(s.std, 0.2);
  s.update(0.0, 0.0);
  EXPECT_NEAR(s.mean, 0.36, 1e-15);
  EXPECT_NEAR(s.std, 0.9 * 0.2 + 0.1 * 1e-6, 1e-15);
  SimStats z;
  z.update(1.0, 0.0);
  EXPECT_EQ(z.std, 1e-6);
  EXPECT_EQ(z.count, 1u);
}

TEST(SimilarityFuse, IdenticalFeaturesHaveUnitSimilarity) {
  VsimFixture f(4);
  Graph<double> g;
  const auto v = random_tensor({1, 4}, 2);
  SimStats stats;
  auto out = similarity_fuse(g.constant(v), g.constant(v), stats, f.p, nn::ForwardContext{});
  EXPECT_NEAR(out.sims[0], 1.0, 1e-12);
}

TEST(SimilarityFuse, EqualBatchSimilaritiesGiveNeutralGates) {
  VsimFixture f(4);
  Graph<double> g;
  const auto v = random_tensor({1, 4}, 3);
  const auto s = random_tensor({1, 4}, 4);
  auto visual = g.constant(two_rows(v));
  SimStats stats;
  auto out = similarity_fuse(visual, g.constant(s), stats, f.p, nn::ForwardContext{true, 0.0, nullptr});
  EXPECT_EQ(out.gates[0], 0.5);
  EXPECT_EQ(out.gates[1], 0.5);
}

TEST(SimilarityFuse, BatchOfPointTwoAndPointEightStandardizesToMinusOnePlusOne) {
  VsimFixture f(2);
  Graph<double> g;
  auto visual = g.constant(Tensor<double>::matrix({{0.2, std::sqrt(1 - 0.04)}, {0.8, 0.6}}));
  SimStats stats;
  auto out = similarity_fuse(visual, g.constant(Tensor<double>::row({1.0, 0.0})), stats, f.p,
                             nn::ForwardContext{true, 0.0, nullptr});
  EXPECT_NEAR(out.sims[0], 0.2, 1e-12);
  EXPECT_NEAR(out.sims[1], 0.8, 1e-12);
  EXPECT_NEAR(out.gates[0], 0.2689414, 1e-6);
  EXPECT_NEAR(out.gates[1], 0.7310586, 1e-6);
  // stats were folded forward from this batch
  EXPECT_EQ(stats.count, 1u);
  EXPECT_NEAR(stats.mean, 0.5, 1e-12);
  EXPECT_NEAR(stats.std, 0.3, 1e-12);
}

TEST(SimilarityFuse, EvalUsesRunningStatsAndLeavesThemAlone) {
  VsimFixture f(2);
  Graph<double> g;
  SimStats stats;
  stats.mean = 0.5;
  stats.std = 0.25;
  stats.count = 3;
  auto visual = g.constant(Tensor<double>::row({0.75, std::sqrt(1 - 0.5625)}));
  auto out = similarity_fuse(visual, g.constant(Tensor<double>::row({1.0, 0.0})), stats, f.p, nn::ForwardContext{});
  EXPECT_NEAR(out.gates[0], sigmoid(1.0), 1e-7);
  EXPECT_EQ(stats.count, 3u);
  EXPECT_EQ(stats.mean, 0.5);
}

TEST(SimilarityFuse, TokensAreTheGateTimesTheProjectedPair) {
  VsimFixture f(4);
  randomize(f.store, 3);
  Graph<double> g;
  const auto visual = random_tensor({3, 4}, 5);
  const auto semantic = random_tensor({1, 4}, 6);
  SimStats stats;
  auto out = similarity_fuse(g.constant(visual), g.constant(semantic), stats, f.p, nn::ForwardContext{true, 0.0, nullptr});
  const M proj = affine(to_m(visual), *f.p.visual_proj.weight, f.p.visual_proj.bias);
  for (std::size_t n = 0; n < 3; ++n) {
    const double gate = out.gates[n];
    EXPECT_GT(gate, 0.0);
    EXPECT_LT(gate, 1.0);
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_NEAR(out.tokens[n].value()(0, c), gate * proj[n][c], 1e-12);
      EXPECT_NEAR(out.tokens[n].value()(1, c), gate * semantic[c], 1e-12);
    }
  }
}

TEST(SimilarityFuse, DegenerateSemanticVectorRejected) {
  VsimFixture f(4);
  Graph<double> g;
  SimStats stats;
  EXPECT_THROW(similarity_fuse(g.constant(random_tensor({2, 4}, 1)), g.constant(Tensor<double>({1, 4})), stats, f.p,
                               nn::ForwardContext{}),
               DegenerateVectorError);
}

TEST(SimilarityFuse, EvalIsBitwiseRepeatable) {
  VsimFixture f(4);
  randomize(f.store, 8);
  SimStats stats;
  stats.update(0.1, 0.3);
  auto run = [&] {
    Graph<double> g(ad::GradMode::kDisabled);
    auto fused = similarity_fuse(g.constant(random_tensor({2, 4}, 9)), g.constant(random_tensor({1, 4}, 10)), stats,
                                 f.p, nn::ForwardContext{});
    return group_encode(fused.tokens[1], f.p, nn::ForwardContext{}).logits.value();
  };
  const auto a = run();
  const auto b = run();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(GroupEncode, IdenticalTokensGiveThePerTokenOutput) {
  VsimFixture f(4);
  randomize(f.store, 4);
  const auto t = random_tensor({1, 4}, 11);
  Graph<double> g;
  auto two = g.constant(two_rows(t));
  auto out = group_encode(two, f.p, nn::ForwardContext{});
  const M single = ref_stack(to_m(t), {1}, f.p.fusion);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out.group.value()[c], single[0][c], 1e-10);
}

TEST(GroupEncode, TokenSwapInvariantAndMatchesOracle) {
  VsimFixture f(4);
  randomize(f.store, 5);
  M tokens = to_m(random_tensor({2, 4}, 12));
  Graph<double> g;
  auto a = group_encode(g.constant(from_m(tokens)), f.p, nn::ForwardContext{});
  const auto pooled = ref_masked_mean(ref_stack(tokens, {1, 1}, f.p.fusion), {1, 1});
  const M logits = affine(M{pooled}, *f.p.group_head.weight, f.p.group_head.bias);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(a.group.value()[c], pooled[c], 1e-10);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(a.logits.value()[c], logits[0][c], 1e-10);
  std::swap(tokens[0], tokens[1]);
  auto b = group_encode(g.constant(from_m(tokens)), f.p, nn::ForwardContext{});
  EXPECT_LE(max_abs_diff(a.group.value(), b.group.value()), 1e-12);
}

}  // namespace
}  // namespace gemo::model
