// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/model/lexicon.hpp"

#include <cmath>
#include <set>

#include "gemo/errors.hpp"
#include "gemo/rng.hpp"

namespace gemo::model {

std::vector<double> hash_embedding(std::string_view word, std::size_t dim) {
  if (dim == 0) throw ContractError("hash_embedding: zero width");
  Rng rng(hash_text(word));
  std::vector<double> v(dim);
  double norm = 0.0;
  // a Gaussian draw of norm zero is impossible in practice, but loop anyway
  while (norm == 0.0) {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

void validate_lexicons(const LexiconSet& set) {
  if (set.dim == 0) throw ValidationError("lexicons: embedding width is zero");
  auto check_vec = [&](const std::vector<double>& v, const std::string& where) {
    if (v.size() != set.dim) {
      throw ValidationError("lexicons: " + where + " has width " + std::to_string(v.size()) +
                            ", expected " + std::to_string(set.dim));
    }
    for (double x : v)
      if (!std::isfinite(x)) throw ValidationError("lexicons: " + where + " holds a non-finite value");
  };
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& cls = set.classes[c];
    const std::string key(kClassKeys[c]);
    if (cls.lexicons.empty()) throw ValidationError("lexicons: class '" + key + "' is empty");
    check_vec(cls.class_embedding, key + ".class_embedding");
    std::set<std::string> seen;
    for (const auto& e : cls.lexicons) {
      if (e.word.empty()) throw ValidationError("lexicons: empty word in class '" + key + "'");
      if (!seen.insert(e.word).second) {
        throw ValidationError("lexicons: duplicate word '" + e.word + "' in class '" + key + "'");
      }
      check_vec(e.embedding, key + "." + e.word);
    }
  }
}

EmotionTree build_emotion_tree(const LexiconSet& set) {
  validate_lexicons(set);
  EmotionTree tree;
  tree.dim = set.dim;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    tree.classes[c].name = std::string(kClassTitles[c]);
    for (const auto& e : set.classes[c].lexicons) tree.classes[c].leaves.push_back(e.word);
  }
  return tree;
}

std::string render_tree(const EmotionTree& tree) {
  std::string out = tree.root + " (d_e=" + std::to_string(tree.dim) + ")\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& node = tree.classes[c];
    const bool last_class = c + 1 == kNumClasses;
    out += (last_class ? "`-- " : "|-- ") + node.name + " [" + std::to_string(node.leaves.size()) +
           " lexicons]\n";
    for (std::size_t i = 0; i < node.leaves.size(); ++i) {
      out += last_class ? "    " : "|   ";
      out += (i + 1 == node.leaves.size() ? "`-- " : "|-- ") + node.leaves[i] + "\n";
    }
  }
  return out;
}

}  // namespace gemo::model
