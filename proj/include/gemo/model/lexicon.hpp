// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gemo::model {

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<std::string_view, kNumClasses> kClassKeys = {"positive", "neutral",
                                                                         "negative"};
inline constexpr std::array<std::string_view, kNumClasses> kClassTitles = {"Positive", "Neutral",
                                                                           "Negative"};

struct LexiconEntry {
  std::string word;
  std::vector<double> embedding;
  bool hashed = false;  // embedding came from the fallback embedder
};

struct LexiconClass {
  std::string class_word;
  std::vector<double> class_embedding;
  bool class_hashed = false;
  std::vector<LexiconEntry> lexicons;
};

// Classes are indexed by label: 0 positive, 1 neutral, 2 negative.
struct LexiconSet {
  std::size_t dim = 0;
  std::array<LexiconClass, kNumClasses> classes;
};

/// Deterministic stand-in for a word-embedding lookup: a Gaussian vector
/// drawn from a stream seeded by the word text, scaled to unit norm.
std::vector<double> hash_embedding(std::string_view word, std::size_t dim);

// Throws ValidationError on empty classes, duplicate words, width
// disagreements or non-finite values.
void validate_lexicons(const LexiconSet& set);

struct EmotionTree {
  struct ClassNode {
    std::string name;
    std::vector<std::string> leaves;  // file order
  };
  std::string root = "Emotion";
  std::size_t dim = 0;
  std::array<ClassNode, kNumClasses> classes;
};

EmotionTree build_emotion_tree(const LexiconSet& set);

// Indented text rendering, one node per line.
std::string render_tree(const EmotionTree& tree);

}  // namespace gemo::model
