// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0
//
// Regenerates assets/lexicons/default.json. Each word vector leans toward
// its class direction so the per-class similarity graphs carry real
// structure; every vector comes from the word's hash embedding, so the
// output is stable across runs and platforms.
//
//   gemo_make_lexicons assets/lexicons/default.json [dim]

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>


#include "gemo/model/lexicon.hpp"

namespace {

const std::vector<std::vector<std::string>> kWords = {
    {"Joy", "Unity", "Solidarity", "Happiness", "Celebration", "Excitement", "Cheerfulness", "Enthusiasm",
     "Harmony", "Delight", "Pride", "Gratitude"},
    {"Calmness", "Indifference", "Composure", "Attentiveness", "Routine", "Stillness", "Neutrality", "Patience",
     "Formality", "Reserve", "Contemplation", "Detachment"},
    {"Sadness", "Anger", "Frustration", "Grief", "Fear", "Anxiety", "Hostility", "Tension", "Despair",
     "Disappointment", "Conflict", "Distress"}};

std::vector<double> lean(const std::vector<double>& base, const std::vector<double>& own) {
  std::vector<double> v(base.size());
  double norm = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = 0.8 * base[i] + 0.6 * own[i];
    norm += v[i] * v[i];
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x = std::round(x / norm * 1e6) / 1e6;
  return v;
}

std::string row(const std::vector<double>& v) {
  std::string s = "[";
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.6f", i ? ", " : "", v[i]);
    s += buf;
  }
  return s + "]";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: gemo_make_lexicons OUT.json [dim]\n";
    return 1;
  }
  const std::size_t dim = argc > 2 ? std::stoul(argv[2]) : 50;
  std::ofstream out(argv[1]);
  if (!out) {
    std::cerr << "cannot write " << argv[1] << "\n";
    return 2;
  }
  out << "{\n";
  for (std::size_t c = 0; c < gemo::model::kNumClasses; ++c) {
    const std::string title(gemo::model::kClassTitles[c]);
    const auto base = gemo::model::hash_embedding(title, dim);
    out << "  \"" << gemo::model::kClassKeys[c] << "\": {\n";
    out << "    \"class_word\": \"" << title << "\",\n";
    out << "    \"class_embedding\": " << row(lean(base, base)) << ",\n";
    out << "    \"lexicons\": [\n";
    for (std::size_t i = 0; i < kWords[c].size(); ++i) {
      const auto& w = kWords[c][i];
      out << "      {\"word\": \"" << w << "\", \"embedding\": " << row(lean(base, gemo::model::hash_embedding(w, dim)))
          << "}" << (i + 1 < kWords[c].size() ? "," : "") << "\n";
    }
    out << "    ]\n  }" << (c + 1 < gemo::model::kNumClasses ? "," : "") << "\n";
  }
  out << "}\n";
  return 0;
}
