// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/data/lexicon_io.hpp"

#include <fstream>
#include <optional>

#include "gemo/errors.hpp"

namespace gemo::data {

using model::kClassKeys;
using model::kClassTitles;
using model::kNumClasses;

namespace {

std::optional<std::vector<double>> read_vector(const nlohmann::json& j, const std::string& where) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_array()) throw ParseError("lexicons: " + where + " must be an array of numbers");
  std::vector<double> v;
  v.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw ParseError("lexicons: " + where + "[" + std::to_string(i) + "] is not a number");
    }
    v.push_back(j[i].get<double>());
  }
  return v;
}

}  // namespace

model::LexiconSet lexicons_from_json(const nlohmann::json& j, std::size_t fallback_dim) {
  if (!j.is_object()) throw ParseError("lexicons: top level must be an object");
  struct Raw {
    std::string word;
    std::optional<std::vector<double>> embedding;
  };
  std::array<std::string, kNumClasses> class_words;
  std::array<std::optional<std::vector<double>>, kNumClasses> class_vecs;
  std::array<std::vector<Raw>, kNumClasses> entries;
  std::size_t dim = 0;
  auto note_dim = [&](const std::optional<std::vector<double>>& v, const std::string& where) {
    if (!v) return;
    if (dim == 0) dim = v->size();
    if (v->size() != dim || dim == 0) {
      throw ParseError("lexicons: " + where + " has width " + std::to_string(v->size()) + ", expected " +
                       std::to_string(dim));
    }
  };

  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::string key(kClassKeys[c]);
    if (!j.contains(key)) throw ParseError("lexicons: missing class key '" + key + "'");
    const auto& cls = j.at(key);
    if (!cls.is_object()) throw ParseError("lexicons: '" + key + "' must be an object");
    class_words[c] = std::string(kClassTitles[c]);
    if (cls.contains("class_word")) {
      if (!cls["class_word"].is_string()) throw ParseError("lexicons: " + key + ".class_word must be a string");
      class_words[c] = cls["class_word"].get<std::string>();
    }
    if (cls.contains("class_embedding")) {
      class_vecs[c] = read_vector(cls["class_embedding"], key + ".class_embedding");
      note_dim(class_vecs[c], key + ".class_embedding");
    }
    if (!cls.contains("lexicons") || !cls["lexicons"].is_array()) {
      throw ParseError("lexicons: " + key + ".lexicons must be an array");
    }
    const auto& list = cls["lexicons"];
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string where = key + ".lexicons[" + std::to_string(i) + "]";
      const auto& e = list[i];
      Raw raw;
      if (e.is_string()) {
        raw.word = e.get<std::string>();
      } else if (e.is_object()) {
        if (!e.contains("word") || !e["word"].is_string()) throw ParseError("lexicons: " + where + ".word must be a string");
        raw.word = e["word"].get<std::string>();
        if (e.contains("embedding")) {
          raw.embedding = read_vector(e["embedding"], where + ".embedding");
          note_dim(raw.embedding, where + ".embedding");
        }
      } else {
        throw ParseError("lexicons: " + where + " must be an object or a string");
      }
      entries[c].push_back(std::move(raw));
    }
  }

  model::LexiconSet set;
  set.dim = dim ? dim : fallback_dim;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& cls = set.classes[c];
    cls.class_word = class_words[c];
    cls.class_hashed = !class_vecs[c].has_value();
    cls.class_embedding = class_vecs[c] ? *class_vecs[c] : model::hash_embedding(cls.class_word, set.dim);
    for (auto& raw : entries[c]) {
      model::LexiconEntry e;
      e.word = raw.word;
      e.hashed = !raw.embedding.has_value();
      e.embedding = raw.embedding ? std::move(*raw.embedding) : model::hash_embedding(raw.word, set.dim);
      cls.lexicons.push_back(std::move(e));
    }
  }
  model::validate_lexicons(set);
  return set;
}

model::LexiconSet load_lexicons(const std::string& path, std::size_t fallback_dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("lexicon file '" + path + "': " + e.what());
  }
  try {
    return lexicons_from_json(j, fallback_dim);
  } catch (const ParseError& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

nlohmann::json lexicons_to_json(const model::LexiconSet& set) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& cls = set.classes[c];
    nlohmann::json entry;
    entry["class_word"] = cls.class_word;
    entry["class_embedding"] = cls.class_embedding;
    entry["lexicons"] = nlohmann::json::array();
    for (const auto& e : cls.lexicons) entry["lexicons"].push_back({{"word", e.word}, {"embedding", e.embedding}});
    j[std::string(kClassKeys[c])] = std::move(entry);
  }
  return j;
}

}  // namespace gemo::data
