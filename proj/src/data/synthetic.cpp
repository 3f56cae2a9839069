// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/data/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gemo/errors.hpp"
#include "gemo/rng.hpp"

namespace gemo::data {

namespace fs = std::filesystem;

void SyntheticSpec::validate() const {
  if (!(margin > 0.0)) throw ConfigError("synthetic: margin must be positive");
  if (!(noise >= 0.0)) throw ConfigError("synthetic: noise must be nonnegative");
  if (dim == 0) throw ConfigError("synthetic: dim must be positive");
  if (scales == 0) throw ConfigError("synthetic: scales must be positive");
  if (min_faces == 0 || max_faces < min_faces) throw ConfigError("synthetic: need 1 <= min_faces <= max_faces");
  if (max_objects < min_objects) throw ConfigError("synthetic: need min_objects <= max_objects");
  if (format != "json" && format != "bin") throw ConfigError("synthetic: format must be json or bin");
}

std::size_t Manifest::total() const {
  std::size_t n = 0;
  for (const auto& [name, paths] : splits) n += paths.size();
  return n;
}

const std::vector<std::string>& Manifest::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end()) throw IoError("manifest has no split '" + name + "'");
  return it->second;
}

std::vector<std::vector<double>> class_anchors(const SyntheticSpec& spec) {
  Rng rng(mix_seed(spec.seed, hash_text("anchors")));
  std::vector<std::vector<double>> anchors(3, std::vector<double>(spec.dim));
  for (auto& a : anchors) {
    double norm = 0.0;
    for (auto& x : a) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : a) x = x / norm * spec.margin;
  }
  return anchors;
}

std::vector<FeatureBundle> synthesize_split(const SyntheticSpec& spec, const std::string& split,
                                            std::size_t count) {
  spec.validate();
  const auto anchors = class_anchors(spec);
  Rng rng(mix_seed(spec.seed, hash_text(split)));
  auto rows = [&](std::size_t n, int label) {
    Tensor<float> m({n, spec.dim});
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < spec.dim; ++c)
        m(r, c) = static_cast<float>(anchors[static_cast<std::size_t>(label)][c] + spec.noise * rng.normal());
    return m;
  };
  std::vector<FeatureBundle> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    FeatureBundle b;
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%05zu", split.c_str(), i);
    b.id = id;
    b.label = static_cast<int>(i % 3);
    const std::size_t faces = spec.min_faces + rng.below(spec.max_faces - spec.min_faces + 1);
    const std::size_t objects = spec.min_objects + rng.below(spec.max_objects - spec.min_objects + 1);
    b.faces = rows(faces, b.label);
    b.objects = rows(objects, b.label);
    b.scenes = rows(spec.scales, b.label);
    out.push_back(std::move(b));
  }
  return out;
}

Manifest generate_synthetic_dataset(const SyntheticSpec& spec, const std::string& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());
  Manifest m;
  m.root = fs::absolute(out_dir).lexically_normal().string();
  nlohmann::json doc;
  doc["version"] = 1;
  doc["spec"] = {{"train", spec.train}, {"val", spec.val}, {"test", spec.test},
                 {"dim", spec.dim}, {"scales", spec.scales}, {"margin", spec.margin},
                 {"noise", spec.noise}, {"seed", spec.seed}};
  doc["splits"] = nlohmann::json::object();
  const std::pair<const char*, std::size_t> splits[] = {{"train", spec.train}, {"val", spec.val}, {"test", spec.test}};
  for (const auto& [name, count] : splits) {
    fs::create_directories(fs::path(out_dir) / name, ec);
    if (ec) throw IoError("cannot create split directory: " + ec.message());
    nlohmann::json list = nlohmann::json::array();
    for (const auto& b : synthesize_split(spec, name, count)) {
      const std::string rel = std::string(name) + "/" + b.id + "." + spec.format;
      save_bundle(b, (fs::path(out_dir) / rel).string());
      list.push_back(rel);
      m.splits[name].push_back((fs::path(m.root) / rel).string());
    }
    if (count == 0) m.splits[name] = {};
    doc["splits"][name] = std::move(list);
  }
  const auto manifest_path = fs::path(out_dir) / "manifest.json";
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot write '" + manifest_path.string() + "'");
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("write failed for '" + manifest_path.string() + "'");
  return m;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("manifest '" + path + "': " + e.what());
  }
  if (!doc.is_object() || !doc.contains("splits") || !doc["splits"].is_object()) {
    throw ParseError("manifest '" + path + "': missing 'splits' object");
  }
  Manifest m;
  const fs::path root = fs::absolute(fs::path(path)).parent_path().lexically_normal();
  m.root = root.string();
  for (const auto& [name, list] : doc["splits"].items()) {
    if (!list.is_array()) throw ParseError("manifest: split '" + name + "' is not an array");
    auto& paths = m.splits[name];
    for (const auto& entry : list) {
      if (!entry.is_string()) throw ParseError("manifest: split '" + name + "' holds a non-string path");
      fs::path p(entry.get<std::string>());
      paths.push_back((p.is_absolute() ? p : root / p).lexically_normal().string());
    }
  }
  return m;
}

std::vector<FeatureBundle> load_split(const Manifest& m, const std::string& split,
                                      const BundleExpectations& expect) {
  std::vector<FeatureBundle> out;
  for (const auto& path : m.split(split)) out.push_back(load_bundle(path, expect));
  return out;
}

}  // namespace gemo::data
