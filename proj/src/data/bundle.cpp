// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/data/bundle.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gemo/errors.hpp"

namespace gemo::data {

namespace {

constexpr char kMagic[4] = {'G', 'E', 'M', 'B'};
constexpr std::uint32_t kBinVersion = 1;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void check_matrix(const Tensor<float>& m, const char* field, std::size_t dim, const std::string& id) {
  if (m.rank() != 2) throw ValidationError("bundle '" + id + "': " + field + " is not a matrix");
  if (m.rows() > 0 && dim && m.cols() != dim) {
    throw ValidationError("bundle '" + id + "': " + field + " width " + std::to_string(m.cols()) +
                          ", expected " + std::to_string(dim));
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m[i])) {
      throw ValidationError("bundle '" + id + "': " + field + " row " + std::to_string(i / m.cols()) +
                            " holds a non-finite value");
    }
  }
}

Tensor<float> matrix_field(const FloatJson& j, const char* field, std::size_t width_hint) {
  if (!j.contains(field)) throw ParseError(std::string("bundle: missing field '") + field + "'");
  const FloatJson& rows = j.at(field);
  if (!rows.is_array()) throw ParseError(std::string("bundle: field '") + field + "' is not an array");
  const std::size_t n = rows.size();
  std::size_t d = n ? 0 : width_hint;
  std::vector<float> data;
  for (std::size_t r = 0; r < n; ++r) {
    const FloatJson& row = rows[r];
    const std::string where = std::string(field) + "[" + std::to_string(r) + "]";
    if (!row.is_array()) throw ParseError("bundle: " + where + " is not an array");
    if (r == 0) d = row.size();
    if (row.size() != d) throw ParseError("bundle: " + where + " has ragged width");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!row[c].is_number()) {
        throw ParseError("bundle: " + where + "[" + std::to_string(c) + "] is not a number");
      }
      data.push_back(row[c].get<float>());
    }
  }
  return Tensor<float>({n, d}, std::move(data));
}

FloatJson matrix_json(const Tensor<float>& m) {
  FloatJson rows = FloatJson::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    FloatJson row = FloatJson::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw ParseError("bundle: truncated binary file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

void put_matrix(std::string& out, const Tensor<float>& m) {
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (float f : m.values()) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

Tensor<float> get_matrix(const std::string& in, std::size_t& pos) {
  const std::size_t rows = get_u32(in, pos);
  const std::size_t cols = get_u32(in, pos);
  std::vector<float> data(rows * cols);
  for (auto& f : data) f = std::bit_cast<float>(get_u32(in, pos));
  return Tensor<float>({rows, cols}, std::move(data));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace

void validate_bundle(const FeatureBundle& b, const BundleExpectations& expect) {
  if (b.label < 0 || b.label > 2) {
    throw ValidationError("bundle '" + b.id + "': label " + std::to_string(b.label) + " outside {0,1,2}");
  }
  if (b.faces.rank() != 2 || b.faces.rows() == 0) throw ValidationError("bundle '" + b.id + "': no faces");
  const std::size_t dim = expect.dim ? expect.dim : b.faces.cols();
  check_matrix(b.faces, "faces", dim, b.id);
  check_matrix(b.objects, "objects", dim, b.id);
  check_matrix(b.scenes, "scenes", dim, b.id);
  if (b.scenes.rows() == 0) throw ValidationError("bundle '" + b.id + "': no scene rows");
  if (expect.scales && b.scenes.rows() != expect.scales) {
    throw ValidationError("bundle '" + b.id + "': " + std::to_string(b.scenes.rows()) +
                          " scene rows, expected " + std::to_string(expect.scales));
  }
}

FeatureBundle bundle_from_json(const FloatJson& j) {
  if (!j.is_object()) throw ParseError("bundle: top level must be an object");
  FeatureBundle b;
  if (!j.contains("id") || !j.at("id").is_string()) throw ParseError("bundle: field 'id' must be a string");
  b.id = j.at("id").get<std::string>();
  if (!j.contains("label") || !j.at("label").is_number_integer()) {
    throw ParseError("bundle: field 'label' must be an integer");
  }
  b.label = j.at("label").get<int>();
  b.faces = matrix_field(j, "faces", 0);
  b.objects = matrix_field(j, "objects", b.faces.cols());
  b.scenes = matrix_field(j, "scenes", b.faces.cols());
  return b;
}

FloatJson bundle_to_json(const FeatureBundle& b) {
  FloatJson j;
  j["id"] = b.id;
  j["label"] = b.label;
  j["faces"] = matrix_json(b.faces);
  j["objects"] = matrix_json(b.objects);
  j["scenes"] = matrix_json(b.scenes);
  return j;
}

void save_bundle(const FeatureBundle& b, const std::string& path) {
  if (ends_with(path, ".bin")) {
    std::string out(kMagic, 4);
    put_u32(out, kBinVersion);
    put_u32(out, static_cast<std::uint32_t>(b.label));
    put_u32(out, static_cast<std::uint32_t>(b.id.size()));
    out += b.id;
    put_matrix(out, b.faces);
    put_matrix(out, b.objects);
    put_matrix(out, b.scenes);
    write_file(path, out);
  } else {
    write_file(path, bundle_to_json(b).dump() + "\n");
  }
}

FeatureBundle load_bundle(const std::string& path, const BundleExpectations& expect) {
  const std::string bytes = read_file(path);
  FeatureBundle b;
  if (ends_with(path, ".bin")) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
      throw ParseError("bundle '" + path + "': bad magic");
    }
    std::size_t pos = 4;
    if (get_u32(bytes, pos) != kBinVersion) throw VersionError("bundle '" + path + "': unsupported version");
    b.label = static_cast<int>(get_u32(bytes, pos));
    const std::size_t len = get_u32(bytes, pos);
    if (pos + len > bytes.size()) throw ParseError("bundle '" + path + "': truncated id");
    b.id = bytes.substr(pos, len);
    pos += len;
    b.faces = get_matrix(bytes, pos);
    b.objects = get_matrix(bytes, pos);
    b.scenes = get_matrix(bytes, pos);
    if (pos != bytes.size()) throw ParseError("bundle '" + path + "': trailing bytes");
  } else {
    FloatJson j;
    try {
      j = FloatJson::parse(bytes);
    } catch (const FloatJson::parse_error& e) {
      throw ParseError("bundle '" + path + "': " + e.what());
    }
    try {
      b = bundle_from_json(j);
    } catch (const ParseError& e) {
      throw ParseError("'" + path + "': " + e.what());
    }
  }
  validate_bundle(b, expect);
  return b;
}

}  // namespace gemo::data
