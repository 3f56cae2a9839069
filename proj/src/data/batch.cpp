// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#include "gemo/data/batch.hpp"

#include <algorithm>

#include "gemo/errors.hpp"

namespace gemo::data {

namespace {

template <typename T>
Tensor<T> slice3(const Tensor<T>& t, std::size_t n) {
  const std::size_t rows = t.shape()[1], cols = t.shape()[2];
  const auto begin = t.values().begin() + static_cast<std::ptrdiff_t>(n * rows * cols);
  return Tensor<T>({rows, cols}, std::vector<T>(begin, begin + static_cast<std::ptrdiff_t>(rows * cols)));
}

template <typename T>
void place(Tensor<T>& dst, std::size_t n, const Tensor<float>& src) {
  const std::size_t rows = dst.shape()[1], cols = dst.shape()[2];
  const std::size_t base = n * rows * cols;
  for (std::size_t r = 0; r < src.rows(); ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[base + r * cols + c] = static_cast<T>(src(r, c));
}

}  // namespace

template <typename T>
Tensor<T> Batch<T>::sample_faces(std::size_t n) const { return slice3(faces, n); }
template <typename T>
Tensor<T> Batch<T>::sample_objects(std::size_t n) const { return slice3(objects, n); }
template <typename T>
Tensor<T> Batch<T>::sample_scenes(std::size_t n) const { return slice3(scenes, n); }

template <typename T>
Batch<T> collate(const std::vector<const FeatureBundle*>& bundles, std::size_t max_batch) {
  if (bundles.empty()) throw ContractError("collate: empty batch");
  if (max_batch && bundles.size() > max_batch) {
    throw ContractError("collate: " + std::to_string(bundles.size()) + " bundles exceed batch size " +
                        std::to_string(max_batch));
  }
  Batch<T> b;
  b.size = bundles.size();
  b.dim = bundles.front()->dim();
  b.scales = bundles.front()->scenes.rows();
  for (const auto* s : bundles) {
    if (s->faces.cols() != b.dim || (s->objects.rows() && s->objects.cols() != b.dim) ||
        s->scenes.cols() != b.dim) {
      throw ContractError("collate: mixed feature widths (" + std::to_string(b.dim) + " vs bundle '" +
                          s->id + "')");
    }
    if (s->scenes.rows() != b.scales) throw ContractError("collate: mixed scale counts at '" + s->id + "'");
    b.max_faces = std::max(b.max_faces, s->faces.rows());
    b.max_objects = std::max(b.max_objects, s->objects.rows());
  }
  b.faces = Tensor<T>({b.size, b.max_faces, b.dim});
  b.objects = Tensor<T>({b.size, b.max_objects, b.dim});
  b.scenes = Tensor<T>({b.size, b.scales, b.dim});
  for (std::size_t n = 0; n < b.size; ++n) {
    const auto& s = *bundles[n];
    place(b.faces, n, s.faces);
    place(b.objects, n, s.objects);
    place(b.scenes, n, s.scenes);
    RowMask fm(b.max_faces, 0), om(b.max_objects, 0);
    std::fill_n(fm.begin(), s.faces.rows(), 1);
    std::fill_n(om.begin(), s.objects.rows(), 1);
    b.face_mask.push_back(std::move(fm));
    b.object_mask.push_back(std::move(om));
    b.labels.push_back(s.label);
    b.face_counts.push_back(s.faces.rows());
    b.object_counts.push_back(s.objects.rows());
    b.ids.push_back(s.id);
  }
  return b;
}

template <typename T>
Batch<T> collate(const std::vector<FeatureBundle>& bundles, std::size_t max_batch) {
  std::vector<const FeatureBundle*> ptrs;
  for (const auto& b : bundles) ptrs.push_back(&b);
  return collate<T>(ptrs, max_batch);
}

template struct Batch<float>;
template struct Batch<double>;
template Batch<float> collate<float>(const std::vector<const FeatureBundle*>&, std::size_t);
template Batch<double> collate<double>(const std::vector<const FeatureBundle*>&, std::size_t);
template Batch<float> collate<float>(const std::vector<FeatureBundle>&, std::size_t);
template Batch<double> collate<double>(const std::vector<FeatureBundle>&, std::size_t);

}  // namespace gemo::data
