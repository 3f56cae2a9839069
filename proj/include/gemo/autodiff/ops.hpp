// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gemo/autodiff/graph.hpp"
#include "gemo/rng.hpp"

namespace gemo::ad {

// All operations below work on rank-2 values; a vector is a 1×n row.

// (m×k)·(k×n).
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> transpose(const Var<T>& a);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);

// Hadamard product.
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> scale(const Var<T>& a, double factor);

template <typename T>
Var<T> add_scalar(const Var<T>& a, double offset);

// Adds a 1×d row to every row of an n×d matrix (the only broadcast supported).
template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& row);

// Multiplies row r of an n×d matrix by gate(r, 0) of an n×1 column.
template <typename T>
Var<T> scale_rows(const Var<T>& a, const Var<T>& gate);

template <typename T>
Var<T> sigmoid(const Var<T>& a);

template <typename T>
Var<T> relu(const Var<T>& a);

template <typename T>
Var<T> exp(const Var<T>& a);

// Throws DomainError on non-positive entries.
template <typename T>
Var<T> log(const Var<T>& a);

/// Row-wise softmax with max subtraction.
template <typename T>
Var<T> softmax_rows(const Var<T>& x);

/// Row-wise softmax where entries with key_mask[col] == 0 are excluded from
/// every row: they come out exactly 0 and receive zero gradient.
template <typename T>
Var<T> softmax_masked(const Var<T>& x, const RowMask& key_mask);

// Same, with an explicit mask of x's full shape (row-major).
template <typename T>
Var<T> softmax_masked(const Var<T>& x, std::span<const std::uint8_t> mask);

template <typename T>
Var<T> log_softmax_rows(const Var<T>& x);

// Sum of all entries, 1×1.
template <typename T>
Var<T> sum(const Var<T>& x);

// Column-wise mean over rows, 1×d.
template <typename T>
Var<T> mean_rows(const Var<T>& x);

// Column-wise max over rows, 1×d. Ties route the gradient to the first row.
template <typename T>
Var<T> max_rows(const Var<T>& x);

// Mean over rows whose mask entry is set; other rows get zero gradient.
template <typename T>
Var<T> masked_mean_rows(const Var<T>& x, const RowMask& row_mask);

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts);

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts);

template <typename T>
Var<T> slice_rows(const Var<T>& x, std::size_t begin, std::size_t count);

template <typename T>
Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t count);

// Per-row normalization to zero mean / unit variance, then gamma·x̂ + beta.
template <typename T>
Var<T> layer_norm_rows(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                       double eps = 1e-5);

// x / ||x|| per row; DegenerateVectorError when a norm is <= min_norm.
template <typename T>
Var<T> normalize_rows(const Var<T>& x, double min_norm = 1e-12);

// Cosine of two equally shaped row vectors, 1×1.
template <typename T>
Var<T> cosine_similarity(const Var<T>& u, const Var<T>& v);

// Entry (i, j) = cosine(a_i, b_j).
template <typename T>
Var<T> pairwise_cosine(const Var<T>& a, const Var<T>& b);

/// Inverted dropout: kept entries are scaled by 1/(1-rate). Identity when
/// `train` is false or rate is 0.
template <typename T>
Var<T> dropout(const Var<T>& x, double rate, Rng& rng, bool train);

/// Σ w·log(x + eps) over entries with w != 0, 1×1. Entries with zero weight
/// contribute exactly 0 whatever x holds there.
template <typename T>
Var<T> weighted_log_sum(const Var<T>& x, const Tensor<T>& weights, double eps);

/// (x - mean) / (std + eps) over all entries, population std. When every
/// entry is equal the result is all zeros.
template <typename T>
Var<T> standardize(const Var<T>& x, double eps);

}  // namespace gemo::ad
