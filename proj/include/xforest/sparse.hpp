// Copyright 2026 The xforest Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace xforest {

using Index = std::uint32_t;

// Accumulator for dot products, norms and means.
using Accum = long double;

struct Entry {
  Index col = 0;
  double val = 0.0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

// A sparse row: strictly increasing column indices, all < dim, no stored
// zeros. Immutable once built.
class SparseVec {
 public:
  SparseVec() = default;
  // Empty vector of the given logical dimension.
  explicit SparseVec(Index dim) : dim_(dim) {}
  // Validating constructor; throws std::invalid_argument on unsorted or
  // duplicate columns, out-of-range columns or explicit zeros.
  SparseVec(Index dim, std::vector<Entry> entries);

  // Builds from (col, val) pairs in any order: sums duplicates, drops
  // resulting zeros.
  static SparseVec from_unsorted(Index dim, std::vector<Entry> entries);
  // Keeps non-zero coordinates of a dense buffer.
  static SparseVec from_dense(std::span<const double> dense);

  Index dim() const { return dim_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::span<const Entry> entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::vector<double> to_dense() const;

  friend bool operator==(const SparseVec&, const SparseVec&) = default;

 private:
  struct Unchecked {};
  SparseVec(Unchecked, Index dim, std::vector<Entry> entries)
      : dim_(dim), entries_(std::move(entries)) {}
  friend SparseVec scale(const SparseVec&, double);

  Index dim_ = 0;
  std::vector<Entry> entries_;
};

class SparseMatrix {
 public:
  SparseMatrix() = default;
  explicit SparseMatrix(Index n_cols) : n_cols_(n_cols) {}
  // Throws std::invalid_argument if any row has dim != n_cols.
  SparseMatrix(Index n_cols, std::vector<SparseVec> rows);

  void push_back(SparseVec row);

  std::size_t n_rows() const { return rows_.size(); }
  Index n_cols() const { return n_cols_; }
  const SparseVec& row(std::size_t i) const { return rows_[i]; }
  const SparseVec& operator[](std::size_t i) const { return rows_[i]; }
  std::span<const SparseVec> rows() const { return rows_; }
  std::size_t nnz() const;

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  Index n_cols_ = 0;
  std::vector<SparseVec> rows_;
};

// Paired features (n x d_x) and binary labels (n x d_y).
struct Dataset {
  SparseMatrix features;
  SparseMatrix labels;

  std::size_t n() const { return features.n_rows(); }
  Index d_x() const { return features.n_cols(); }
  Index d_y() const { return labels.n_cols(); }

  // Average number of non-zeros per feature / label row.
  double avg_feature_nnz() const;
  double avg_label_nnz() const;

  // Throws std::invalid_argument when row counts differ or a label value is
  // not exactly 1.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

double dot(const SparseVec& a, const SparseVec& b);
// Dot of a sparse row with a dense vector of length a.dim().
double dot(const SparseVec& a, std::span<const double> dense);
double l2_norm(const SparseVec& a);

// dot(a,b)/(|a||b|); 0 when either norm is 0. Throws on dim mismatch.
double cosine_similarity(const SparseVec& a, const SparseVec& b);

// a/|a|, or a unchanged if |a| == 0.
SparseVec l2_normalize(const SparseVec& a);

SparseVec scale(const SparseVec& a, double alpha);
// alpha*a + beta*b.
SparseVec axpby(double alpha, const SparseVec& a, double beta,
                const SparseVec& b);

// Component-wise mean of the selected rows. Throws on empty selection or
// out-of-range index.
SparseVec mean_rows(const SparseMatrix& m, std::span<const std::size_t> rows);

}  // namespace xforest
