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

#include "xforest/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace xforest {

namespace {

// Merge when sizes are comparable, otherwise binary-search the short side
// into the long one. Both visit matching columns in increasing order, so
// the accumulated value is identical either way.
constexpr std::size_t kGallopRatio = 16;

Accum dot_merge(std::span<const Entry> a, std::span<const Entry> b) {
  Accum sum = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].col < b[j].col) {
      ++i;
    } else if (a[i].col > b[j].col) {
      ++j;
    } else {
      sum += static_cast<Accum>(a[i].val) * b[j].val;
      ++i;
      ++j;
    }
  }
  return sum;
}

Accum dot_search(std::span<const Entry> small, std::span<const Entry> large) {
  Accum sum = 0;
  auto lo = large.begin();
  for (const Entry& e : small) {
    lo = std::lower_bound(lo, large.end(), e.col,
                          [](const Entry& x, Index c) { return x.col < c; });
    if (lo == large.end()) break;
    if (lo->col == e.col) sum += static_cast<Accum>(e.val) * lo->val;
  }
  return sum;
}

}  // namespace

SparseVec::SparseVec(Index dim, std::vector<Entry> entries)
    : dim_(dim), entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Entry& e = entries_[i];
    if (e.col >= dim_) {
      throw std::invalid_argument("column " + std::to_string(e.col) +
                                  " out of range for dim " +
                                  std::to_string(dim_));
    }
    if (i > 0 && entries_[i - 1].col >= e.col) {
      throw std::invalid_argument("columns not strictly increasing at " +
                                  std::to_string(e.col));
    }
    if (e.val == 0.0) {
      throw std::invalid_argument("explicit zero at column " +
                                  std::to_string(e.col));
    }
  }
}

SparseVec SparseVec::from_unsorted(Index dim, std::vector<Entry> entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.col < b.col; });
  std::vector<Entry> merged;
  merged.reserve(entries.size());
  std::size_t i = 0;
  while (i < entries.size()) {
    const Index col = entries[i].col;
    if (col >= dim) {
      throw std::invalid_argument("column " + std::to_string(col) +
                                  " out of range for dim " +
                                  std::to_string(dim));
    }
    Accum sum = 0;
    for (; i < entries.size() && entries[i].col == col; ++i) {
      sum += entries[i].val;
    }
    const double v = static_cast<double>(sum);
    if (v != 0.0) merged.push_back({col, v});
  }
  return SparseVec(Unchecked{}, dim, std::move(merged));
}

SparseVec SparseVec::from_dense(std::span<const double> dense) {
  std::vector<Entry> entries;
  for (std::size_t c = 0; c < dense.size(); ++c) {
    if (dense[c] != 0.0) entries.push_back({static_cast<Index>(c), dense[c]});
  }
  return SparseVec(Unchecked{}, static_cast<Index>(dense.size()),
                   std::move(entries));
}

std::vector<double> SparseVec::to_dense() const {
  std::vector<double> out(dim_, 0.0);
  for (const Entry& e : entries_) out[e.col] = e.val;
  return out;
}

SparseMatrix::SparseMatrix(Index n_cols, std::vector<SparseVec> rows)
    : n_cols_(n_cols), rows_(std::move(rows)) {
  for (const SparseVec& r : rows_) {
    if (r.dim() != n_cols_) {
      throw std::invalid_argument("row dim " + std::to_string(r.dim()) +
                                  " != matrix cols " + std::to_string(n_cols_));
    }
  }
}

void SparseMatrix::push_back(SparseVec row) {
  if (row.dim() != n_cols_) {
    throw std::invalid_argument("row dim " + std::to_string(row.dim()) +
                                " != matrix cols " + std::to_string(n_cols_));
  }
  rows_.push_back(std::move(row));
}

std::size_t SparseMatrix::nnz() const {
  std::size_t total = 0;
  for (const SparseVec& r : rows_) total += r.nnz();
  return total;
}

double Dataset::avg_feature_nnz() const {
  return n() == 0 ? 0.0
                  : static_cast<double>(features.nnz()) /
                        static_cast<double>(n());
}

double Dataset::avg_label_nnz() const {
  return n() == 0 ? 0.0
                  : static_cast<double>(labels.nnz()) / static_cast<double>(n());
}

void Dataset::validate() const {
  if (features.n_rows() != labels.n_rows()) {
    throw std::invalid_argument("feature rows " +
                                std::to_string(features.n_rows()) +
                                " != label rows " +
                                std::to_string(labels.n_rows()));
  }
  for (std::size_t i = 0; i < labels.n_rows(); ++i) {
    for (const Entry& e : labels[i]) {
      if (e.val != 1.0) {
        throw std::invalid_argument("label value != 1 in row " +
                                    std::to_string(i));
      }
    }
  }
}

double dot(const SparseVec& a, const SparseVec& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("dot: dimension mismatch " +
                                std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()));
  }
  const auto ea = a.entries();
  const auto eb = b.entries();
  if (ea.empty() || eb.empty()) return 0.0;
  if (ea.size() * kGallopRatio < eb.size()) {
    return static_cast<double>(dot_search(ea, eb));
  }
  if (eb.size() * kGallopRatio < ea.size()) {
    return static_cast<double>(dot_search(eb, ea));
  }
  return static_cast<double>(dot_merge(ea, eb));
}

double dot(const SparseVec& a, std::span<const double> dense) {
  if (dense.size() != a.dim()) {
    throw std::invalid_argument("dot: dense length mismatch");
  }
  Accum sum = 0;
  for (const Entry& e : a) sum += static_cast<Accum>(e.val) * dense[e.col];
  return static_cast<double>(sum);
}

double l2_norm(const SparseVec& a) {
  Accum sum = 0;
  for (const Entry& e : a) sum += static_cast<Accum>(e.val) * e.val;
  return static_cast<double>(std::sqrt(sum));
}

double cosine_similarity(const SparseVec& a, const SparseVec& b) {
  const double d = dot(a, b);
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(d / (na * nb), -1.0, 1.0);
}

SparseVec scale(const SparseVec& a, double alpha) {
  if (alpha == 0.0) return SparseVec(a.dim());
  std::vector<Entry> out;
  out.reserve(a.nnz());
  for (const Entry& e : a) {
    const double v = e.val * alpha;
    if (v != 0.0) out.push_back({e.col, v});
  }
  return SparseVec(SparseVec::Unchecked{}, a.dim(), std::move(out));
}

SparseVec l2_normalize(const SparseVec& a) {
  const double n = l2_norm(a);
  if (n == 0.0) return a;
  return scale(a, 1.0 / n);
}

SparseVec axpby(double alpha, const SparseVec& a, double beta,
                const SparseVec& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("axpby: dimension mismatch");
  }
  std::vector<Entry> terms;
  terms.reserve(a.nnz() + b.nnz());
  for (const Entry& e : a) terms.push_back({e.col, alpha * e.val});
  for (const Entry& e : b) terms.push_back({e.col, beta * e.val});
  return SparseVec::from_unsorted(a.dim(), std::move(terms));
}

SparseVec mean_rows(const SparseMatrix& m, std::span<const std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("mean_rows: empty selection");
  std::vector<Entry> terms;
  for (std::size_t r : rows) {
    if (r >= m.n_rows()) {
      throw std::invalid_argument("mean_rows: row " + std::to_string(r) +
                                  " out of range");
    }
    const auto e = m[r].entries();
    terms.insert(terms.end(), e.begin(), e.end());
  }
  std::stable_sort(terms.begin(), terms.end(),
                   [](const Entry& a, const Entry& b) { return a.col < b.col; });
  const Accum count = static_cast<Accum>(rows.size());
  std::vector<Entry> out;
  std::size_t i = 0;
  while (i < terms.size()) {
    const Index col = terms[i].col;
    Accum sum = 0;
    for (; i < terms.size() && terms[i].col == col; ++i) sum += terms[i].val;
    const double v = static_cast<double>(sum / count);
    if (v != 0.0) out.push_back({col, v});
  }
  return SparseVec(m.n_cols(), std::move(out));
}

}  // namespace xforest
