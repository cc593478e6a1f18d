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

// Dataset generators and dense reference implementations shared by the unit
// and acceptance tests. The references deliberately avoid library kernels.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "xforest/sparse.hpp"

namespace xforest::testing {

using Gen = std::mt19937_64;

inline std::size_t uniform(Gen& g, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(g);
}

inline double uniform_real(Gen& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

// Random sparse row with `nnz` distinct columns and non-zero values.
inline SparseVec random_row(Gen& g, Index dim, std::size_t nnz,
                            bool positive = false) {
  nnz = std::min<std::size_t>(nnz, dim);
  std::set<Index> cols;
  while (cols.size() < nnz) cols.insert(static_cast<Index>(uniform(g, 0, dim - 1)));
  std::vector<Entry> e;
  for (Index c : cols) {
    double v = 0.0;
    while (v == 0.0) v = positive ? uniform_real(g, 0.05, 2.0) : uniform_real(g, -2.0, 2.0);
    e.push_back({c, v});
  }
  return SparseVec(dim, std::move(e));
}

inline SparseVec label_row(Index dim, const std::set<Index>& labels) {
  std::vector<Entry> e;
  for (Index l : labels) e.push_back({l, 1.0});
  return SparseVec(dim, std::move(e));
}

inline SparseVec random_label_row(Gen& g, Index dim, std::size_t max_labels) {
  const std::size_t count = uniform(g, 0, std::min<std::size_t>(max_labels, dim));
  std::set<Index> labels;
  while (labels.size() < count) labels.insert(static_cast<Index>(uniform(g, 0, dim - 1)));
  return label_row(dim, labels);
}

inline Dataset random_dataset(Gen& g, std::size_t n, Index d_x, Index d_y,
                              std::size_t max_feature_nnz = 8,
                              std::size_t max_labels = 4) {
  Dataset d{SparseMatrix(d_x), SparseMatrix(d_y)};
  for (std::size_t i = 0; i < n; ++i) {
    d.features.push_back(random_row(g, d_x, uniform(g, 0, max_feature_nnz), true));
    d.labels.push_back(random_label_row(g, d_y, max_labels));
  }
  return d;
}

// `groups` well separated groups of `per_group` instances. Group g owns
// feature columns [g*fb, (g+1)*fb) and label columns [g*lb, (g+1)*lb); column
// g*fb carries a dominant value and label g*lb is always present.
inline Dataset grouped_dataset(Gen& g, std::size_t groups, std::size_t per_group,
                               Index fb = 10, Index lb = 5) {
  const Index d_x = static_cast<Index>(groups) * fb;
  const Index d_y = static_cast<Index>(groups) * lb;
  Dataset d{SparseMatrix(d_x), SparseMatrix(d_y)};
  for (std::size_t grp = 0; grp < groups; ++grp) {
    const Index f0 = static_cast<Index>(grp) * fb;
    const Index l0 = static_cast<Index>(grp) * lb;
    for (std::size_t i = 0; i < per_group; ++i) {
      std::vector<Entry> f{{f0, 10.0}};
      for (Index c = 1; c < fb; ++c) {
        if (uniform(g, 0, 2) == 0) f.push_back({f0 + c, uniform_real(g, 0.1, 1.0)});
      }
      std::set<Index> labels{l0};
      for (Index c = 1; c < lb; ++c) {
        if (uniform(g, 0, 1) == 0) labels.insert(l0 + c);
      }
      d.features.push_back(SparseVec(d_x, std::move(f)));
      d.labels.push_back(label_row(d_y, labels));
    }
  }
  return d;
}

// Hierarchical data: instance codes are `levels` base-k digits. Every code
// prefix is one feature column and a block of labels; the prefix of length
// l + 1 owns (4k)^(levels-1-l) label columns, so coarser levels dominate the
// label geometry. `copies` instances per code.
inline Dataset hierarchical_dataset(std::uint32_t k, std::uint32_t levels,
                                    std::size_t copies) {
  std::size_t leaves = 1;
  for (std::uint32_t l = 0; l < levels; ++l) leaves *= k;
  std::vector<Index> f_offset(levels);
  std::vector<Index> l_offset(levels);
  std::vector<Index> reps(levels);
  Index f_total = 0;
  Index l_total = 0;
  std::size_t width = 1;
  for (std::uint32_t l = 0; l < levels; ++l) {
    width *= k;
    Index rep = 1;
    for (std::uint32_t j = l + 1; j < levels; ++j) rep *= 4 * k;
    reps[l] = rep;
    f_offset[l] = f_total;
    l_offset[l] = l_total;
    f_total += static_cast<Index>(width);
    l_total += static_cast<Index>(width) * rep;
  }
  Dataset d{SparseMatrix(f_total), SparseMatrix(l_total)};
  for (std::size_t code = 0; code < leaves; ++code) {
    std::vector<Entry> f;
    std::set<Index> labels;
    std::size_t span = leaves;
    for (std::uint32_t l = 0; l < levels; ++l) {
      span /= k;
      const Index prefix = static_cast<Index>(code / span);
      f.push_back({f_offset[l] + prefix, 1.0});
      for (Index r = 0; r < reps[l]; ++r) labels.insert(l_offset[l] + prefix * reps[l] + r);
    }
    for (std::size_t c = 0; c < copies; ++c) {
      d.features.push_back(SparseVec(f_total, f));
      d.labels.push_back(label_row(l_total, labels));
    }
  }
  return d;
}

// ---- dense references ---------------------------------------------------

inline std::vector<double> densify(const SparseVec& v) {
  std::vector<double> out(v.dim(), 0.0);
  for (const Entry& e : v) out[e.col] = e.val;
  return out;
}

inline double dense_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  if (aa == 0 || bb == 0) return 0.0;
  return static_cast<double>(ab / std::sqrt(aa * bb));
}

inline std::vector<double> dense_mean(const SparseMatrix& m,
                                      const std::vector<std::size_t>& rows) {
  std::vector<long double> sum(m.n_cols(), 0);
  for (std::size_t r : rows) {
    const auto d = densify(m[r]);
    for (std::size_t c = 0; c < d.size(); ++c) sum[c] += d[c];
  }
  std::vector<double> out(m.n_cols());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = static_cast<double>(sum[c] / static_cast<long double>(rows.size()));
  }
  return out;
}

inline bool close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max(1.0, std::max(std::fabs(a), std::fabs(b)));
}

}  // namespace xforest::testing
