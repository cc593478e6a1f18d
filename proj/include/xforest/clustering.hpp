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

// Spherical k-means with k-means++ seeding.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xforest/random.hpp"
#include "xforest/sparse.hpp"

namespace xforest {

struct KMeansConfig {
  std::uint32_t k = 10;
  std::uint32_t max_iters = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ClusterAssignment {
  std::vector<std::uint32_t> labels;  // one per input row, in [0, k)
  std::vector<SparseVec> centroids;   // k rows, unit norm or empty
  // Number of centroid updates performed, 1 <= iterations <= max_iters.
  std::uint32_t iterations = 0;
  bool converged = false;
  // Mean cosine of rows to their assigned centroid, recorded after every
  // assignment pass. Non-decreasing.
  std::vector<double> objective;
  // Sparse entries visited by similarity and centroid computations.
  std::uint64_t ops = 0;
};

// Index of the most cosine-similar centroid; ties go to the lowest index.
// A zero row (or all-empty centroids) therefore maps to 0.
std::uint32_t assign_nearest(const SparseVec& row,
                             std::span<const SparseVec> centroids);

// Same as above with precomputed centroid norms (norms[i] == l2_norm(c[i])).
std::uint32_t assign_nearest(const SparseVec& row,
                             std::span<const SparseVec> centroids,
                             std::span<const double> norms);

// k-means++ over cosine distance D(y) = 1 - cos(y, nearest center). Returns
// k unit-norm centers (duplicates allowed when fewer than k distinct rows).
// Zero rows are never picked while a non-zero row exists.
std::vector<SparseVec> kmeanspp_init(const SparseMatrix& rows, std::uint32_t k,
                                     Rng& rng);

ClusterAssignment spherical_kmeans(const SparseMatrix& rows,
                                   const KMeansConfig& cfg);

}  // namespace xforest
