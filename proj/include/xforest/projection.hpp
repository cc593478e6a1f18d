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

// Hashing-trick random projection.
//
// Input column `key` of a row lands in output column
//     bucket(key) = hash(key, seed_index) mod out_dim
// with sign
//     sign(key)   = 2 * (hash(key, seed_sign) mod 2) - 1.
// Colliding keys add up. This is x * P for the implicit sparse matrix P whose
// row `key` holds a single sign(key) at bucket(key); P is never materialized.
//
// The default hash is mix64(key ^ seed) (SplitMix64 finalizer). Test vectors:
//   default_hash(0, 0)          == 0xE220A8397B1DCDAF
//   default_hash(1, 0)          == 0x910A2DEC89025CC1
//   default_hash(12345, 42)     == 0xB56A469D4D4DC9D2

#pragma once

#include <cstdint>
#include <utility>

#include "xforest/random.hpp"
#include "xforest/sparse.hpp"

namespace xforest {

using HashFn = std::uint64_t (*)(std::uint64_t key, std::uint64_t seed);

constexpr std::uint64_t default_hash(std::uint64_t key, std::uint64_t seed) {
  return mix64(key ^ seed);
}

struct ProjectionSpec {
  Index out_dim = 1;
  std::uint64_t seed_index = 0;
  std::uint64_t seed_sign = 0;

  friend bool operator==(const ProjectionSpec&, const ProjectionSpec&) =
      default;
};

// Override points for the two hash functions; nullptr means default_hash.
struct HashOverride {
  HashFn index = nullptr;
  HashFn sign = nullptr;
};

// Projects one row. Throws std::invalid_argument if spec.out_dim == 0.
SparseVec hash_project(const SparseVec& row, const ProjectionSpec& spec,
                       HashOverride hashes = {});

SparseMatrix hash_project(const SparseMatrix& rows, const ProjectionSpec& spec,
                          HashOverride hashes = {});

struct TreeSeeds {
  ProjectionSpec features;
  ProjectionSpec labels;
  // Root of the per-node random streams (sampling, k-means).
  std::uint64_t node_seed = 0;

  friend bool operator==(const TreeSeeds&, const TreeSeeds&) = default;
};

// Deterministic and injective in tree_index: the seed words are
// mix64(master + (5*tree_index + j + 1) * golden) for j = 0..4, and both
// mix64 and multiplication by the odd golden constant are bijections.
TreeSeeds derive_tree_seeds(std::uint64_t master_seed, std::uint64_t tree_index,
                            Index feature_dim, Index label_dim);

}  // namespace xforest
