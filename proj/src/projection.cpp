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

#include "xforest/projection.hpp"

#include <stdexcept>
#include <vector>

namespace xforest {

SparseVec hash_project(const SparseVec& row, const ProjectionSpec& spec,
                       HashOverride hashes) {
  if (spec.out_dim == 0) {
    throw std::invalid_argument("hash_project: out_dim must be >= 1");
  }
  const HashFn index_hash = hashes.index ? hashes.index : &default_hash;
  const HashFn sign_hash = hashes.sign ? hashes.sign : &default_hash;
  std::vector<Entry> terms;
  terms.reserve(row.nnz());
  for (const Entry& e : row) {
    const auto bucket =
        static_cast<Index>(index_hash(e.col, spec.seed_index) % spec.out_dim);
    const double sign =
        2.0 * static_cast<double>(sign_hash(e.col, spec.seed_sign) % 2) - 1.0;
    terms.push_back({bucket, sign * e.val});
  }
  return SparseVec::from_unsorted(spec.out_dim, std::move(terms));
}

SparseMatrix hash_project(const SparseMatrix& rows, const ProjectionSpec& spec,
                          HashOverride hashes) {
  SparseMatrix out(spec.out_dim);
  for (const SparseVec& r : rows.rows()) {
    out.push_back(hash_project(r, spec, hashes));
  }
  return out;
}

TreeSeeds derive_tree_seeds(std::uint64_t master_seed, std::uint64_t tree_index,
                            Index feature_dim, Index label_dim) {
  auto word = [&](std::uint64_t j) {
    return mix64(master_seed + (5 * tree_index + j + 1) * kGolden);
  };
  TreeSeeds s;
  s.features = {feature_dim, word(0), word(1)};
  s.labels = {label_dim, word(2), word(3)};
  s.node_seed = word(4);
  return s;
}

}  // namespace xforest
