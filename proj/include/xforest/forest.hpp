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
#include <vector>

#include "xforest/sparse.hpp"
#include "xforest/tree.hpp"

namespace xforest {

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct ForestTree {
  std::uint64_t tree_index = 0;
  TreeSeeds seeds;
  TreeNode root;

  friend bool operator==(const ForestTree&, const ForestTree&) = default;
};

struct ForestModel {
  std::uint32_t format_version = kModelFormatVersion;
  TrainConfig cfg;
  Index d_x = 0;
  Index d_y = 0;
  std::vector<ForestTree> trees;  // ordered by tree_index
};

// Compares what the model file stores (diagnostic config flags excluded).
bool operator==(const ForestModel& a, const ForestModel& b);

struct WorkSpanReport {
  double t1 = 0.0;    // total work over all nodes
  double tinf = 0.0;  // heaviest root-to-leaf path
  double parallelism = 1.0;
  std::uint32_t depth = 0;
};

WorkSpanReport work_span_report(const TreeStats& stats);

struct ForestTraining {
  ForestModel model;
  std::vector<TreeStats> stats;
  std::vector<WorkSpanReport> work_span;
  double seconds = 0.0;
};

// Trains trees [first, last) with the seeds a full forest would use for
// those indices. threads >= 1; the result does not depend on it.
ForestTraining train_trees(const Dataset& data, const TrainConfig& cfg,
                           std::uint64_t first, std::uint64_t last,
                           std::size_t threads);

// All cfg.m_F trees.
ForestTraining train_forest(const Dataset& data, const TrainConfig& cfg,
                            std::size_t threads);

struct ScoredLabel {
  Index label = 0;
  double score = 0.0;

  friend bool operator==(const ScoredLabel&, const ScoredLabel&) = default;
};

// Mean of the leaf label vectors reached in every tree.
SparseVec score_forest(const ForestModel& model, const SparseVec& features);

// Top min(top_k, d_y) labels by descending score, ties by ascending label.
// Labels that no tree scored rank after all scored ones, lowest index first.
std::vector<ScoredLabel> predict_forest(const ForestModel& model,
                                        const SparseVec& features,
                                        std::size_t top_k);

std::vector<ScoredLabel> top_k_labels(const SparseVec& scores,
                                      std::size_t top_k);

}  // namespace xforest
