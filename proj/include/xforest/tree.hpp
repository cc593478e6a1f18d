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

// k-ary instance trees.
//
// A node whose instances fail every stop test samples up to n_s of them,
// clusters their projected label rows with spherical k-means, and keeps the
// unit-norm mean projected feature row of each cluster as its classifier.
// Every instance of the node (not only the sample) is then routed to the
// child of its most cosine-similar classifier row, and the children are
// trained recursively. Leaves keep the mean label row of their instances.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "xforest/clustering.hpp"
#include "xforest/projection.hpp"
#include "xforest/sparse.hpp"

namespace xforest {

class TaskPool;

enum class ProjectionDimRule : std::uint8_t {
  kFeatureDim = 0,  // d_x' = min(d_x, cap)
  kLabelDim = 1,    // d_x' = min(d_y, cap), the literal reading of the protocol
};

struct TrainConfig {
  std::uint32_t k = 10;
  std::uint32_t n_leaf = 10;
  std::uint32_t n_s = 20000;
  // Explicit projection dims; 0 selects min(dim, proj_cap).
  Index proj_dx = 0;
  Index proj_dy = 0;
  Index proj_cap = 10000;
  ProjectionDimRule dx_rule = ProjectionDimRule::kFeatureDim;
  std::uint32_t kmeans_iters = 20;
  std::uint64_t master_seed = 1;
  std::uint32_t m_F = 50;

  // Training-time diagnostics; not part of the model.
  bool check_invariants = false;
  bool record_instances = false;
  // Children with at least this many instances become separate tasks.
  std::size_t spawn_threshold = 512;

  void validate() const;
  Index feature_proj_dim(Index d_x, Index d_y) const;
  Index label_proj_dim(Index d_y) const;
};

struct NodeClassifier {
  std::vector<SparseVec> centroids;  // k rows, unit norm or empty
  std::vector<double> norms;         // cached l2 norms of centroids

  static NodeClassifier from_centroids(std::vector<SparseVec> centroids);
  std::uint32_t route(const SparseVec& projected_row) const;
  bool all_empty() const;

  friend bool operator==(const NodeClassifier& a, const NodeClassifier& b) {
    return a.centroids == b.centroids;
  }
};

struct TreeNode {
  NodeClassifier classifier;     // internal nodes only
  std::vector<TreeNode> children;  // k entries for internal nodes
  SparseVec y_hat;               // leaves only

  bool is_leaf() const { return children.empty(); }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

enum class LeafReason : std::uint8_t {
  kNone = 0,          // internal node
  kTooFew = 1,        // fewer than n_leaf instances
  kSameFeatures = 2,  // all feature rows identical
  kSameLabels = 3,    // all label rows identical
  kNoProgress = 4,    // split sent everything to one child, or no centroid
  kEmptyChild = 5,    // empty child of a real split; holds the parent mean
};

struct NodeStats {
  std::int64_t parent = -1;  // preorder index, -1 for the root
  std::uint32_t depth = 0;
  std::size_t n_v = 0;
  std::size_t sample_size = 0;
  bool leaf = true;
  LeafReason reason = LeafReason::kNone;
  std::uint32_t kmeans_iters = 0;
  double avg_feature_nnz = 0.0;
  double avg_label_nnz = 0.0;
  // Per-node cost estimate n_v * k * (iters * s_y + s_x) for trained nodes,
  // max(1, n_v * s_y) for the mean-label computation of a leaf.
  double work = 0.0;
  // Sparse entries actually visited while training this node.
  std::uint64_t observed_ops = 0;
  std::vector<std::size_t> instances;  // only with record_instances
};

struct TreeStats {
  std::uint32_t k = 0;
  std::vector<NodeStats> nodes;  // preorder

  std::size_t internal_count() const;
  std::size_t leaf_count() const;
  std::uint32_t depth() const;
  // Sum of n_v over all nodes divided by the node count.
  double mean_instances() const;
};

// The tree's projections applied to every row of the dataset.
struct ProjectedData {
  SparseMatrix features;
  SparseMatrix labels;
};

ProjectedData project_dataset(const Dataset& data, const TreeSeeds& seeds);

std::optional<LeafReason> stop_reason(const Dataset& data,
                                      std::span<const std::size_t> rows,
                                      const TrainConfig& cfg);
bool test_stop_condition(const Dataset& data,
                         std::span<const std::size_t> rows,
                         const TrainConfig& cfg);

struct NodeTraining {
  NodeClassifier classifier;
  std::vector<std::size_t> sample;  // dataset row ids, in sampling order
  ClusterAssignment clusters;       // one label per sample entry
  std::uint64_t ops = 0;
};

NodeTraining train_node_classifier(const ProjectedData& projected,
                                   std::span<const std::size_t> rows,
                                   const TrainConfig& cfg,
                                   std::uint64_t node_seed);

struct SplitResult {
  std::vector<std::vector<std::size_t>> children;  // k subsets
  // No centroid to route to, or all instances landed in one child.
  bool degenerate = false;
  std::uint64_t ops = 0;
};

SplitResult split(const NodeClassifier& classifier,
                  const SparseMatrix& projected_features,
                  std::span<const std::size_t> rows);

struct TrainedTree {
  TreeNode root;
  TreeSeeds seeds;
  std::uint64_t tree_index = 0;
  TreeStats stats;
};

// Trains one tree on the given instance subset. All randomness is derived
// from (cfg.master_seed, tree_index); `pool` only changes the schedule.
TrainedTree train_tree(const Dataset& data, std::span<const std::size_t> rows,
                       const TrainConfig& cfg, std::uint64_t tree_index,
                       TaskPool* pool = nullptr);
TrainedTree train_tree(const Dataset& data, const TrainConfig& cfg,
                       std::uint64_t tree_index, TaskPool* pool = nullptr);

// Routes a raw feature row to a leaf and returns its label vector.
const SparseVec& predict_tree(const TreeNode& root, const SparseVec& features,
                              const TreeSeeds& seeds);
const SparseVec& route_projected(const TreeNode& root,
                                 const SparseVec& projected_features);

}  // namespace xforest
