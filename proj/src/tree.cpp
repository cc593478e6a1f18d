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

#include "xforest/tree.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "xforest/task_pool.hpp"

namespace xforest {

namespace {

double avg_nnz(const SparseMatrix& m, std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  std::size_t total = 0;
  for (std::size_t r : rows) total += m[r].nnz();
  return static_cast<double>(total) / static_cast<double>(rows.size());
}

bool all_rows_equal(const SparseMatrix& m, std::span<const std::size_t> rows) {
  const SparseVec& first = m[rows.front()];
  return std::all_of(rows.begin() + 1, rows.end(),
                     [&](std::size_t r) { return m[r] == first; });
}

double leaf_work(std::size_t n_v, double avg_label_nnz) {
  return std::max(1.0, static_cast<double>(n_v) * avg_label_nnz);
}

// Mirrors the TreeNode structure while training; flattened into TreeStats.
struct Trace {
  NodeStats stat;
  std::vector<Trace> children;
};

struct Builder {
  const Dataset& data;
  const ProjectedData& projected;
  const TrainConfig& cfg;
  TaskPool* pool;

  void make_leaf(std::span<const std::size_t> rows, LeafReason reason,
                 TreeNode& node, Trace& trace) const {
    node.y_hat = mean_rows(data.labels, rows);
    trace.stat.leaf = true;
    trace.stat.reason = reason;
    trace.stat.work += leaf_work(rows.size(), trace.stat.avg_label_nnz);
    for (std::size_t r : rows) trace.stat.observed_ops += data.labels[r].nnz();
  }

  void build(std::vector<std::size_t> rows, std::uint64_t seed,
             std::uint32_t depth, TreeNode& node, Trace& trace) const {
    NodeStats& st = trace.stat;
    st.depth = depth;
    st.n_v = rows.size();
    st.avg_feature_nnz = avg_nnz(data.features, rows);
    st.avg_label_nnz = avg_nnz(data.labels, rows);
    if (cfg.record_instances) st.instances = rows;

    if (const auto reason = stop_reason(data, rows, cfg)) {
      make_leaf(rows, *reason, node, trace);
      return;
    }

    NodeTraining trained = train_node_classifier(projected, rows, cfg, seed);
    st.sample_size = trained.sample.size();
    st.kmeans_iters = trained.clusters.iterations;
    st.work = static_cast<double>(rows.size()) * cfg.k *
              (trained.clusters.iterations * st.avg_label_nnz +
               st.avg_feature_nnz);
    st.observed_ops = trained.ops;

    SplitResult parts = split(trained.classifier, projected.features, rows);
    st.observed_ops += parts.ops;
    if (parts.degenerate) {
      make_leaf(rows, LeafReason::kNoProgress, node, trace);
      return;
    }
    if (cfg.check_invariants) check_partition(rows, parts.children);

    st.leaf = false;
    node.classifier = std::move(trained.classifier);
    node.children.resize(cfg.k);
    trace.children.resize(cfg.k);

    std::optional<SparseVec> parent_mean;
    TaskGroup group(pool);
    for (std::uint32_t i = 0; i < cfg.k; ++i) {
      auto& child_rows = parts.children[i];
      Trace& child_trace = trace.children[i];
      TreeNode& child = node.children[i];
      if (child_rows.empty()) {
        if (!parent_mean) parent_mean = mean_rows(data.labels, rows);
        child.y_hat = *parent_mean;
        child_trace.stat.depth = depth + 1;
        child_trace.stat.reason = LeafReason::kEmptyChild;
        child_trace.stat.work = leaf_work(0, 0.0);
        continue;
      }
      const std::uint64_t cs = child_seed(seed, i);
      if (child_rows.size() >= cfg.spawn_threshold) {
        group.spawn([this, cs, depth, &child, &child_trace,
                     r = std::move(child_rows)]() mutable {
          build(std::move(r), cs, depth + 1, child, child_trace);
        });
      } else {
        build(std::move(child_rows), cs, depth + 1, child, child_trace);
      }
    }
    group.wait();
  }

  static void check_partition(std::span<const std::size_t> parent,
                              const std::vector<std::vector<std::size_t>>& kids) {
    std::vector<std::size_t> joined;
    for (const auto& c : kids) joined.insert(joined.end(), c.begin(), c.end());
    std::vector<std::size_t> expected(parent.begin(), parent.end());
    std::sort(joined.begin(), joined.end());
    std::sort(expected.begin(), expected.end());
    if (joined != expected) {
      throw std::logic_error("split does not partition the node instances");
    }
  }
};

void flatten(Trace& trace, std::int64_t parent, std::vector<NodeStats>& out) {
  const auto self = static_cast<std::int64_t>(out.size());
  trace.stat.parent = parent;
  out.push_back(std::move(trace.stat));
  for (Trace& c : trace.children) flatten(c, self, out);
}

}  // namespace

void TrainConfig::validate() const {
  if (k < 2) throw std::invalid_argument("k must be >= 2");
  if (n_leaf < 1) throw std::invalid_argument("n_leaf must be >= 1");
  if (n_s < k) throw std::invalid_argument("n_s must be >= k");
  if (m_F < 1) throw std::invalid_argument("m_F must be >= 1");
  if (kmeans_iters < 1) throw std::invalid_argument("kmeans_iters must be >= 1");
  if (proj_cap < 1) throw std::invalid_argument("proj_cap must be >= 1");
}

Index TrainConfig::feature_proj_dim(Index d_x, Index d_y) const {
  if (proj_dx != 0) return proj_dx;
  const Index base = dx_rule == ProjectionDimRule::kLabelDim ? d_y : d_x;
  return std::min(base, proj_cap);
}

Index TrainConfig::label_proj_dim(Index d_y) const {
  if (proj_dy != 0) return proj_dy;
  return std::min(d_y, proj_cap);
}

NodeClassifier NodeClassifier::from_centroids(std::vector<SparseVec> centroids) {
  NodeClassifier c;
  c.norms.reserve(centroids.size());
  for (const SparseVec& v : centroids) c.norms.push_back(l2_norm(v));
  c.centroids = std::move(centroids);
  return c;
}

std::uint32_t NodeClassifier::route(const SparseVec& projected_row) const {
  return assign_nearest(projected_row, centroids, norms);
}

bool NodeClassifier::all_empty() const {
  return std::all_of(centroids.begin(), centroids.end(),
                     [](const SparseVec& c) { return c.empty(); });
}

std::size_t TreeStats::internal_count() const {
  return static_cast<std::size_t>(std::count_if(
      nodes.begin(), nodes.end(), [](const NodeStats& s) { return !s.leaf; }));
}

std::size_t TreeStats::leaf_count() const {
  return nodes.size() - internal_count();
}

std::uint32_t TreeStats::depth() const {
  std::uint32_t d = 0;
  for (const NodeStats& s : nodes) d = std::max(d, s.depth);
  return d;
}

double TreeStats::mean_instances() const {
  if (nodes.empty()) return 0.0;
  double total = 0.0;
  for (const NodeStats& s : nodes) total += static_cast<double>(s.n_v);
  return total / static_cast<double>(nodes.size());
}

ProjectedData project_dataset(const Dataset& data, const TreeSeeds& seeds) {
  return {hash_project(data.features, seeds.features),
          hash_project(data.labels, seeds.labels)};
}

std::optional<LeafReason> stop_reason(const Dataset& data,
                                      std::span<const std::size_t> rows,
                                      const TrainConfig& cfg) {
  if (rows.empty()) throw std::invalid_argument("stop_reason: empty node");
  if (rows.size() < cfg.n_leaf) return LeafReason::kTooFew;
  if (all_rows_equal(data.features, rows)) return LeafReason::kSameFeatures;
  if (all_rows_equal(data.labels, rows)) return LeafReason::kSameLabels;
  return std::nullopt;
}

bool test_stop_condition(const Dataset& data,
                         std::span<const std::size_t> rows,
                         const TrainConfig& cfg) {
  return stop_reason(data, rows, cfg).has_value();
}

NodeTraining train_node_classifier(const ProjectedData& projected,
                                   std::span<const std::size_t> rows,
                                   const TrainConfig& cfg,
                                   std::uint64_t node_seed) {
  if (rows.empty()) {
    throw std::invalid_argument("train_node_classifier: empty node");
  }
  NodeTraining out;
  Rng rng(node_seed);

  // Partial Fisher-Yates: the first m slots are a uniform sample without
  // replacement.
  out.sample.assign(rows.begin(), rows.end());
  const std::size_t m = std::min<std::size_t>(rows.size(), cfg.n_s);
  if (m < rows.size()) {
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = i + rng.uniform_index(out.sample.size() - i);
      std::swap(out.sample[i], out.sample[j]);
    }
    out.sample.resize(m);
  }

  SparseMatrix sampled_labels(projected.labels.n_cols());
  for (std::size_t r : out.sample) sampled_labels.push_back(projected.labels[r]);
  KMeansConfig kc{cfg.k, cfg.kmeans_iters, rng.next()};
  out.clusters = spherical_kmeans(sampled_labels, kc);
  out.ops = out.clusters.ops;

  std::vector<std::vector<Entry>> sums(cfg.k);
  for (std::size_t j = 0; j < out.sample.size(); ++j) {
    const auto e = projected.features[out.sample[j]].entries();
    auto& bucket = sums[out.clusters.labels[j]];
    bucket.insert(bucket.end(), e.begin(), e.end());
    out.ops += e.size();
  }
  std::vector<SparseVec> centroids;
  centroids.reserve(cfg.k);
  for (auto& s : sums) {
    centroids.push_back(l2_normalize(
        SparseVec::from_unsorted(projected.features.n_cols(), std::move(s))));
  }
  out.classifier = NodeClassifier::from_centroids(std::move(centroids));
  return out;
}

SplitResult split(const NodeClassifier& classifier,
                  const SparseMatrix& projected_features,
                  std::span<const std::size_t> rows) {
  SplitResult out;
  const std::size_t k = classifier.centroids.size();
  out.children.resize(k);
  if (classifier.all_empty()) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t r : rows) {
    const SparseVec& x = projected_features[r];
    out.children[classifier.route(x)].push_back(r);
    out.ops += x.nnz() * k;
  }
  out.degenerate = std::any_of(
      out.children.begin(), out.children.end(),
      [&](const auto& c) { return c.size() == rows.size(); });
  return out;
}

TrainedTree train_tree(const Dataset& data, std::span<const std::size_t> rows,
                       const TrainConfig& cfg, std::uint64_t tree_index,
                       TaskPool* pool) {
  cfg.validate();
  if (rows.empty()) throw std::invalid_argument("train_tree: no instances");
  TrainedTree out;
  out.tree_index = tree_index;
  out.seeds = derive_tree_seeds(cfg.master_seed, tree_index,
                                cfg.feature_proj_dim(data.d_x(), data.d_y()),
                                cfg.label_proj_dim(data.d_y()));
  const ProjectedData projected = project_dataset(data, out.seeds);

  Trace trace;
  Builder{data, projected, cfg, pool}.build(
      std::vector<std::size_t>(rows.begin(), rows.end()), out.seeds.node_seed,
      0, out.root, trace);
  out.stats.k = cfg.k;
  flatten(trace, -1, out.stats.nodes);
  return out;
}

TrainedTree train_tree(const Dataset& data, const TrainConfig& cfg,
                       std::uint64_t tree_index, TaskPool* pool) {
  std::vector<std::size_t> all(data.n());
  std::iota(all.begin(), all.end(), 0);
  return train_tree(data, all, cfg, tree_index, pool);
}

const SparseVec& route_projected(const TreeNode& root,
                                 const SparseVec& projected_features) {
  const TreeNode* node = &root;
  while (!node->is_leaf()) {
    node = &node->children[node->classifier.route(projected_features)];
  }
  return node->y_hat;
}

const SparseVec& predict_tree(const TreeNode& root, const SparseVec& features,
                              const TreeSeeds& seeds) {
  return route_projected(root, hash_project(features, seeds.features));
}

}  // namespace xforest
