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

#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "tree_checks.hpp"
#include "xforest/task_pool.hpp"
#include "xforest/tree.hpp"

using namespace xforest;
using namespace xforest::testing;

namespace {

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

SparseVec e(Index dim, Index i) { return SparseVec(dim, {{i, 1.0}}); }

TrainConfig small_config() {
  TrainConfig c;
  c.k = 2;
  c.n_leaf = 2;
  c.n_s = 1000;
  c.check_invariants = true;
  c.record_instances = true;
  return c;
}

}  // namespace

TEST_CASE("stop condition examples") {
  Gen g(1);
  TrainConfig cfg;
  cfg.n_leaf = 10;
  const Dataset three = random_dataset(g, 3, 20, 10);
  CHECK(test_stop_condition(three, iota(3), cfg));
  CHECK(*stop_reason(three, iota(3), cfg) == LeafReason::kTooFew);

  Dataset distinct{SparseMatrix(100), SparseMatrix(100)};
  for (Index i = 0; i < 100; ++i) {
    distinct.features.push_back(e(100, i));
    distinct.labels.push_back(e(100, i));
  }
  CHECK_FALSE(test_stop_condition(distinct, iota(100), cfg));

  Dataset same_labels{SparseMatrix(50), SparseMatrix(5)};
  for (int i = 0; i < 500; ++i) {
    same_labels.features.push_back(random_row(g, 50, 5, true));
    same_labels.labels.push_back(SparseVec(5, {{1, 1}, {3, 1}}));
  }
  CHECK(*stop_reason(same_labels, iota(500), cfg) == LeafReason::kSameLabels);

  Dataset same_features{SparseMatrix(5), SparseMatrix(20)};
  for (int i = 0; i < 30; ++i) {
    same_features.features.push_back(SparseVec(5, {{2, 0.5}}));
    same_features.labels.push_back(random_label_row(g, 20, 3));
  }
  CHECK(*stop_reason(same_features, iota(30), cfg) == LeafReason::kSameFeatures);
}

TEST_CASE("node sample is all rows when n_v <= n_s") {
  Gen g(2);
  const Dataset d = random_dataset(g, 5, 20, 10);
  TrainConfig cfg;
  cfg.n_s = 10000;
  const TreeSeeds seeds = derive_tree_seeds(1, 0, 20, 10);
  const ProjectedData p = project_dataset(d, seeds);
  const std::vector<std::size_t> rows{0, 1, 2, 3, 4};
  const NodeTraining t = train_node_classifier(p, rows, cfg, 99);
  CHECK(t.sample == rows);
  CHECK(t.classifier.centroids.size() == cfg.k);
}

TEST_CASE("node sample is a subset without replacement when n_v > n_s") {
  Gen g(3);
  const Dataset d = random_dataset(g, 40, 20, 10);
  TrainConfig cfg;
  cfg.k = 2;
  cfg.n_s = 7;
  const ProjectedData p = project_dataset(d, derive_tree_seeds(1, 0, 20, 10));
  const auto rows = iota(40);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const NodeTraining t = train_node_classifier(p, rows, cfg, seed);
    CHECK(t.sample.size() == 7);
    CHECK(std::set<std::size_t>(t.sample.begin(), t.sample.end()).size() == 7);
    CHECK(t.clusters.labels.size() == 7);
  }
}

TEST_CASE("two orthogonal instances give two singleton clusters") {
  ProjectedData p{SparseMatrix(3, {SparseVec(3, {{0, 3}, {1, 4}}), SparseVec(3, {{2, 2}})}),
                  SparseMatrix(2, {e(2, 0), e(2, 1)})};
  TrainConfig cfg;
  cfg.k = 2;
  const NodeTraining t = train_node_classifier(p, std::vector<std::size_t>{0, 1}, cfg, 5);
  REQUIRE(t.clusters.labels.size() == 2);
  CHECK(t.clusters.labels[0] != t.clusters.labels[1]);
  // Cluster labels follow sampling order.
  const std::size_t first = t.sample[0] == 0 ? 0 : 1;
  const SparseVec& c0 = t.classifier.centroids[t.clusters.labels[first]];
  const SparseVec& c1 = t.classifier.centroids[t.clusters.labels[1 - first]];
  REQUIRE(c0.nnz() == 2);
  CHECK(c0.entries()[0].col == 0);
  CHECK(c0.entries()[0].val == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(c0.entries()[1].val == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(c1 == SparseVec(3, {{2, 1}}));
}

TEST_CASE("split examples") {
  const NodeClassifier c = NodeClassifier::from_centroids({e(2, 0), e(2, 1)});
  const SparseMatrix x(2, {e(2, 0), e(2, 0), e(2, 1)});
  SplitResult s = split(c, x, iota(3));
  CHECK_FALSE(s.degenerate);
  CHECK(s.children[0] == std::vector<std::size_t>{0, 1});
  CHECK(s.children[1] == std::vector<std::size_t>{2});

  // Zero similarity everywhere ties to child 0.
  const NodeClassifier one = NodeClassifier::from_centroids({SparseVec(2), e(2, 1)});
  s = split(one, x, iota(3));
  CHECK_FALSE(s.degenerate);
  CHECK(s.children[0] == std::vector<std::size_t>{0, 1});
  const SparseMatrix only_first(2, {e(2, 0), e(2, 0)});
  CHECK(split(one, only_first, iota(2)).degenerate);

  const NodeClassifier none = NodeClassifier::from_centroids({SparseVec(2), SparseVec(2)});
  CHECK(split(none, x, iota(3)).degenerate);

  const double r = 1.0 / std::sqrt(2.0);
  const SparseMatrix ties(2, {SparseVec(2, {{0, r}, {1, r}}), e(2, 1)});
  s = split(c, ties, iota(2));
  CHECK(s.children[0] == std::vector<std::size_t>{0});
  CHECK(s.children[1] == std::vector<std::size_t>{1});
}

TEST_CASE("one instance trains a single leaf") {
  Gen g(4);
  const Dataset d = random_dataset(g, 1, 10, 6);
  const TrainedTree t = train_tree(d, small_config(), 0);
  CHECK(t.root.is_leaf());
  CHECK(t.root.y_hat == d.labels[0]);
  CHECK(t.stats.nodes.size() == 1);
  CHECK(t.stats.nodes[0].reason == LeafReason::kTooFew);
}

TEST_CASE("identical labels give a root leaf regardless of n") {
  Gen g(5);
  Dataset d{SparseMatrix(30), SparseMatrix(4)};
  for (int i = 0; i < 300; ++i) {
    d.features.push_back(random_row(g, 30, 4, true));
    d.labels.push_back(SparseVec(4, {{2, 1}}));
  }
  const TrainedTree t = train_tree(d, small_config(), 0);
  CHECK(t.root.is_leaf());
  CHECK(t.root.y_hat == SparseVec(4, {{2, 1}}));
}

TEST_CASE("two separated groups give a depth-1 tree with the group means") {
  Gen g(6);
  const Dataset d = grouped_dataset(g, 2, 20);
  TrainConfig cfg;
  cfg.k = 2;
  cfg.n_leaf = 25;
  cfg.proj_dx = 4096;
  cfg.proj_dy = 4096;
  cfg.check_invariants = true;
  const TrainedTree t = train_tree(d, cfg, 0);
  REQUIRE_FALSE(t.root.is_leaf());
  REQUIRE(t.root.children.size() == 2);
  CHECK(t.stats.depth() == 1);

  std::vector<std::size_t> group0(20), group1(20);
  std::iota(group0.begin(), group0.end(), 0);
  std::iota(group1.begin(), group1.end(), 20);
  const auto mean0 = dense_mean(d.labels, group0);
  const auto mean1 = dense_mean(d.labels, group1);
  const TreeNode& a = t.root.children[0];
  const TreeNode& b = t.root.children[1];
  REQUIRE(a.is_leaf());
  REQUIRE(b.is_leaf());
  const bool a_is_0 = densify(a.y_hat) == mean0;
  CHECK((a_is_0 ? densify(b.y_hat) : densify(a.y_hat)) == mean1);
  CHECK(densify(a_is_0 ? a.y_hat : b.y_hat) == mean0);

  // Routing: each training instance reaches its own group's leaf.
  for (std::size_t i = 0; i < 40; ++i) {
    const SparseVec& leaf = predict_tree(t.root, d.features[i], t.seeds);
    CHECK(densify(leaf) == (i < 20 ? mean0 : mean1));
  }
}

TEST_CASE("prediction on a single-leaf tree ignores the input") {
  TreeNode leaf;
  leaf.y_hat = SparseVec(3, {{1, 0.5}});
  const TreeSeeds seeds = derive_tree_seeds(1, 0, 4, 3);
  CHECK(predict_tree(leaf, SparseVec(10, {{4, 2}}), seeds) == leaf.y_hat);
  CHECK(predict_tree(leaf, SparseVec(10), seeds) == leaf.y_hat);
}

TEST_CASE("zero feature row follows the leftmost path") {
  Gen g(7);
  const Dataset d = random_dataset(g, 200, 30, 12);
  const TrainedTree t = train_tree(d, small_config(), 3);
  const TreeNode* node = &t.root;
  while (!node->is_leaf()) node = &node->children[0];
  CHECK(&predict_tree(t.root, SparseVec(30), t.seeds) == &node->y_hat);
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.k = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.n_leaf = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.n_s = 5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.m_F = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("projection dim rules") {
  TrainConfig c;
  CHECK(c.feature_proj_dim(500, 20000) == 500);
  CHECK(c.feature_proj_dim(50000, 20) == 10000);
  CHECK(c.label_proj_dim(4000) == 4000);
  CHECK(c.label_proj_dim(40000) == 10000);
  c.dx_rule = ProjectionDimRule::kLabelDim;
  CHECK(c.feature_proj_dim(500, 20000) == 10000);
  CHECK(c.feature_proj_dim(50000, 20) == 20);
  c.proj_dx = 77;
  c.proj_dy = 88;
  CHECK(c.feature_proj_dim(500, 20000) == 77);
  CHECK(c.label_proj_dim(4000) == 88);
}

TEST_CASE("property: tree invariants on random datasets") {
  Gen g(8);
  for (int trial = 0; trial < 200; ++trial) {
    const Dataset d = random_dataset(g, uniform(g, 1, 150), static_cast<Index>(uniform(g, 1, 50)),
                                     static_cast<Index>(uniform(g, 1, 30)), 6, 4);
    TrainConfig cfg = small_config();
    cfg.k = static_cast<std::uint32_t>(uniform(g, 2, 5));
    cfg.n_leaf = static_cast<std::uint32_t>(uniform(g, 1, 12));
    cfg.n_s = static_cast<std::uint32_t>(uniform(g, cfg.k, 200));
    const TrainedTree t = train_tree(d, cfg, static_cast<std::uint64_t>(trial));
    const TreeCheck check = check_tree(d, cfg, t);
    CHECK_MESSAGE(check.ok, check.message);
  }
}

TEST_CASE("property: training is deterministic and schedule independent") {
  Gen g(9);
  const Dataset d = random_dataset(g, 600, 40, 25, 8, 4);
  TrainConfig cfg = small_config();
  cfg.k = 3;
  cfg.spawn_threshold = 1;
  const TrainedTree a = train_tree(d, cfg, 5);
  const TrainedTree b = train_tree(d, cfg, 5);
  CHECK(a.root == b.root);
  TaskPool pool(4);
  const TrainedTree c = train_tree(d, cfg, 5, &pool);
  CHECK(a.root == c.root);
  CHECK(a.stats.nodes.size() == c.stats.nodes.size());
  const TrainedTree other = train_tree(d, cfg, 6);
  CHECK_FALSE(a.root == other.root);
}
