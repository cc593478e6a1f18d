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

#include "xforest/forest.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <string>

#include "xforest/task_pool.hpp"

namespace xforest {

bool operator==(const ForestModel& a, const ForestModel& b) {
  const TrainConfig& x = a.cfg;
  const TrainConfig& y = b.cfg;
  return a.format_version == b.format_version && a.d_x == b.d_x &&
         a.d_y == b.d_y && x.k == y.k && x.n_leaf == y.n_leaf &&
         x.n_s == y.n_s && x.proj_dx == y.proj_dx && x.proj_dy == y.proj_dy &&
         x.proj_cap == y.proj_cap && x.dx_rule == y.dx_rule &&
         x.kmeans_iters == y.kmeans_iters && x.master_seed == y.master_seed &&
         x.m_F == y.m_F && a.trees == b.trees;
}

WorkSpanReport work_span_report(const TreeStats& stats) {
  WorkSpanReport r;
  std::vector<double> path(stats.nodes.size(), 0.0);
  for (std::size_t i = 0; i < stats.nodes.size(); ++i) {
    const NodeStats& n = stats.nodes[i];
    const double above =
        n.parent < 0 ? 0.0 : path[static_cast<std::size_t>(n.parent)];
    path[i] = above + n.work;
    r.t1 += n.work;
    r.tinf = std::max(r.tinf, path[i]);
    r.depth = std::max(r.depth, n.depth);
  }
  r.parallelism = r.tinf > 0.0 ? r.t1 / r.tinf : 1.0;
  return r;
}

ForestTraining train_trees(const Dataset& data, const TrainConfig& cfg,
                           std::uint64_t first, std::uint64_t last,
                           std::size_t threads) {
  cfg.validate();
  data.validate();
  if (first > last) throw std::invalid_argument("train_trees: empty range");
  if (data.n() == 0) throw std::invalid_argument("train_trees: empty dataset");
  const auto start = std::chrono::steady_clock::now();

  const std::size_t count = last - first;
  std::vector<TrainedTree> trained(count);
  {
    TaskPool pool(std::max<std::size_t>(threads, 1));
    TaskGroup group(&pool);
    for (std::size_t i = 0; i < count; ++i) {
      group.spawn([&, i] {
        trained[i] = train_tree(data, cfg, first + i, &pool);
      });
    }
    group.wait();
  }

  ForestTraining out;
  out.model.cfg = cfg;
  out.model.d_x = data.d_x();
  out.model.d_y = data.d_y();
  out.model.trees.reserve(count);
  for (TrainedTree& t : trained) {
    out.work_span.push_back(work_span_report(t.stats));
    out.stats.push_back(std::move(t.stats));
    out.model.trees.push_back({t.tree_index, t.seeds, std::move(t.root)});
  }
  out.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  return out;
}

ForestTraining train_forest(const Dataset& data, const TrainConfig& cfg,
                            std::size_t threads) {
  return train_trees(data, cfg, 0, cfg.m_F, threads);
}

SparseVec score_forest(const ForestModel& model, const SparseVec& features) {
  if (features.dim() != model.d_x) {
    throw std::invalid_argument("feature dim " +
                                std::to_string(features.dim()) +
                                " != model d_x " + std::to_string(model.d_x));
  }
  if (model.trees.empty()) return SparseVec(model.d_y);
  std::vector<Entry> terms;
  for (const ForestTree& t : model.trees) {
    const SparseVec& leaf = predict_tree(t.root, features, t.seeds);
    const auto e = leaf.entries();
    terms.insert(terms.end(), e.begin(), e.end());
  }
  // Same grouping as mean_rows: stable sort, sum per label in tree order.
  std::stable_sort(terms.begin(), terms.end(),
                   [](const Entry& a, const Entry& b) { return a.col < b.col; });
  const Accum count = static_cast<Accum>(model.trees.size());
  std::vector<Entry> out;
  std::size_t i = 0;
  while (i < terms.size()) {
    const Index col = terms[i].col;
    Accum sum = 0;
    for (; i < terms.size() && terms[i].col == col; ++i) sum += terms[i].val;
    const double v = static_cast<double>(sum / count);
    if (v != 0.0) out.push_back({col, v});
  }
  return SparseVec(model.d_y, std::move(out));
}

std::vector<ScoredLabel> top_k_labels(const SparseVec& scores,
                                      std::size_t top_k) {
  std::vector<ScoredLabel> ranked;
  ranked.reserve(scores.nnz());
  for (const Entry& e : scores) ranked.push_back({e.col, e.val});
  auto better = [](const ScoredLabel& a, const ScoredLabel& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.label < b.label;
  };
  const std::size_t want = std::min<std::size_t>(top_k, scores.dim());
  if (ranked.size() > want) {
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<long>(want),
                      ranked.end(), better);
    ranked.resize(want);
  } else {
    std::sort(ranked.begin(), ranked.end(), better);
  }
  // Pad with unscored labels. Scores are non-negative here, so a zero score
  // ranks below every stored one.
  for (Index label = 0; ranked.size() < want && label < scores.dim(); ++label) {
    const auto e = scores.entries();
    const bool stored = std::binary_search(
        e.begin(), e.end(), Entry{label, 0.0},
        [](const Entry& a, const Entry& b) { return a.col < b.col; });
    if (!stored) ranked.push_back({label, 0.0});
  }
  return ranked;
}

std::vector<ScoredLabel> predict_forest(const ForestModel& model,
                                        const SparseVec& features,
                                        std::size_t top_k) {
  if (top_k < 1) throw std::invalid_argument("predict_forest: top_k >= 1");
  return top_k_labels(score_forest(model, features), top_k);
}

}  // namespace xforest
