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

#include "xforest/clustering.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace xforest {

namespace {

constexpr std::uint32_t kUnassigned = std::numeric_limits<std::uint32_t>::max();

// A row already this close to its centroid is not worth moving into an
// empty cluster: it would only duplicate that centroid.
constexpr double kRepairSlack = 1e-12;

struct Nearest {
  std::uint32_t index = 0;
  double similarity = 0.0;
};

Nearest nearest(const SparseVec& row, double row_norm,
                std::span<const SparseVec> centroids,
                std::span<const double> norms) {
  Nearest best;
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    double sim = 0.0;
    if (row_norm != 0.0 && norms[i] != 0.0) {
      sim = dot(row, centroids[i]) / (row_norm * norms[i]);
    }
    if (i == 0 || sim > best.similarity) {
      best.index = static_cast<std::uint32_t>(i);
      best.similarity = sim;
    }
  }
  return best;
}

std::vector<double> norms_of(std::span<const SparseVec> vs) {
  std::vector<double> out;
  out.reserve(vs.size());
  for (const SparseVec& v : vs) out.push_back(l2_norm(v));
  return out;
}

// Cosine distance to a unit-norm center; rows are unit norm or zero.
double cosine_distance(const SparseVec& unit_row, const SparseVec& center) {
  return std::max(0.0, 1.0 - dot(unit_row, center));
}

std::vector<SparseVec> kmeanspp_unit(std::span<const SparseVec> unit,
                                     std::uint32_t k, Rng& rng,
                                     std::uint64_t& ops) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < unit.size(); ++i) {
    if (!unit[i].empty()) candidates.push_back(i);
  }
  std::vector<SparseVec> centers;
  centers.reserve(k);
  if (candidates.empty()) {
    for (std::uint32_t c = 0; c < k; ++c) {
      centers.push_back(unit[rng.uniform_index(unit.size())]);
    }
    return centers;
  }

  auto uniform_candidate = [&] {
    return candidates[rng.uniform_index(candidates.size())];
  };
  std::size_t pick = uniform_candidate();
  centers.push_back(unit[pick]);

  // D(y) for candidate rows; zero rows keep weight 0.
  std::vector<double> dist(unit.size(), 0.0);
  for (std::size_t i : candidates) {
    dist[i] = cosine_distance(unit[i], centers.back());
    ops += unit[i].nnz();
  }

  while (centers.size() < k) {
    Accum total = 0;
    for (std::size_t i : candidates) total += static_cast<Accum>(dist[i]) * dist[i];
    if (total <= 0) {
      pick = uniform_candidate();
    } else {
      const Accum target = static_cast<Accum>(rng.uniform01()) * total;
      Accum cum = 0;
      pick = candidates.back();
      for (std::size_t i : candidates) {
        if (dist[i] == 0.0) continue;
        cum += static_cast<Accum>(dist[i]) * dist[i];
        if (cum > target) {
          pick = i;
          break;
        }
        pick = i;
      }
    }
    centers.push_back(unit[pick]);
    if (centers.size() == k) break;
    for (std::size_t i : candidates) {
      dist[i] = std::min(dist[i], cosine_distance(unit[i], centers.back()));
      ops += unit[i].nnz();
    }
  }
  return centers;
}

}  // namespace

void KMeansConfig::validate() const {
  if (k < 2) throw std::invalid_argument("k-means: k must be >= 2");
  if (max_iters < 1) throw std::invalid_argument("k-means: max_iters >= 1");
}

std::uint32_t assign_nearest(const SparseVec& row,
                             std::span<const SparseVec> centroids) {
  const auto norms = norms_of(centroids);
  return assign_nearest(row, centroids, norms);
}

std::uint32_t assign_nearest(const SparseVec& row,
                             std::span<const SparseVec> centroids,
                             std::span<const double> norms) {
  if (centroids.empty()) {
    throw std::invalid_argument("assign_nearest: no centroids");
  }
  return nearest(row, l2_norm(row), centroids, norms).index;
}

std::vector<SparseVec> kmeanspp_init(const SparseMatrix& rows, std::uint32_t k,
                                     Rng& rng) {
  if (rows.n_rows() == 0) {
    throw std::invalid_argument("kmeanspp_init: no rows");
  }
  std::vector<SparseVec> unit;
  unit.reserve(rows.n_rows());
  for (const SparseVec& r : rows.rows()) unit.push_back(l2_normalize(r));
  std::uint64_t ops = 0;
  return kmeanspp_unit(unit, k, rng, ops);
}

ClusterAssignment spherical_kmeans(const SparseMatrix& rows,
                                   const KMeansConfig& cfg) {
  cfg.validate();
  if (rows.n_rows() == 0) {
    throw std::invalid_argument("spherical_kmeans: no rows");
  }
  const std::size_t n = rows.n_rows();
  std::vector<SparseVec> unit;
  std::vector<double> row_norms;
  unit.reserve(n);
  row_norms.reserve(n);
  for (const SparseVec& r : rows.rows()) {
    unit.push_back(l2_normalize(r));
    row_norms.push_back(l2_norm(unit.back()));
  }

  ClusterAssignment out;
  Rng rng(cfg.seed);
  out.centroids = kmeanspp_unit(unit, cfg.k, rng, out.ops);
  out.labels.assign(n, kUnassigned);

  std::vector<std::uint32_t> next(n);
  std::vector<double> sims(n);
  for (std::uint32_t pass = 0; pass < cfg.max_iters; ++pass) {
    const auto norms = norms_of(out.centroids);
    Accum total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const Nearest best = nearest(unit[i], row_norms[i], out.centroids, norms);
      next[i] = best.index;
      sims[i] = best.similarity;
      total += best.similarity;
      out.ops += unit[i].nnz() * cfg.k;
    }
    out.objective.push_back(static_cast<double>(total / static_cast<Accum>(n)));
    if (next == out.labels) {
      out.converged = true;
      break;
    }
    out.labels = next;

    // Empty-cluster repair: each empty cluster takes the worst-fitting
    // non-zero row from a cluster that can spare one.
    std::vector<std::size_t> sizes(cfg.k, 0);
    for (std::uint32_t l : out.labels) ++sizes[l];
    if (std::find(sizes.begin(), sizes.end(), 0) != sizes.end()) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return sims[a] < sims[b];
      });
      std::size_t cursor = 0;
      for (std::uint32_t c = 0; c < cfg.k; ++c) {
        if (sizes[c] != 0) continue;
        while (cursor < n) {
          const std::size_t i = order[cursor++];
          if (row_norms[i] == 0.0 || sims[i] >= 1.0 - kRepairSlack) continue;
          if (sizes[out.labels[i]] < 2) continue;
          --sizes[out.labels[i]];
          out.labels[i] = c;
          ++sizes[c];
          break;
        }
      }
    }

    std::vector<std::vector<Entry>> sums(cfg.k);
    for (std::size_t i = 0; i < n; ++i) {
      const auto e = unit[i].entries();
      auto& bucket = sums[out.labels[i]];
      bucket.insert(bucket.end(), e.begin(), e.end());
      out.ops += e.size();
    }
    for (std::uint32_t c = 0; c < cfg.k; ++c) {
      out.centroids[c] = l2_normalize(
          SparseVec::from_unsorted(rows.n_cols(), std::move(sums[c])));
    }
    ++out.iterations;
  }
  return out;
}

}  // namespace xforest
