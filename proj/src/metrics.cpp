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

#include "xforest/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <string>

#include "xforest/task_pool.hpp"

namespace xforest {

double precision_at_k(std::span<const Index> ranking, const SparseVec& truth,
                      int k) {
  if (k <= 0) throw std::invalid_argument("precision_at_k: k must be >= 1");
  const auto labels = truth.entries();
  const std::size_t upto =
      std::min(ranking.size(), static_cast<std::size_t>(k));
  int hits = 0;
  for (std::size_t i = 0; i < upto; ++i) {
    const bool relevant = std::binary_search(
        labels.begin(), labels.end(), Entry{ranking[i], 0.0},
        [](const Entry& a, const Entry& b) { return a.col < b.col; });
    hits += relevant ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

EvalReport evaluate(const ForestModel& model, const Dataset& test,
                    std::span<const int> ks, std::size_t threads) {
  if (test.d_x() != model.d_x) {
    throw std::invalid_argument("test d_x " + std::to_string(test.d_x()) +
                                " != model d_x " + std::to_string(model.d_x));
  }
  if (test.d_y() != model.d_y) {
    throw std::invalid_argument("test d_y " + std::to_string(test.d_y()) +
                                " != model d_y " + std::to_string(model.d_y));
  }
  if (ks.empty()) throw std::invalid_argument("evaluate: no k values");
  int max_k = 0;
  for (int k : ks) {
    if (k <= 0) throw std::invalid_argument("evaluate: k must be >= 1");
    max_k = std::max(max_k, k);
  }

  const std::size_t n = test.n();
  EvalReport report;
  report.n_test = n;
  for (int k : ks) report.per_sample[k].assign(n, 0.0);

  auto eval_row = [&](std::size_t i) {
    const auto top = predict_forest(model, test.features.row(i),
                                    static_cast<std::size_t>(max_k));
    std::vector<Index> ranking;
    ranking.reserve(top.size());
    for (const ScoredLabel& s : top) ranking.push_back(s.label);
    for (int k : ks) {
      report.per_sample.at(k)[i] = precision_at_k(ranking, test.labels.row(i), k);
    }
  };

  const auto start = std::chrono::steady_clock::now();
  {
    constexpr std::size_t kChunk = 64;
    TaskPool pool(std::max<std::size_t>(threads, 1));
    TaskGroup group(&pool);
    for (std::size_t lo = 0; lo < n; lo += kChunk) {
      const std::size_t hi = std::min(n, lo + kChunk);
      group.spawn([&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i) eval_row(i);
      });
    }
    group.wait();
  }
  report.predict_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  report.predict_ms_per_sample =
      n == 0 ? 0.0 : 1000.0 * report.predict_seconds / static_cast<double>(n);

  for (const auto& [k, values] : report.per_sample) {
    Accum sum = 0;
    for (double v : values) sum += v;
    report.p_at[k] =
        n == 0 ? 0.0 : static_cast<double>(sum / static_cast<Accum>(n));
  }
  return report;
}

}  // namespace xforest
