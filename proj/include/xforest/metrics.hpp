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
#include <map>
#include <span>
#include <vector>

#include "xforest/forest.hpp"

namespace xforest {

// |ranking[0..k) ∩ truth| / k. The denominator is k even when the sample
// has fewer true labels. A ranking shorter than k counts missing slots as
// misses. Throws on k <= 0.
double precision_at_k(std::span<const Index> ranking, const SparseVec& truth,
                      int k);

struct EvalReport {
  std::map<int, double> p_at;
  std::size_t n_test = 0;
  double predict_seconds = 0.0;
  double predict_ms_per_sample = 0.0;
  // Per-sample precision per k, in test row order.
  std::map<int, std::vector<double>> per_sample;
};

EvalReport evaluate(const ForestModel& model, const Dataset& test,
                    std::span<const int> ks, std::size_t threads = 1);

}  // namespace xforest
