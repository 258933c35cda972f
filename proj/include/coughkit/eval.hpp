// Copyright 2026 The CoughKit Authors
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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "coughkit/common.hpp"

namespace coughkit::eval {

struct ScoredSample {
  std::string subject_id;
  double score = 0.0;  // positive-class probability
  int label = 0;       // 0 or 1
};

/// Mann-Whitney AUROC via midrank rank sums, O(n log n). Ties count 1/2;
/// requires both classes present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

/// One entry per subject (sorted by id) with the arithmetic mean of its
/// segment scores. Conflicting labels within a subject are an error.
std::vector<ScoredSample> aggregate_by_subject(const std::vector<ScoredSample>& samples);

struct EvalReport {
  std::vector<uint64_t> seeds;
  std::vector<double> per_seed_auroc;  // NaN where the seed failed
  std::vector<bool> seed_failed;
  double mean_auroc = 0.0;  // over successful seeds
  int n_succeeded = 0;
  int n_pos = 0, n_neg = 0;
  std::string aggregation = "subject_mean";
};

/// Runs run_fn once per seed and aggregates. Failures (exceptions) mark the
/// seed failed; the mean covers the successes only.
EvalReport multi_seed_report(const std::function<double(uint64_t)>& run_fn, const std::vector<uint64_t>& seeds);

}  // namespace coughkit::eval
