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

#include "coughkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace coughkit::eval {

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const size_t n = scores.size();
  if (n != labels.size()) throw InvalidInput("auroc: scores and labels differ in length");
  if (n < 2) throw InvalidInput("auroc: need at least two samples");

  size_t n_pos = 0;
  for (size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidInput("auroc: labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw InvalidInput("auroc: non-finite score");
    n_pos += static_cast<size_t>(labels[i]);
  }
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InvalidInput("auroc: both classes must be present");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // midranks: tied scores share the average of their 1-based rank span
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) pos_rank_sum += midrank;
    }
    i = j + 1;
  }

  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<ScoredSample> aggregate_by_subject(const std::vector<ScoredSample>& samples) {
  struct Acc {
    double sum = 0.0;
    int count = 0;
    int label = -1;
  };
  std::map<std::string, Acc> by_subject;
  for (const auto& s : samples) {
    Acc& a = by_subject[s.subject_id];
    if (a.label >= 0 && a.label != s.label) {
      throw InvalidInput("aggregate_by_subject: subject '" + s.subject_id + "' has conflicting labels");
    }
    a.label = s.label;
    a.sum += s.score;
    a.count += 1;
  }
  std::vector<ScoredSample> out;
  out.reserve(by_subject.size());
  for (const auto& [id, a] : by_subject) {
    out.push_back(ScoredSample{id, a.sum / a.count, a.label});
  }
  return out;
}

EvalReport multi_seed_report(const std::function<double(uint64_t)>& run_fn, const std::vector<uint64_t>& seeds) {
  if (seeds.empty()) throw InvalidInput("multi_seed_report: need at least one seed");
  EvalReport report;
  report.seeds = seeds;
  double sum = 0.0;
  for (uint64_t seed : seeds) {
    try {
      const double a = run_fn(seed);
      report.per_seed_auroc.push_back(a);
      report.seed_failed.push_back(false);
      sum += a;
      ++report.n_succeeded;
    } catch (const std::exception&) {
      report.per_seed_auroc.push_back(std::numeric_limits<double>::quiet_NaN());
      report.seed_failed.push_back(true);
    }
  }
  report.mean_auroc =
      report.n_succeeded > 0 ? sum / report.n_succeeded : std::numeric_limits<double>::quiet_NaN();
  return report;
}

}  // namespace coughkit::eval
