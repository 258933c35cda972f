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

#include "coughkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

using namespace coughkit;

TEST_CASE("substreams are deterministic and name-sensitive") {
  Rng a = Rng::substream(7, "alpha");
  Rng b = Rng::substream(7, "alpha");
  Rng c = Rng::substream(7, "beta");
  bool differs = false;
  for (int i = 0; i < 16; ++i) {
    uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
    if (va != c.next_u64()) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("per-sample streams depend on epoch and index") {
  Rng a = Rng::for_sample(1, 0, 5);
  Rng b = Rng::for_sample(1, 0, 5);
  Rng c = Rng::for_sample(1, 1, 5);
  Rng d = Rng::for_sample(1, 0, 6);
  CHECK(a.next_u64() == b.next_u64());
  Rng a2 = Rng::for_sample(1, 0, 5);
  CHECK(a2.next_u64() != c.next_u64());
  Rng a3 = Rng::for_sample(1, 0, 5);
  CHECK(a3.next_u64() != d.next_u64());
}

TEST_CASE("uniform stays in range, normal has sane moments") {
  Rng rng(11);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sum_sq / n - 1.0) < 0.05);
}

TEST_CASE("beta(0.8, 0.8) lands in (0, 1) and is roughly symmetric") {
  Rng rng(12);
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double x = rng.beta(0.8, 0.8);
    CHECK(x > 0.0);
    CHECK(x < 1.0);
    mean += x;
  }
  CHECK(std::abs(mean / n - 0.5) < 0.02);
}

TEST_CASE("shuffle permutes without changing the multiset") {
  Rng rng(13);
  std::vector<int> v{1, 2, 2, 3, 5, 8, 8, 8, 9};
  std::vector<int> orig = v;
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == orig);
}

TEST_CASE("sample_without_replacement returns k distinct indices in range") {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    auto idx = rng.sample_without_replacement(20, 7);
    CHECK(idx.size() == 7);
    std::set<int> distinct(idx.begin(), idx.end());
    CHECK(distinct.size() == 7);
    for (int i : idx) {
      CHECK(i >= 0);
      CHECK(i < 20);
    }
  }
}

TEST_CASE("uniform_int rejects zero and covers the range") {
  Rng rng(15);
  CHECK_THROWS_AS(rng.uniform_int(0), InvalidInput);
  std::set<uint64_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(rng.uniform_int(5));
  CHECK(seen.size() == 5);
}
