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

#include "coughkit/kernels.hpp"

#include <doctest.h>

#include "coughkit/rng.hpp"

using namespace coughkit;

namespace {

// naive reference, independent of the kernels
template <typename T>
std::vector<T> naive_matmul(const std::vector<T>& a, const std::vector<T>& b, int m, int k, int n) {
  std::vector<T> out(static_cast<size_t>(m) * n, T(0));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      out[i * n + j] = acc;
    }
  }
  return out;
}

std::vector<double> random_matrix(Rng& rng, int rows, int cols) {
  std::vector<double> m(static_cast<size_t>(rows) * cols);
  for (auto& v : m) v = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("matmul matches the naive oracle") {
  Rng rng(1);
  const int m = 7, k = 5, n = 9;
  auto a = random_matrix(rng, m, k);
  auto b = random_matrix(rng, k, n);
  std::vector<double> out(static_cast<size_t>(m) * n);
  kernels::matmul(a.data(), b.data(), out.data(), m, k, n);
  auto expect = naive_matmul(a, b, m, k, n);
  for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("parallel matmul is bit-identical to the serial reference") {
  Rng rng(2);
  const int m = 128, k = 96, n = 64;  // big enough to take the parallel path
  auto a = random_matrix(rng, m, k);
  auto b = random_matrix(rng, k, n);
  std::vector<double> serial(static_cast<size_t>(m) * n), parallel(serial.size());
  kernels::matmul_serial(a.data(), b.data(), serial.data(), m, k, n);
  kernels::matmul(a.data(), b.data(), parallel.data(), m, k, n);
  for (size_t i = 0; i < serial.size(); ++i) CHECK(serial[i] == parallel[i]);
}

TEST_CASE("matmul_bt computes a * b^T") {
  Rng rng(3);
  const int m = 6, k = 4, n = 5;
  auto a = random_matrix(rng, m, k);
  auto bt = random_matrix(rng, n, k);  // b^T stored [n x k]
  std::vector<double> b(static_cast<size_t>(k) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) b[j * n + i] = bt[i * k + j];
  }
  std::vector<double> out(static_cast<size_t>(m) * n);
  kernels::matmul_bt(a.data(), bt.data(), out.data(), m, k, n);
  auto expect = naive_matmul(a, b, m, k, n);
  for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("matmul_at computes a^T * b, parallel identical to serial") {
  Rng rng(4);
  const int m = 64, k = 48, n = 56;
  auto a = random_matrix(rng, m, k);
  auto b = random_matrix(rng, m, n);
  std::vector<double> at(static_cast<size_t>(k) * m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < k; ++j) at[j * m + i] = a[i * k + j];
  }
  auto expect = naive_matmul(at, b, k, m, n);

  std::vector<double> serial(static_cast<size_t>(k) * n), parallel(serial.size());
  kernels::matmul_at_serial(a.data(), b.data(), serial.data(), m, k, n);
  kernels::matmul_at(a.data(), b.data(), parallel.data(), m, k, n);
  for (size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    CHECK(serial[i] == parallel[i]);
  }
}

TEST_CASE("parallel_for covers every index once") {
  std::vector<int> hits(1000, 0);
  kernels::parallel_for(1000, [&](int i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
}
