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

// Times the OpenMP kernels against their serial references and checks that
// the outputs agree bit for bit (parallelism never reorders a reduction).

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "coughkit/kernels.hpp"
#include "coughkit/rng.hpp"

using coughkit::Rng;
namespace kernels = coughkit::kernels;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void bench_matmul(int m, int k, int n, int reps) {
  Rng rng(42);
  std::vector<float> a(static_cast<size_t>(m) * k), b(static_cast<size_t>(k) * n);
  for (auto& v : a) v = static_cast<float>(rng.normal());
  for (auto& v : b) v = static_cast<float>(rng.normal());
  std::vector<float> out_serial(static_cast<size_t>(m) * n), out_parallel(out_serial.size());

  const double t_serial = time_ms([&] { kernels::matmul_serial(a.data(), b.data(), out_serial.data(), m, k, n); }, reps);
  const double t_parallel = time_ms([&] { kernels::matmul(a.data(), b.data(), out_parallel.data(), m, k, n); }, reps);

  bool identical = true;
  for (size_t i = 0; i < out_serial.size(); ++i) {
    if (out_serial[i] != out_parallel[i]) {
      identical = false;
      break;
    }
  }
  std::printf("matmul %4dx%4dx%4d  serial %8.3f ms  parallel %8.3f ms  speedup %5.2fx  bitwise %s\n", m, k, n,
              t_serial, t_parallel, t_serial / t_parallel, identical ? "OK" : "MISMATCH");
}

void bench_matmul_at(int m, int k, int n, int reps) {
  Rng rng(7);
  std::vector<float> a(static_cast<size_t>(m) * k), b(static_cast<size_t>(m) * n);
  for (auto& v : a) v = static_cast<float>(rng.normal());
  for (auto& v : b) v = static_cast<float>(rng.normal());
  std::vector<float> out_serial(static_cast<size_t>(k) * n), out_parallel(out_serial.size());

  const double t_serial =
      time_ms([&] { kernels::matmul_at_serial(a.data(), b.data(), out_serial.data(), m, k, n); }, reps);
  const double t_parallel = time_ms([&] { kernels::matmul_at(a.data(), b.data(), out_parallel.data(), m, k, n); }, reps);

  bool identical = true;
  for (size_t i = 0; i < out_serial.size(); ++i) {
    if (out_serial[i] != out_parallel[i]) {
      identical = false;
      break;
    }
  }
  std::printf("matmul_at %4dx%4dx%4d  serial %8.3f ms  parallel %8.3f ms  speedup %5.2fx  bitwise %s\n", m, k,
              n, t_serial, t_parallel, t_serial / t_parallel, identical ? "OK" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, thread cap %d (0 = runtime default)\n", coughkit::max_threads());
#else
  std::printf("OpenMP not available, parallel kernels fall back to serial\n");
#endif
  bench_matmul(64, 64, 64, 50);
  bench_matmul(256, 256, 256, 10);
  bench_matmul(512, 512, 512, 3);
  bench_matmul(1024, 256, 1024, 3);
  bench_matmul_at(256, 256, 256, 10);
  bench_matmul_at(512, 512, 512, 3);
  return 0;
}
