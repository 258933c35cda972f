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

#include <cstddef>
#include <functional>

#include "coughkit/common.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace coughkit::kernels {

// Hot inner loops. Each OpenMP kernel has a serial reference twin that the
// tests compare against bit for bit: parallelism is over independent output
// elements and the per-element accumulation order never changes, so results
// do not depend on thread count or schedule.

/// out[m x n] = a[m x k] * b[k x n], serial reference.
template <typename T>
void matmul_serial(const T* a, const T* b, T* out, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* ai = a + static_cast<size_t>(i) * k;
    T* oi = out + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) oi[j] = T(0);
    for (int p = 0; p < k; ++p) {
      T av = ai[p];
      const T* bp = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) oi[j] += av * bp[j];
    }
  }
}

/// out[m x n] = a[m x k] * b[k x n], rows split across threads.
template <typename T>
void matmul(const T* a, const T* b, T* out, int m, int k, int n) {
#ifdef _OPENMP
  int nt = max_threads();
  if (nt != 1 && static_cast<long long>(m) * k * n >= 16384) {
#pragma omp parallel for schedule(static) num_threads(nt > 0 ? nt : omp_get_max_threads())
    for (int i = 0; i < m; ++i) {
      matmul_serial(a + static_cast<size_t>(i) * k, b, out + static_cast<size_t>(i) * n, 1, k, n);
    }
    return;
  }
#endif
  matmul_serial(a, b, out, m, k, n);
}

/// out[m x n] = a[m x k] * b[n x k]^T, serial reference.
template <typename T>
void matmul_bt_serial(const T* a, const T* b, T* out, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* ai = a + static_cast<size_t>(i) * k;
    T* oi = out + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* bj = b + static_cast<size_t>(j) * k;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      oi[j] = acc;
    }
  }
}

/// out[m x n] = a[m x k] * b[n x k]^T.
template <typename T>
void matmul_bt(const T* a, const T* b, T* out, int m, int k, int n) {
#ifdef _OPENMP
  int nt = max_threads();
  if (nt != 1 && static_cast<long long>(m) * k * n >= 16384) {
#pragma omp parallel for schedule(static) num_threads(nt > 0 ? nt : omp_get_max_threads())
    for (int i = 0; i < m; ++i) {
      matmul_bt_serial(a + static_cast<size_t>(i) * k, b, out + static_cast<size_t>(i) * n, 1, k, n);
    }
    return;
  }
#endif
  matmul_bt_serial(a, b, out, m, k, n);
}

/// out[k x n] = a[m x k]^T * b[m x n], serial reference.
template <typename T>
void matmul_at_serial(const T* a, const T* b, T* out, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    T* op = out + static_cast<size_t>(p) * n;
    for (int j = 0; j < n; ++j) {
      T acc = T(0);
      for (int i = 0; i < m; ++i) acc += a[static_cast<size_t>(i) * k + p] * b[static_cast<size_t>(i) * n + j];
      op[j] = acc;
    }
  }
}

/// out[k x n] = a[m x k]^T * b[m x n].
template <typename T>
void matmul_at(const T* a, const T* b, T* out, int m, int k, int n) {
#ifdef _OPENMP
  int nt = max_threads();
  if (nt != 1 && static_cast<long long>(m) * k * n >= 16384) {
#pragma omp parallel for schedule(static) num_threads(nt > 0 ? nt : omp_get_max_threads())
    for (int p = 0; p < k; ++p) {
      T* op = out + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) {
        T acc = T(0);
        for (int i = 0; i < m; ++i)
          acc += a[static_cast<size_t>(i) * k + p] * b[static_cast<size_t>(i) * n + j];
        op[j] = acc;
      }
    }
    return;
  }
#endif
  matmul_at_serial(a, b, out, m, k, n);
}

/// Runs fn(i) for i in [0, n). Iterations must be independent.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
#ifdef _OPENMP
  int nt = max_threads();
  if (nt != 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(nt > 0 ? nt : omp_get_max_threads())
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
#endif
  for (int i = 0; i < n; ++i) fn(i);
}

}  // namespace coughkit::kernels
