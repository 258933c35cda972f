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

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "coughkit/common.hpp"
#include "coughkit/kernels.hpp"

// Minimal dense-tensor reverse-mode engine. Tensors are immutable values on
// a dynamically built tape; float is the training type, double exists for
// finite-difference verification. All reductions run in a fixed sequential
// row-major order so results are bit-stable across runs and thread counts.

namespace coughkit::ad {

using Shape = std::vector<int>;

inline size_t numel(const Shape& s) {
  size_t n = 1;
  for (int d : s) {
    if (d < 1) throw InvalidInput("tensor shape has non-positive dim");
    n *= static_cast<size_t>(d);
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

/// Checked mode: every op output is scanned for NaN/Inf. On in tests, off
/// in benchmarks.
inline bool& checked_mode_flag() {
  thread_local bool flag = false;
  return flag;
}
inline void set_checked_mode(bool on) { checked_mode_flag() = on; }
inline bool checked_mode() { return checked_mode_flag(); }

template <typename T>
struct Node {
  // pgrads[i] is the scratch gradient of parents[i]; null when that parent
  // does not need a gradient.
  using GradFn = std::function<void(const std::vector<T>& gy, const std::vector<std::vector<T>*>& pgrads)>;

  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // accumulated across backward() calls
  bool requires_grad = false;
  bool needs_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  GradFn backward;
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> n) : n_(std::move(n)) {}

  static Tensor zeros(Shape shape) { return full(std::move(shape), T(0)); }

  static Tensor full(Shape shape, T v) {
    auto n = std::make_shared<Node<T>>();
    size_t count = numel(shape);
    n->shape = std::move(shape);
    n->value.assign(count, v);
    return Tensor(std::move(n));
  }

  static Tensor from_vector(Shape shape, std::vector<T> values) {
    if (numel(shape) != values.size()) {
      throw InvalidInput("tensor init: " + shape_str(shape) + " needs " + std::to_string(numel(shape)) +
                         " values, got " + std::to_string(values.size()));
    }
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    return Tensor(std::move(n));
  }

  static Tensor scalar(T v) { return from_vector({1}, {v}); }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int ndim() const { return static_cast<int>(n_->shape.size()); }
  int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
  size_t size() const { return n_->value.size(); }

  const std::vector<T>& data() const { return n_->value; }
  /// Mutable access for parameter updates; never mutate mid-graph.
  std::vector<T>& data() { return n_->value; }

  bool requires_grad() const { return n_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    n_->requires_grad = on;
    n_->needs_grad = on || !n_->parents.empty();
    if (on && n_->grad.size() != n_->value.size()) n_->grad.assign(n_->value.size(), T(0));
    return *this;
  }

  const std::vector<T>& grad() const {
    if (n_->grad.size() != n_->value.size()) n_->grad.assign(n_->value.size(), T(0));
    return n_->grad;
  }
  void zero_grad() { n_->grad.assign(n_->value.size(), T(0)); }

  T item() const {
    if (size() != 1) throw InvalidInput("item(): tensor " + shape_str(shape()) + " is not scalar");
    return n_->value[0];
  }

  Node<T>* node() const { return n_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return n_; }

 private:
  std::shared_ptr<Node<T>> n_;
};

template <typename T>
inline void check_finite(const std::vector<T>& v, const char* op) {
  if (!checked_mode()) return;
  for (T x : v) {
    if (!std::isfinite(static_cast<double>(x))) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
}

template <typename T>
Tensor<T> make_op(Shape shape, std::vector<T> value, std::vector<Tensor<T>> parents,
                  typename Node<T>::GradFn fn, const char* op_name) {
  check_finite(value, op_name);
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.node()->needs_grad;
  if (needs) {
    n->needs_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node_ptr());
    n->backward = std::move(fn);
  }
  return Tensor<T>(std::move(n));
}

// ---------------------------------------------------------------------------
// forward ops

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw InvalidInput("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(static_cast<size_t>(m) * n);
  kernels::matmul(a.data().data(), b.data().data(), out.data(), m, k, n);

  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  return make_op<T>(
      {m, n}, std::move(out), {a, b},
      [an, bn, m, k, n](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (pg[0]) {
          std::vector<T> tmp(static_cast<size_t>(m) * k);
          kernels::matmul_bt(gy.data(), bn->value.data(), tmp.data(), m, n, k);
          for (size_t i = 0; i < tmp.size(); ++i) (*pg[0])[i] += tmp[i];
        }
        if (pg[1]) {
          std::vector<T> tmp(static_cast<size_t>(k) * n);
          kernels::matmul_at(an->value.data(), gy.data(), tmp.data(), m, k, n);
          for (size_t i = 0; i < tmp.size(); ++i) (*pg[1])[i] += tmp[i];
        }
      },
      "matmul");
}

/// Elementwise add; also accepts a trailing-dimension bias (b of shape [n]
/// or [1 x n]) broadcast over the rows of a.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  const size_t na = a.size(), nb = b.size();
  const bool same = a.shape() == b.shape();
  const int last = a.dim(a.ndim() - 1);
  const bool bias = !same && static_cast<size_t>(last) == nb && na % nb == 0;
  if (!same && !bias) {
    throw InvalidInput("add: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  std::vector<T> out(na);
  if (same) {
    for (size_t i = 0; i < na; ++i) out[i] = a.data()[i] + b.data()[i];
  } else {
    const size_t rows = na / nb;
    for (size_t r = 0; r < rows; ++r) {
      for (size_t j = 0; j < nb; ++j) out[r * nb + j] = a.data()[r * nb + j] + b.data()[j];
    }
  }
  return make_op<T>(
      a.shape(), std::move(out), {a, b},
      [na, nb, same](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (pg[0]) {
          for (size_t i = 0; i < na; ++i) (*pg[0])[i] += gy[i];
        }
        if (pg[1]) {
          if (same) {
            for (size_t i = 0; i < nb; ++i) (*pg[1])[i] += gy[i];
          } else {
            const size_t rows = na / nb;
            for (size_t r = 0; r < rows; ++r) {
              for (size_t j = 0; j < nb; ++j) (*pg[1])[j] += gy[r * nb + j];
            }
          }
        }
      },
      "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw InvalidInput("sub: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_op<T>(
      a.shape(), std::move(out), {a, b},
      [](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (pg[0]) {
          for (size_t i = 0; i < gy.size(); ++i) (*pg[0])[i] += gy[i];
        }
        if (pg[1]) {
          for (size_t i = 0; i < gy.size(); ++i) (*pg[1])[i] -= gy[i];
        }
      },
      "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw InvalidInput("mul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  return make_op<T>(
      a.shape(), std::move(out), {a, b},
      [an, bn](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (pg[0]) {
          for (size_t i = 0; i < gy.size(); ++i) (*pg[0])[i] += gy[i] * bn->value[i];
        }
        if (pg[1]) {
          for (size_t i = 0; i < gy.size(); ++i) (*pg[1])[i] += gy[i] * an->value[i];
        }
      },
      "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
  return make_op<T>(
      a.shape(), std::move(out), {a},
      [c](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (pg[0]) {
          for (size_t i = 0; i < gy.size(); ++i) (*pg[0])[i] += gy[i] * c;
        }
      },
      "scale");
}

namespace detail {
template <typename T>
void softmax_rows(const std::vector<T>& x, std::vector<T>& y, size_t rows, size_t n, bool log_form) {
  for (size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * n;
    T* yr = y.data() + r * n;
    T mx = xr[0];
    for (size_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    T sum = T(0);
    for (size_t j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    if (log_form) {
      const T lse = std::log(sum) + mx;
      for (size_t j = 0; j < n; ++j) yr[j] = xr[j] - lse;
    } else {
      for (size_t j = 0; j < n; ++j) yr[j] /= sum;
    }
  }
}

inline int normalize_axis(int axis, int ndim, const char* op) {
  if (axis < 0) axis += ndim;
  if (axis != ndim - 1) {
    throw InvalidInput(std::string(op) + ": only the last axis is supported (axis=" + std::to_string(axis) +
                       ", ndim=" + std::to_string(ndim) + ")");
  }
  return axis;
}
}  // namespace detail

/// Row softmax over the last axis; rows sum to 1.
template <typename T>
Tensor<T> softmax(const Tensor<T>& a, int axis = -1) {
  detail::normalize_axis(axis, a.ndim(), "softmax");
  const size_t n = static_cast<size_t>(a.dim(a.ndim() - 1));
  const size_t rows = a.size() / n;
  std::vector<T> out(a.size());
  detail::softmax_rows(a.data(), out, rows, n, false);
  std::vector<T> y = out;  // kept for the backward pass
  return make_op<T>(
      a.shape(), std::move(out), {a},
      [rows, n, y = std::move(y)](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (!pg[0]) return;
        for (size_t r = 0; r < rows; ++r) {
          const T* yr = y.data() + r * n;
          const T* gr = gy.data() + r * n;
          T dot = T(0);
          for (size_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
          for (size_t j = 0; j < n; ++j) (*pg[0])[r * n + j] += yr[j] * (gr[j] - dot);
        }
      },
      "softmax");
}

/// Numerically stable log(softmax(x)) over the last axis.
template <typename T>
Tensor<T> log_softmax(const Tensor<T>& a, int axis = -1) {
  detail::normalize_axis(axis, a.ndim(), "log_softmax");
  const size_t n = static_cast<size_t>(a.dim(a.ndim() - 1));
  const size_t rows = a.size() / n;
  std::vector<T> out(a.size());
  detail::softmax_rows(a.data(), out, rows, n, true);
  std::vector<T> ls = out;
  return make_op<T>(
      a.shape(), std::move(out), {a},
      [rows, n, ls = std::move(ls)](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (!pg[0]) return;
        for (size_t r = 0; r < rows; ++r) {
          const T* lr = ls.data() + r * n;
          const T* gr = gy.data() + r * n;
          T gsum = T(0);
          for (size_t j = 0; j < n; ++j) gsum += gr[j];
          for (size_t j = 0; j < n; ++j) (*pg[0])[r * n + j] += gr[j] - std::exp(lr[j]) * gsum;
        }
      },
      "log_softmax");
}

namespace detail {
inline constexpr double kInvSqrt2 = 0.7071067811865475244;
inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace detail

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  using detail::kInvSqrt2;
  using detail::kInvSqrt2Pi;
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double x = static_cast<double>(a.data()[i]);
    out[i] = static_cast<T>(0.5 * x * (1.0 + std::erf(x * kInvSqrt2)));
  }
  auto an = a.node_ptr();
  return make_op<T>(
      a.shape(), std::move(out), {a},
      [an](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (!pg[0]) return;
        for (size_t i = 0; i < gy.size(); ++i) {
          const double x = static_cast<double>(an->value[i]);
          const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
          const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
          (*pg[0])[i] += gy[i] * static_cast<T>(cdf + x * pdf);
        }
      },
      "gelu");
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = T(0);
  for (T v : a.data()) acc += v;
  return make_op<T>(
      {1}, {acc}, {a},
      [n = a.size()](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (!pg[0]) return;
        for (size_t i = 0; i < n; ++i) (*pg[0])[i] += gy[0];
      },
      "sum");
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  T acc = T(0);
  for (T v : a.data()) acc += v;
  const T inv = T(1) / static_cast<T>(a.size());
  return make_op<T>(
      {1}, {acc * inv}, {a},
      [n = a.size(), inv](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (!pg[0]) return;
        for (size_t i = 0; i < n; ++i) (*pg[0])[i] += gy[0] * inv;
      },
      "mean");
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw InvalidInput("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  std::vector<T> out = a.data();
  return make_op<T>(
      std::move(shape), std::move(out), {a},
      [](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (!pg[0]) return;
        for (size_t i = 0; i < gy.size(); ++i) (*pg[0])[i] += gy[i];
      },
      "reshape");
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.ndim() != 2) throw InvalidInput("transpose: expects a 2D tensor, got " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  std::vector<T> out(a.size());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out[static_cast<size_t>(j) * m + i] = a.data()[static_cast<size_t>(i) * n + j];
  }
  return make_op<T>(
      {n, m}, std::move(out), {a},
      [m, n](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (!pg[0]) return;
        for (int j = 0; j < n; ++j) {
          for (int i = 0; i < m; ++i) {
            (*pg[0])[static_cast<size_t>(i) * n + j] += gy[static_cast<size_t>(j) * m + i];
          }
        }
      },
      "transpose");
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, int start, int count) {
  if (a.ndim() != 2) throw InvalidInput("slice_rows: expects a 2D tensor");
  const int m = a.dim(0), n = a.dim(1);
  if (start < 0 || count < 1 || start + count > m) {
    throw InvalidInput("slice_rows: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                       ") out of " + std::to_string(m) + " rows");
  }
  std::vector<T> out(static_cast<size_t>(count) * n);
  std::copy_n(a.data().begin() + static_cast<size_t>(start) * n, out.size(), out.begin());
  return make_op<T>(
      {count, n}, std::move(out), {a},
      [start, n](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (!pg[0]) return;
        for (size_t i = 0; i < gy.size(); ++i) (*pg[0])[static_cast<size_t>(start) * n + i] += gy[i];
      },
      "slice_rows");
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, int start, int count) {
  if (a.ndim() != 2) throw InvalidInput("slice_cols: expects a 2D tensor");
  const int m = a.dim(0), n = a.dim(1);
  if (start < 0 || count < 1 || start + count > n) {
    throw InvalidInput("slice_cols: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                       ") out of " + std::to_string(n) + " cols");
  }
  std::vector<T> out(static_cast<size_t>(m) * count);
  for (int i = 0; i < m; ++i) {
    std::copy_n(a.data().begin() + static_cast<size_t>(i) * n + start, count,
                out.begin() + static_cast<size_t>(i) * count);
  }
  return make_op<T>(
      {m, count}, std::move(out), {a},
      [m, n, start, count](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (!pg[0]) return;
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < count; ++j) {
            (*pg[0])[static_cast<size_t>(i) * n + start + j] += gy[static_cast<size_t>(i) * count + j];
          }
        }
      },
      "slice_cols");
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw InvalidInput("concat_rows: no tensors given");
  const int n = parts[0].dim(parts[0].ndim() - 1);
  int m = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 2 || p.dim(1) != n) {
      throw InvalidInput("concat_rows: all parts must be 2D with matching column count");
    }
    m += p.dim(0);
  }
  std::vector<T> out;
  out.reserve(static_cast<size_t>(m) * n);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<size_t> sizes;
  sizes.reserve(parts.size());
  for (const auto& p : parts) sizes.push_back(p.size());
  return make_op<T>(
      {m, n}, std::move(out), parts,
      [sizes](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        size_t off = 0;
        for (size_t k = 0; k < sizes.size(); ++k) {
          if (pg[k]) {
            for (size_t i = 0; i < sizes[k]; ++i) (*pg[k])[i] += gy[off + i];
          }
          off += sizes[k];
        }
      },
      "concat_rows");
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw InvalidInput("concat_cols: no tensors given");
  const int m = parts[0].dim(0);
  int n = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 2 || p.dim(0) != m) {
      throw InvalidInput("concat_cols: all parts must be 2D with matching row count");
    }
    n += p.dim(1);
  }
  std::vector<T> out(static_cast<size_t>(m) * n);
  int col = 0;
  for (const auto& p : parts) {
    const int pn = p.dim(1);
    for (int i = 0; i < m; ++i) {
      std::copy_n(p.data().begin() + static_cast<size_t>(i) * pn, pn,
                  out.begin() + static_cast<size_t>(i) * n + col);
    }
    col += pn;
  }
  std::vector<int> widths;
  widths.reserve(parts.size());
  for (const auto& p : parts) widths.push_back(p.dim(1));
  return make_op<T>(
      {m, n}, std::move(out), parts,
      [m, n, widths](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        int col = 0;
        for (size_t k = 0; k < widths.size(); ++k) {
          if (pg[k]) {
            for (int i = 0; i < m; ++i) {
              for (int j = 0; j < widths[k]; ++j) {
                (*pg[k])[static_cast<size_t>(i) * widths[k] + j] += gy[static_cast<size_t>(i) * n + col + j];
              }
            }
          }
          col += widths[k];
        }
      },
      "concat_cols");
}

/// Selects rows by index (repeats allowed); gradients scatter-add back.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<int>& idx) {
  if (a.ndim() != 2) throw InvalidInput("gather_rows: expects a 2D tensor");
  const int m = a.dim(0), n = a.dim(1);
  for (int i : idx) {
    if (i < 0 || i >= m) throw InvalidInput("gather_rows: index " + std::to_string(i) + " out of range");
  }
  std::vector<T> out(idx.size() * static_cast<size_t>(n));
  for (size_t r = 0; r < idx.size(); ++r) {
    std::copy_n(a.data().begin() + static_cast<size_t>(idx[r]) * n, n, out.begin() + r * n);
  }
  return make_op<T>(
      {static_cast<int>(idx.size()), n}, std::move(out), {a},
      [idx, n](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        if (!pg[0]) return;
        for (size_t r = 0; r < idx.size(); ++r) {
          for (int j = 0; j < n; ++j) {
            (*pg[0])[static_cast<size_t>(idx[r]) * n + j] += gy[r * static_cast<size_t>(n) + j];
          }
        }
      },
      "gather_rows");
}

/// Layer normalization over the last axis with affine parameters,
/// y = (x - mu)/sqrt(var + eps) * gamma + beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& a, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-6)) {
  const int n = a.dim(a.ndim() - 1);
  if (gamma.size() != static_cast<size_t>(n) || beta.size() != static_cast<size_t>(n)) {
    throw InvalidInput("layer_norm: gamma/beta must have " + std::to_string(n) + " entries");
  }
  const size_t rows = a.size() / static_cast<size_t>(n);
  std::vector<T> out(a.size());
  std::vector<T> xhat(a.size());
  std::vector<T> inv_std(rows);
  for (size_t r = 0; r < rows; ++r) {
    const T* xr = a.data().data() + r * n;
    T mu = T(0);
    for (int j = 0; j < n; ++j) mu += xr[j];
    mu /= static_cast<T>(n);
    T var = T(0);
    for (int j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<T>(n);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (int j = 0; j < n; ++j) {
      const T xh = (xr[j] - mu) * is;
      xhat[r * n + j] = xh;
      out[r * n + j] = xh * gamma.data()[j] + beta.data()[j];
    }
  }
  auto gn = gamma.node_ptr();
  return make_op<T>(
      a.shape(), std::move(out), {a, gamma, beta},
      [rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std),
       gn](const std::vector<T>& gy, const std::vector<std::vector<T>*>& pg) {
        for (size_t r = 0; r < rows; ++r) {
          const T* gyr = gy.data() + r * n;
          const T* xh = xhat.data() + r * n;
          if (pg[1]) {
            for (int j = 0; j < n; ++j) (*pg[1])[j] += gyr[j] * xh[j];
          }
          if (pg[2]) {
            for (int j = 0; j < n; ++j) (*pg[2])[j] += gyr[j];
          }
          if (pg[0]) {
            T m1 = T(0), m2 = T(0);
            for (int j = 0; j < n; ++j) {
              const T g = gyr[j] * gn->value[j];
              m1 += g;
              m2 += g * xh[j];
            }
            m1 /= static_cast<T>(n);
            m2 /= static_cast<T>(n);
            for (int j = 0; j < n; ++j) {
              const T g = gyr[j] * gn->value[j];
              (*pg[0])[r * n + j] += (g - m1 - xh[j] * m2) * inv_std[r];
            }
          }
        }
      },
      "layer_norm");
}

// ---------------------------------------------------------------------------
// backward

template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.size() != 1) {
    throw InvalidInput("backward: loss must be scalar, got " + shape_str(loss.shape()));
  }
  Node<T>* root = loss.node();
  if (!root->needs_grad) return;  // nothing requires a gradient

  // reverse topological order over nodes that need gradients
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->needs_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<Node<T>*, std::vector<T>> scratch;
  scratch.reserve(order.size());
  for (Node<T>* n : order) scratch.emplace(n, std::vector<T>(n->value.size(), T(0)));
  scratch[root][0] = T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (!n->backward) continue;
    std::vector<std::vector<T>*> pgrads(n->parents.size(), nullptr);
    for (size_t i = 0; i < n->parents.size(); ++i) {
      auto f = scratch.find(n->parents[i].get());
      if (f != scratch.end()) pgrads[i] = &f->second;
    }
    n->backward(scratch[n], pgrads);
  }

  for (Node<T>* n : order) {
    if (!n->requires_grad) continue;
    if (n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), T(0));
    const auto& g = scratch[n];
    for (size_t i = 0; i < g.size(); ++i) n->grad[i] += g[i];
  }
}

// ---------------------------------------------------------------------------
// finite differences (independent oracle)

/// Central difference gradient of a scalar function of a flat parameter
/// vector: (f(x + h e_i) - f(x - h e_i)) / 2h.
template <typename T>
std::vector<T> finite_diff_grad(const std::function<T(const std::vector<T>&)>& f, std::vector<T> theta, T h) {
  std::vector<T> g(theta.size());
  for (size_t i = 0; i < theta.size(); ++i) {
    const T orig = theta[i];
    theta[i] = orig + h;
    const T fp = f(theta);
    theta[i] = orig - h;
    const T fm = f(theta);
    theta[i] = orig;
    g[i] = (fp - fm) / (T(2) * h);
  }
  return g;
}

}  // namespace coughkit::ad
