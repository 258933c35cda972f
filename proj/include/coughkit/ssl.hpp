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

#include <vector>

#include "coughkit/train.hpp"
#include "coughkit/vit.hpp"

namespace coughkit::ssl {

struct SslConfig {
  double mask_ratio = 0.75;
  double ema_tau = 0.999;
  double w_global = 1.0;
  double w_local = 1.0;
  int decoder_depth = 1;
  int steps = 1000;
  int batch_size = 8;
  double learning_rate = 1e-4;

  void validate() const {
    if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw InvalidInput("SslConfig: mask_ratio must lie in (0, 1)");
    if (!(ema_tau > 0.0 && ema_tau <= 1.0)) throw InvalidInput("SslConfig: ema_tau must lie in (0, 1]");
    if (decoder_depth < 1) throw InvalidInput("SslConfig: decoder_depth must be >= 1");
    if (steps < 1 || batch_size < 1) throw InvalidInput("SslConfig: steps and batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw InvalidInput("SslConfig: learning_rate must be >= 0");
  }
};

/// Exactly round(mask_ratio * P) positions set true, uniform without
/// replacement. Degenerate masks (none or all) are an error.
std::vector<bool> sample_mask(int p_total, double mask_ratio, Rng& rng);

/// teacher <- tau * teacher + (1 - tau) * student, elementwise, aligned by
/// parameter name and shape.
template <typename T>
void ema_update(train::NamedParams<T>& teacher, const train::NamedParams<T>& student, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidInput("ema_update: tau must lie in [0, 1]");
  if (teacher.size() != student.size()) throw InvalidInput("ema_update: parameter lists differ in length");
  const T t = static_cast<T>(tau);
  const T s = static_cast<T>(1.0 - tau);
  for (size_t i = 0; i < teacher.size(); ++i) {
    auto& [tn, tt] = teacher[i];
    const auto& [sn, st] = student[i];
    if (tn != sn) throw InvalidInput("ema_update: parameter name mismatch at '" + tn + "' vs '" + sn + "'");
    if (tt.shape() != st.shape()) throw InvalidInput("ema_update: shape mismatch at '" + tn + "'");
    auto& tv = tt.data();
    const auto& sv = st.data();
    for (size_t k = 0; k < tv.size(); ++k) tv[k] = t * tv[k] + s * sv[k];
  }
}

/// Flattened per-sample outputs entering the combined objective.
struct SslBatchOutputs {
  int p_masked = 0, m_blocks = 0, e_dim = 0;
  std::vector<double> decoder_out;     // X_s, [P' x M x E] row-major
  std::vector<double> teacher_local;   // F_t, [P' x M x E]
  std::vector<double> student_global;  // c_s, [E]
  std::vector<double> teacher_global;  // f_t, [E]
};

struct SslLosses {
  double global_loss = 0.0;
  double local_loss = 0.0;
  double total = 0.0;
};

/// L_local = MSE(X_s, F_t) over all P'*M*E entries; L_global = MSE(c_s, f_t)
/// over E entries; total = w_global * L_global + w_local * L_local.
SslLosses ssl_losses(const SslBatchOutputs& out, double w_global, double w_local);

/// Single-block decoder over the full token grid: mask tokens plus learned
/// positions at masked slots, then a linear map to M*E per patch.
template <typename T>
struct SslDecoderT {
  int embed_dim = 0;
  int n_heads = 0;
  int out_dim = 0;  // depth * embed_dim
  ad::Tensor<T> mask_token;  // [1 x E]
  ad::Tensor<T> pos_embed;   // [P x E]
  std::vector<model::VitBlockT<T>> blocks;
  ad::Tensor<T> out_w, out_b;  // [E x M*E], [M*E]

  train::NamedParams<T> named_parameters() const {
    train::NamedParams<T> out;
    out.emplace_back("mask_token", mask_token);
    out.emplace_back("pos_embed", pos_embed);
    for (size_t i = 0; i < blocks.size(); ++i) {
      const auto& b = blocks[i];
      const std::string p = "block" + std::to_string(i) + ".";
      out.emplace_back(p + "ln1_g", b.ln1_g);
      out.emplace_back(p + "ln1_b", b.ln1_b);
      out.emplace_back(p + "qkv_w", b.qkv_w);
      out.emplace_back(p + "qkv_b", b.qkv_b);
      out.emplace_back(p + "proj_w", b.proj_w);
      out.emplace_back(p + "proj_b", b.proj_b);
      out.emplace_back(p + "ln2_g", b.ln2_g);
      out.emplace_back(p + "ln2_b", b.ln2_b);
      out.emplace_back(p + "fc1_w", b.fc1_w);
      out.emplace_back(p + "fc1_b", b.fc1_b);
      out.emplace_back(p + "fc2_w", b.fc2_w);
      out.emplace_back(p + "fc2_b", b.fc2_b);
    }
    out.emplace_back("out_w", out_w);
    out.emplace_back("out_b", out_b);
    return out;
  }

  void set_requires_grad(bool on) {
    for (auto& [name, t] : named_parameters()) {
      ad::Tensor<T> h = t;
      h.set_requires_grad(on);
    }
  }
};

using SslDecoder = SslDecoderT<float>;

SslDecoder init_decoder(const model::VitConfig& cfg, int decoder_depth, Rng& rng);

struct PretrainState {
  model::VitModel student;
  model::VitModel teacher;
  SslDecoder decoder;
  train::AdamState opt;
  long long step = 0;
};

/// Fresh student, teacher initialized as a copy of the student, decoder,
/// empty optimizer state.
PretrainState init_pretrain(const model::VitConfig& cfg, const SslConfig& ssl_cfg, Rng& rng);

struct StepLosses {
  double total = 0.0;
  double global_loss = 0.0;
  double local_loss = 0.0;
};

/// One pretraining transaction: teacher forward on the full view (no
/// gradients), student forward on visible patches, decoder prediction of
/// the masked per-block teacher representations, gradient step on student
/// and decoder, then the EMA teacher update.
StepLosses pretrain_step(PretrainState& state, const std::vector<ad::Tensor<float>>& batch_patches,
                         const SslConfig& cfg, Rng& rng);

}  // namespace coughkit::ssl
