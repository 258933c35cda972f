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

#include "coughkit/ssl.hpp"

#include <cmath>

namespace coughkit::ssl {

namespace {

bool same_config(const model::VitConfig& a, const model::VitConfig& b) {
  return a.patch_size == b.patch_size && a.embed_dim == b.embed_dim && a.depth == b.depth &&
         a.n_heads == b.n_heads && a.mlp_ratio == b.mlp_ratio && a.in_channels == b.in_channels &&
         a.in_height == b.in_height && a.in_width == b.in_width && a.n_classes == b.n_classes;
}

// (x - mean) / sqrt(var + eps) over one row of length n, in place.
void normalize_row(float* x, int n) {
  double mu = 0.0;
  for (int i = 0; i < n; ++i) mu += x[i];
  mu /= n;
  double var = 0.0;
  for (int i = 0; i < n; ++i) var += (x[i] - mu) * (x[i] - mu);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + 1e-6);
  for (int i = 0; i < n; ++i) x[i] = static_cast<float>((x[i] - mu) * inv);
}

}  // namespace

std::vector<bool> sample_mask(int p_total, double mask_ratio, Rng& rng) {
  if (p_total < 2) throw InvalidInput("sample_mask: need at least two patches");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw InvalidInput("sample_mask: mask_ratio must lie in (0, 1)");
  const int p_masked = static_cast<int>(std::lround(mask_ratio * p_total));
  if (p_masked == 0 || p_masked == p_total) {
    throw InvalidInput("sample_mask: ratio " + std::to_string(mask_ratio) + " over " + std::to_string(p_total) +
                       " patches masks " + std::to_string(p_masked) + " patches");
  }
  std::vector<bool> mask(p_total, false);
  for (int i : rng.sample_without_replacement(p_total, p_masked)) mask[i] = true;
  return mask;
}

SslLosses ssl_losses(const SslBatchOutputs& out, double w_global, double w_local) {
  const size_t local_n = static_cast<size_t>(out.p_masked) * out.m_blocks * out.e_dim;
  if (out.decoder_out.size() != local_n || out.teacher_local.size() != local_n) {
    throw InvalidInput("ssl_losses: local tensors do not match P' x M x E");
  }
  if (out.student_global.size() != static_cast<size_t>(out.e_dim) ||
      out.teacher_global.size() != static_cast<size_t>(out.e_dim)) {
    throw InvalidInput("ssl_losses: global vectors must have E entries");
  }
  if (ad::checked_mode()) {
    for (const auto* v : {&out.decoder_out, &out.teacher_local, &out.student_global, &out.teacher_global}) {
      for (double x : *v) {
        if (!std::isfinite(x)) throw NumericError("ssl_losses: non-finite input");
      }
    }
  }

  SslLosses losses;
  double acc = 0.0;
  for (size_t i = 0; i < local_n; ++i) {
    const double d = out.decoder_out[i] - out.teacher_local[i];
    acc += d * d;
  }
  losses.local_loss = local_n > 0 ? acc / static_cast<double>(local_n) : 0.0;

  acc = 0.0;
  for (int i = 0; i < out.e_dim; ++i) {
    const double d = out.student_global[i] - out.teacher_global[i];
    acc += d * d;
  }
  losses.global_loss = out.e_dim > 0 ? acc / out.e_dim : 0.0;

  losses.total = w_global * losses.global_loss + w_local * losses.local_loss;
  return losses;
}

SslDecoder init_decoder(const model::VitConfig& cfg, int decoder_depth, Rng& rng) {
  if (decoder_depth < 1) throw InvalidInput("init_decoder: decoder_depth must be >= 1");
  SslDecoder dec;
  dec.embed_dim = cfg.embed_dim;
  dec.n_heads = cfg.n_heads;
  dec.out_dim = cfg.depth * cfg.embed_dim;
  dec.mask_token = model::detail::init_weight<float>({1, cfg.embed_dim}, rng);
  dec.pos_embed = model::detail::init_weight<float>({cfg.n_patches(), cfg.embed_dim}, rng);
  for (int i = 0; i < decoder_depth; ++i) {
    dec.blocks.push_back(model::init_block<float>(cfg.embed_dim, cfg.mlp_ratio, rng));
  }
  dec.out_w = model::detail::init_weight<float>({cfg.embed_dim, dec.out_dim}, rng);
  dec.out_b = ad::Tensor<float>::zeros({dec.out_dim});
  return dec;
}

PretrainState init_pretrain(const model::VitConfig& cfg, const SslConfig& ssl_cfg, Rng& rng) {
  ssl_cfg.validate();
  PretrainState state;
  state.student = model::init_vit<float>(cfg, rng);
  state.teacher = model::clone_model(state.student);
  state.decoder = init_decoder(cfg, ssl_cfg.decoder_depth, rng);
  state.student.set_requires_grad(true);
  state.decoder.set_requires_grad(true);
  state.teacher.set_requires_grad(false);
  return state;
}

StepLosses pretrain_step(PretrainState& state, const std::vector<ad::Tensor<float>>& batch_patches,
                         const SslConfig& cfg, Rng& rng) {
  cfg.validate();
  if (batch_patches.empty()) throw InvalidInput("pretrain_step: empty batch");
  if (!same_config(state.student.cfg, state.teacher.cfg)) {
    throw InvalidInput("pretrain_step: student and teacher configs differ");
  }

  const model::VitConfig& mcfg = state.student.cfg;
  const int p_total = mcfg.n_patches();
  const int m_blocks = mcfg.depth;
  const int e = mcfg.embed_dim;

  auto params = state.student.named_parameters();
  for (auto& [name, t] : state.decoder.named_parameters()) params.emplace_back("decoder." + name, t);
  train::zero_grads(params);

  ad::Tensor<float> batch_total;
  StepLosses reported;

  for (const auto& patches : batch_patches) {
    std::vector<bool> mask = sample_mask(p_total, cfg.mask_ratio, rng);
    std::vector<int> masked_idx, visible_idx;
    for (int p = 0; p < p_total; ++p) (mask[p] ? masked_idx : visible_idx).push_back(p);
    const int p_masked = static_cast<int>(masked_idx.size());

    // teacher on the full view; outputs become constants so no gradient can
    // reach the teacher
    auto t_trace = model::vit_forward(state.teacher, patches);
    std::vector<float> f_t(static_cast<size_t>(p_masked) * m_blocks * e);
    for (int m = 0; m < m_blocks; ++m) {
      const auto& reps = t_trace.block_patch_reps[m].data();  // [P x E]
      for (int r = 0; r < p_masked; ++r) {
        float* dst = f_t.data() + (static_cast<size_t>(r) * m_blocks + m) * e;
        const float* src = reps.data() + static_cast<size_t>(masked_idx[r]) * e;
        std::copy_n(src, e, dst);
        normalize_row(dst, e);
      }
    }
    std::vector<float> f_t_global(e, 0.0f);
    {
      const auto& final_reps = t_trace.block_patch_reps.back().data();
      for (int p = 0; p < p_total; ++p) {
        for (int i = 0; i < e; ++i) f_t_global[i] += final_reps[static_cast<size_t>(p) * e + i];
      }
      for (int i = 0; i < e; ++i) f_t_global[i] /= static_cast<float>(p_total);
      normalize_row(f_t_global.data(), e);
    }

    // student sees only the visible patches
    std::vector<bool> visible(p_total);
    for (int p = 0; p < p_total; ++p) visible[p] = !mask[p];
    model::ForwardOptions opt;
    opt.visible_mask = &visible;
    auto s_trace = model::vit_forward(state.student, patches, opt);

    // decoder grid: student outputs at visible slots, mask tokens elsewhere
    const auto& student_final = s_trace.block_patch_reps.back();  // [n_vis x E]
    std::vector<int> vis_rank(p_total, -1);
    for (size_t r = 0; r < visible_idx.size(); ++r) vis_rank[visible_idx[r]] = static_cast<int>(r);
    std::vector<ad::Tensor<float>> grid_rows;
    grid_rows.reserve(p_total);
    for (int p = 0; p < p_total; ++p) {
      if (mask[p]) {
        grid_rows.push_back(state.decoder.mask_token);
      } else {
        grid_rows.push_back(ad::slice_rows(student_final, vis_rank[p], 1));
      }
    }
    auto grid = ad::add(ad::concat_rows(grid_rows), state.decoder.pos_embed);
    for (const auto& blk : state.decoder.blocks) {
      grid = model::block_forward(blk, grid, state.decoder.n_heads);
    }
    auto decoded = ad::add(ad::matmul(grid, state.decoder.out_w), state.decoder.out_b);  // [P x M*E]
    auto x_s = ad::gather_rows(decoded, masked_idx);                                     // [P' x M*E]

    auto f_t_tensor = ad::Tensor<float>::from_vector({p_masked, m_blocks * e}, f_t);
    auto local_diff = ad::sub(x_s, f_t_tensor);
    auto l_local = ad::mean(ad::mul(local_diff, local_diff));

    auto f_t_global_tensor = ad::Tensor<float>::from_vector({1, e}, f_t_global);
    auto global_diff = ad::sub(s_trace.cls_out, f_t_global_tensor);
    auto l_global = ad::mean(ad::mul(global_diff, global_diff));

    auto sample_total = ad::add(ad::scale(l_global, static_cast<float>(cfg.w_global)),
                                ad::scale(l_local, static_cast<float>(cfg.w_local)));

    reported.global_loss += static_cast<double>(l_global.item());
    reported.local_loss += static_cast<double>(l_local.item());
    batch_total = batch_total.defined() ? ad::add(batch_total, sample_total) : sample_total;
  }

  const double inv_b = 1.0 / static_cast<double>(batch_patches.size());
  auto loss = ad::scale(batch_total, static_cast<float>(inv_b));
  reported.global_loss *= inv_b;
  reported.local_loss *= inv_b;
  reported.total = static_cast<double>(loss.item());

  ad::backward(loss);
  train::adam_step(params, state.opt, cfg.learning_rate);

  auto teacher_params = state.teacher.named_parameters();
  auto student_params = state.student.named_parameters();
  ema_update(teacher_params, student_params, cfg.ema_tau);

  state.step += 1;
  return reported;
}

}  // namespace coughkit::ssl
