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

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coughkit/autodiff.hpp"
#include "coughkit/dsp.hpp"
#include "coughkit/rng.hpp"

namespace coughkit::model {

/// Vision transformer shape. Pre-norm blocks, learned positional
/// embeddings, class token, MLP hidden size = mlp_ratio * embed_dim.
struct VitConfig {
  int patch_size = 16;
  int embed_dim = 192;
  int depth = 4;
  int n_heads = 3;
  int mlp_ratio = 4;
  int in_channels = 1;
  int in_height = 128;
  int in_width = 64;
  int n_classes = 2;

  void validate() const {
    if (patch_size < 1 || embed_dim < 1 || depth < 1 || n_heads < 1 || mlp_ratio < 1 || n_classes < 1) {
      throw InvalidInput("VitConfig: all shape fields must be positive");
    }
    if (embed_dim % n_heads != 0) throw InvalidInput("VitConfig: embed_dim must be divisible by n_heads");
    if (in_channels != 1 && in_channels != 3) throw InvalidInput("VitConfig: in_channels must be 1 or 3");
    if (in_height % patch_size != 0 || in_width % patch_size != 0) {
      throw InvalidInput("VitConfig: input " + std::to_string(in_height) + "x" + std::to_string(in_width) +
                         " not divisible by patch size " + std::to_string(patch_size));
    }
  }

  int n_patches() const { return (in_height / patch_size) * (in_width / patch_size); }
  int patch_dim() const { return in_channels * patch_size * patch_size; }
};

/// Exact count of trainable scalars (patch projection, class token,
/// positional embeddings, blocks, final norm, head).
inline long long param_count(const VitConfig& cfg) {
  cfg.validate();
  const long long e = cfg.embed_dim;
  const long long hidden = e * cfg.mlp_ratio;
  const long long patch = static_cast<long long>(cfg.patch_dim()) * e + e;
  const long long cls = e;
  const long long pos = static_cast<long long>(cfg.n_patches() + 1) * e;
  const long long block = (2 * e) +                  // ln1
                          (e * 3 * e + 3 * e) +      // qkv
                          (e * e + e) +              // attention projection
                          (2 * e) +                  // ln2
                          (e * hidden + hidden) +    // mlp fc1
                          (hidden * e + e);          // mlp fc2
  const long long norm = 2 * e;
  const long long head = e * cfg.n_classes + cfg.n_classes;
  return patch + cls + pos + cfg.depth * block + norm + head;
}

template <typename T>
struct VitBlockT {
  ad::Tensor<T> ln1_g, ln1_b;
  ad::Tensor<T> qkv_w, qkv_b;    // [E x 3E], [3E]
  ad::Tensor<T> proj_w, proj_b;  // [E x E], [E]
  ad::Tensor<T> ln2_g, ln2_b;
  ad::Tensor<T> fc1_w, fc1_b;  // [E x H], [H]
  ad::Tensor<T> fc2_w, fc2_b;  // [H x E], [E]
};

template <typename T>
struct VitModelT {
  VitConfig cfg;
  ad::Tensor<T> patch_w, patch_b;  // [patch_dim x E], [E]
  ad::Tensor<T> cls_token;         // [1 x E]
  ad::Tensor<T> pos_embed;         // [(P+1) x E]
  std::vector<VitBlockT<T>> blocks;
  ad::Tensor<T> norm_g, norm_b;
  ad::Tensor<T> head_w, head_b;  // [E x n_classes], [n_classes]

  std::vector<std::pair<std::string, ad::Tensor<T>>> named_parameters() const {
    std::vector<std::pair<std::string, ad::Tensor<T>>> out;
    out.emplace_back("patch_w", patch_w);
    out.emplace_back("patch_b", patch_b);
    out.emplace_back("cls_token", cls_token);
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
    out.emplace_back("norm_g", norm_g);
    out.emplace_back("norm_b", norm_b);
    out.emplace_back("head_w", head_w);
    out.emplace_back("head_b", head_b);
    return out;
  }

  void set_requires_grad(bool on) {
    for (auto& [name, t] : named_parameters()) {
      ad::Tensor<T> h = t;
      h.set_requires_grad(on);
    }
  }
};

using VitModel = VitModelT<float>;

namespace detail {

template <typename T>
T trunc_normal(Rng& rng, double sigma) {
  double z;
  do {
    z = rng.normal();
  } while (std::abs(z) > 2.0);
  return static_cast<T>(z * sigma);
}

template <typename T>
ad::Tensor<T> init_weight(ad::Shape shape, Rng& rng, double sigma = 0.02) {
  std::vector<T> v(ad::numel(shape));
  for (auto& x : v) x = trunc_normal<T>(rng, sigma);
  return ad::Tensor<T>::from_vector(std::move(shape), std::move(v));
}

}  // namespace detail

template <typename T>
VitBlockT<T> init_block(int embed_dim, int mlp_ratio, Rng& rng) {
  const int e = embed_dim, h = embed_dim * mlp_ratio;
  VitBlockT<T> b;
  b.ln1_g = ad::Tensor<T>::full({e}, T(1));
  b.ln1_b = ad::Tensor<T>::zeros({e});
  b.qkv_w = detail::init_weight<T>({e, 3 * e}, rng);
  b.qkv_b = ad::Tensor<T>::zeros({3 * e});
  b.proj_w = detail::init_weight<T>({e, e}, rng);
  b.proj_b = ad::Tensor<T>::zeros({e});
  b.ln2_g = ad::Tensor<T>::full({e}, T(1));
  b.ln2_b = ad::Tensor<T>::zeros({e});
  b.fc1_w = detail::init_weight<T>({e, h}, rng);
  b.fc1_b = ad::Tensor<T>::zeros({h});
  b.fc2_w = detail::init_weight<T>({h, e}, rng);
  b.fc2_b = ad::Tensor<T>::zeros({e});
  return b;
}

template <typename T>
VitModelT<T> init_vit(const VitConfig& cfg, Rng& rng) {
  cfg.validate();
  VitModelT<T> m;
  m.cfg = cfg;
  const int e = cfg.embed_dim;
  m.patch_w = detail::init_weight<T>({cfg.patch_dim(), e}, rng);
  m.patch_b = ad::Tensor<T>::zeros({e});
  m.cls_token = detail::init_weight<T>({1, e}, rng);
  m.pos_embed = detail::init_weight<T>({cfg.n_patches() + 1, e}, rng);
  for (int i = 0; i < cfg.depth; ++i) m.blocks.push_back(init_block<T>(e, cfg.mlp_ratio, rng));
  m.norm_g = ad::Tensor<T>::full({e}, T(1));
  m.norm_b = ad::Tensor<T>::zeros({e});
  m.head_w = detail::init_weight<T>({e, cfg.n_classes}, rng);
  m.head_b = ad::Tensor<T>::zeros({cfg.n_classes});
  return m;
}

template <typename T>
ad::Tensor<T> clone_tensor(const ad::Tensor<T>& t) {
  return ad::Tensor<T>::from_vector(t.shape(), t.data());
}

template <typename T>
VitModelT<T> clone_model(const VitModelT<T>& m) {
  VitModelT<T> c;
  c.cfg = m.cfg;
  c.patch_w = clone_tensor(m.patch_w);
  c.patch_b = clone_tensor(m.patch_b);
  c.cls_token = clone_tensor(m.cls_token);
  c.pos_embed = clone_tensor(m.pos_embed);
  for (const auto& b : m.blocks) {
    VitBlockT<T> nb;
    nb.ln1_g = clone_tensor(b.ln1_g);
    nb.ln1_b = clone_tensor(b.ln1_b);
    nb.qkv_w = clone_tensor(b.qkv_w);
    nb.qkv_b = clone_tensor(b.qkv_b);
    nb.proj_w = clone_tensor(b.proj_w);
    nb.proj_b = clone_tensor(b.proj_b);
    nb.ln2_g = clone_tensor(b.ln2_g);
    nb.ln2_b = clone_tensor(b.ln2_b);
    nb.fc1_w = clone_tensor(b.fc1_w);
    nb.fc1_b = clone_tensor(b.fc1_b);
    nb.fc2_w = clone_tensor(b.fc2_w);
    nb.fc2_b = clone_tensor(b.fc2_b);
    c.blocks.push_back(std::move(nb));
  }
  c.norm_g = clone_tensor(m.norm_g);
  c.norm_b = clone_tensor(m.norm_b);
  c.head_w = clone_tensor(m.head_w);
  c.head_b = clone_tensor(m.head_b);
  return c;
}

/// Swaps in a freshly initialized linear head for n_classes outputs; the
/// backbone tensors are copied bitwise.
template <typename T>
VitModelT<T> replace_head(const VitModelT<T>& m, int n_classes, Rng& rng) {
  if (n_classes < 2) throw InvalidInput("replace_head: need at least two classes");
  VitModelT<T> out = clone_model(m);
  out.cfg.n_classes = n_classes;
  out.head_w = detail::init_weight<T>({m.cfg.embed_dim, n_classes}, rng);
  out.head_b = ad::Tensor<T>::zeros({n_classes});
  return out;
}

/// Non-overlapping patches in row-major order: P = (H/p)*(W/p) rows of
/// length c*p*p (channel-major within a patch).
template <typename T>
ad::Tensor<T> patchify(const dsp::ModelInput& input, int patch_size) {
  if (patch_size < 1) throw InvalidInput("patchify: patch size must be positive");
  if (input.height % patch_size != 0 || input.width % patch_size != 0) {
    throw InvalidInput("patchify: input " + std::to_string(input.height) + "x" + std::to_string(input.width) +
                       " not divisible by patch size " + std::to_string(patch_size));
  }
  const int gh = input.height / patch_size, gw = input.width / patch_size;
  const int pd = input.channels * patch_size * patch_size;
  std::vector<T> out(static_cast<size_t>(gh) * gw * pd);
  size_t o = 0;
  for (int py = 0; py < gh; ++py) {
    for (int px = 0; px < gw; ++px) {
      for (int c = 0; c < input.channels; ++c) {
        for (int dy = 0; dy < patch_size; ++dy) {
          const size_t row =
              (static_cast<size_t>(c) * input.height + py * patch_size + dy) * input.width + px * patch_size;
          for (int dx = 0; dx < patch_size; ++dx) out[o++] = static_cast<T>(input.values[row + dx]);
        }
      }
    }
  }
  return ad::Tensor<T>::from_vector({gh * gw, pd}, std::move(out));
}

/// Inverse of patchify (for round-trip checks).
template <typename T>
dsp::ModelInput unpatchify(const ad::Tensor<T>& patches, int channels, int height, int width, int patch_size) {
  const int gh = height / patch_size, gw = width / patch_size;
  const int pd = channels * patch_size * patch_size;
  if (patches.ndim() != 2 || patches.dim(0) != gh * gw || patches.dim(1) != pd) {
    throw InvalidInput("unpatchify: patch tensor shape does not match the target image");
  }
  dsp::ModelInput out;
  out.channels = channels;
  out.height = height;
  out.width = width;
  out.values.resize(static_cast<size_t>(channels) * height * width);
  size_t o = 0;
  for (int py = 0; py < gh; ++py) {
    for (int px = 0; px < gw; ++px) {
      for (int c = 0; c < channels; ++c) {
        for (int dy = 0; dy < patch_size; ++dy) {
          const size_t row = (static_cast<size_t>(c) * height + py * patch_size + dy) * width + px * patch_size;
          for (int dx = 0; dx < patch_size; ++dx) out.values[row + dx] = static_cast<float>(patches.data()[o++]);
        }
      }
    }
  }
  return out;
}

template <typename T>
struct ForwardTraceT {
  ad::Tensor<T> cls_out;  // [1 x E], after the final norm
  ad::Tensor<T> logits;   // [1 x n_classes]
  std::vector<ad::Tensor<T>> block_patch_reps;  // per block, [n_visible x E], class row excluded
  std::vector<std::vector<T>> attention;        // per block, [heads x N x N] row-major, when captured
};

struct ForwardOptions {
  const std::vector<bool>* visible_mask = nullptr;  // length P; nullptr = all visible
  bool capture_attention = false;
};

/// One pre-norm transformer block: x += MSA(LN(x)); x += MLP(LN(x)).
template <typename T>
ad::Tensor<T> block_forward(const VitBlockT<T>& blk, const ad::Tensor<T>& x, int n_heads,
                            std::vector<T>* attn_capture = nullptr) {
  const int n_tokens = x.dim(0);
  const int e = x.dim(1);
  const int d = e / n_heads;

  auto h = ad::layer_norm(x, blk.ln1_g, blk.ln1_b);
  auto qkv = ad::add(ad::matmul(h, blk.qkv_w), blk.qkv_b);  // [N x 3E]

  std::vector<ad::Tensor<T>> head_outs;
  head_outs.reserve(n_heads);
  if (attn_capture) attn_capture->clear();
  for (int i = 0; i < n_heads; ++i) {
    auto q = ad::slice_cols(qkv, i * d, d);
    auto k = ad::slice_cols(qkv, e + i * d, d);
    auto v = ad::slice_cols(qkv, 2 * e + i * d, d);
    auto scores = ad::scale(ad::matmul(q, ad::transpose(k)), static_cast<T>(1.0 / std::sqrt(static_cast<double>(d))));
    auto probs = ad::softmax(scores);
    if (attn_capture) {
      attn_capture->insert(attn_capture->end(), probs.data().begin(), probs.data().end());
    }
    head_outs.push_back(ad::matmul(probs, v));
  }
  auto att = n_heads == 1 ? head_outs[0] : ad::concat_cols(head_outs);
  auto x1 = ad::add(x, ad::add(ad::matmul(att, blk.proj_w), blk.proj_b));

  auto h2 = ad::layer_norm(x1, blk.ln2_g, blk.ln2_b);
  auto mlp = ad::add(ad::matmul(ad::gelu(ad::add(ad::matmul(h2, blk.fc1_w), blk.fc1_b)), blk.fc2_w), blk.fc2_b);
  (void)n_tokens;
  return ad::add(x1, mlp);
}

/// Forward pass over a patch sequence. With a visibility mask only visible
/// patches (plus the class token) enter the blocks; the trace records every
/// block's patch representations at the visible positions.
template <typename T>
ForwardTraceT<T> vit_forward(const VitModelT<T>& m, const ad::Tensor<T>& patches,
                             const ForwardOptions& opt = {}) {
  m.cfg.validate();
  const int p_total = m.cfg.n_patches();
  if (patches.ndim() != 2 || patches.dim(0) != p_total || patches.dim(1) != m.cfg.patch_dim()) {
    throw InvalidInput("vit_forward: patches " + ad::shape_str(patches.shape()) + " do not match config (" +
                       std::to_string(p_total) + "x" + std::to_string(m.cfg.patch_dim()) + ")");
  }

  std::vector<int> vis;
  if (opt.visible_mask != nullptr) {
    if (static_cast<int>(opt.visible_mask->size()) != p_total) {
      throw InvalidInput("vit_forward: visibility mask length " + std::to_string(opt.visible_mask->size()) +
                         " != patch count " + std::to_string(p_total));
    }
    for (int i = 0; i < p_total; ++i) {
      if ((*opt.visible_mask)[i]) vis.push_back(i);
    }
    if (vis.empty()) throw InvalidInput("vit_forward: all patches masked, nothing to encode");
  } else {
    vis.resize(p_total);
    for (int i = 0; i < p_total; ++i) vis[i] = i;
  }

  auto pat = static_cast<int>(vis.size()) == p_total ? patches : ad::gather_rows(patches, vis);
  auto embedded = ad::add(ad::matmul(pat, m.patch_w), m.patch_b);
  auto tokens = ad::concat_rows<T>({m.cls_token, embedded});

  std::vector<int> pos_idx(vis.size() + 1);
  pos_idx[0] = 0;
  for (size_t i = 0; i < vis.size(); ++i) pos_idx[i + 1] = vis[i] + 1;
  auto x = ad::add(tokens, ad::gather_rows(m.pos_embed, pos_idx));

  ForwardTraceT<T> trace;
  const int n_vis = static_cast<int>(vis.size());
  for (const auto& blk : m.blocks) {
    std::vector<T> attn;
    x = block_forward(blk, x, m.cfg.n_heads, opt.capture_attention ? &attn : nullptr);
    if (opt.capture_attention) trace.attention.push_back(std::move(attn));
    trace.block_patch_reps.push_back(ad::slice_rows(x, 1, n_vis));
  }

  auto xn = ad::layer_norm(x, m.norm_g, m.norm_b);
  trace.cls_out = ad::slice_rows(xn, 0, 1);
  trace.logits = ad::add(ad::matmul(trace.cls_out, m.head_w), m.head_b);
  return trace;
}

}  // namespace coughkit::model
