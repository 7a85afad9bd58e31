#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "duet/attention.hpp"
#include "duet/params.hpp"
#include "duet/tensor.hpp"

namespace duet {

struct EncoderConfig {
  int64_t hidden = 64;
  int64_t heads = 4;
  int64_t layers = 2;
  double ffn_mult = 4.0;
  int64_t patch_size = 8;      // vision only
  int64_t max_positions = 64;  // text only

  int64_t ffn_inner() const { return static_cast<int64_t>(ffn_mult * static_cast<double>(hidden)); }
  void validate(const char* who) const;
};

// embedding output plus every layer's output: exactly layers+1 states,
// each [B, S, hidden]
struct LayerOutputs {
  std::vector<Tensor> states;
  const Tensor& top() const { return states.back(); }
};

struct EncoderLayerWeights {
  AttentionWeights attn;
  FfnWeights ffn;
};

class TextEncoder {
 public:
  TextEncoder(const EncoderConfig& cfg, int64_t vocab_size, ParamStore& ps,
              const std::string& prefix = "text_enc");

  // ids [B*T] row-major with batch dims (B, T); mask [B, T]
  LayerOutputs forward(const std::vector<int64_t>& ids, int64_t batch, int64_t seq_len,
                       const Tensor& mask, Trace* trace = nullptr) const;

  const EncoderConfig& config() const { return cfg_; }
  int64_t vocab_size() const { return vocab_size_; }

 private:
  EncoderConfig cfg_;
  int64_t vocab_size_;
  Tensor token_emb_;  // [V, d]
  Tensor pos_emb_;    // [max_positions, d]
  std::vector<EncoderLayerWeights> layers_;
  std::string prefix_;
};

class VisionEncoder {
 public:
  // grid: patches per image side (image res / patch size)
  VisionEncoder(const EncoderConfig& cfg, int64_t grid, ParamStore& ps, bool with_mask_embedding,
                const std::string& prefix = "vision_enc");

  // raw patch projection c(.) of Eq-style losses: [B, P, d], no position, no CLS
  Tensor project_patches(const Tensor& patch_grids) const;

  // patch_grids [B, P, patch_dim]; patch_keep_mask: optional [B, P] with 0 =
  // replace that patch embedding by the learned mask embedding
  LayerOutputs forward(const Tensor& patch_grids, const Tensor* patch_keep_mask,
                       Trace* trace = nullptr) const;

  // bilinear align-corners resample of the grid positional table; the class
  // token carries no grid position and is untouched by resizing
  void resize_grid(int64_t new_grid);

  int64_t grid() const { return grid_; }
  int64_t sequence_length() const { return grid_ * grid_ + 1; }
  const EncoderConfig& config() const { return cfg_; }
  Tensor mask_embedding() const;

 private:
  EncoderConfig cfg_;
  int64_t grid_;
  int64_t patch_dim_;
  ParamStore* store_;
  Tensor proj_w_, proj_b_;  // [patch_dim, d], [d]
  Tensor cls_emb_;          // [1, d], position baked in
  Tensor mask_emb_;         // [d], defined only when with_mask_embedding
  Tensor pos_emb_;          // [grid*grid, d], swapped wholesale on resize
  std::vector<EncoderLayerWeights> layers_;
  std::string prefix_;
};

// pos [g*g, d] -> [new_grid*new_grid, d], 2-D bilinear with align-corners
Tensor interpolate_pos_embed(const Tensor& pos, int64_t new_grid);

// Gated residual fusion over encoder depth: out = h_N + sum_j g(h_j) * h_j
// with one scalar-linear gate per layer j in [0, N). Zero-initialized gates
// make the op exactly the identity on h_N.
class MultiscaleGate {
 public:
  MultiscaleGate(int64_t layers, int64_t hidden, ParamStore& ps, const std::string& prefix);
  Tensor fuse(const LayerOutputs& outputs) const;

 private:
  std::vector<Tensor> gate_w_;  // [d, 1] each
  std::vector<Tensor> gate_b_;  // [1] each
};

}  // namespace duet
