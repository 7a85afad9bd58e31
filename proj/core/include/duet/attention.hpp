#pragma once

#include <string>
#include <vector>

#include "duet/params.hpp"
#include "duet/tensor.hpp"

namespace duet {

// Per-layer/head attention probability record, kept only when a Trace is
// passed through the forward call.
struct Trace {
  struct Entry {
    std::string stage;  // e.g. "fusion.cross_text", "decoder.self"
    int layer = 0;
    Tensor probs;  // [B, H, Tq, Tk]
  };
  std::vector<Entry> entries;

  const Entry* find(const std::string& stage, int layer) const {
    for (const auto& e : entries)
      if (e.stage == stage && e.layer == layer) return &e;
    return nullptr;
  }
};

// Weight conventions shared by every transformer block in the project:
// projections are y = x W + b with W stored [in, out]; attention splits the
// hidden axis into heads; blocks are pre-norm residual:
//   x = x + Attn(LN(x));  x = x + FFN(LN(x))
struct AttentionWeights {
  Tensor ln_g, ln_b;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct FfnWeights {
  Tensor ln_g, ln_b;
  Tensor w1, b1, w2, b2;
};

AttentionWeights make_attention_weights(ParamStore& ps, const std::string& prefix, ParamGroup g,
                                        int64_t hidden);
FfnWeights make_ffn_weights(ParamStore& ps, const std::string& prefix, ParamGroup g,
                            int64_t hidden, int64_t inner);

// x [B, Tq, d]; kv [B, Tk, d]; kv_keep null or [B, 1, 1, Tk] (1 = attend);
// causal adds a lower-triangular mask over the query/key positions.
// Residual add is included. trace_stage non-null records probabilities.
Tensor attention_block(const Tensor& x, const Tensor& kv, const AttentionWeights& w,
                       int64_t heads, const Tensor* kv_keep, bool causal, Trace* trace,
                       const char* trace_stage, int layer_index);

Tensor ffn_block(const Tensor& x, const FfnWeights& w);

// affine layer norm: LN(x) * g + b
Tensor norm_affine(const Tensor& x, const Tensor& g, const Tensor& b);

// [B, 1, 1, T] attention keep-mask from a [B, T] token mask
Tensor attn_keep_from_token_mask(const Tensor& token_mask);

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

}  // namespace duet
