#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "duet/attention.hpp"
#include "duet/params.hpp"
#include "duet/tensor.hpp"

namespace duet {

enum class FusionKind { Merged, CoAttention };
enum class ArchKind { EncoderOnly, EncoderDecoder };
enum class DecCrossOrder { TextFirst, VisionFirst };

const char* to_string(FusionKind k);
const char* to_string(ArchKind a);

struct FusionConfig {
  FusionKind kind = FusionKind::CoAttention;
  int64_t layers = 0;  // 0 = kind default (merged 12, coattn 6)
  int64_t hidden = 64;
  int64_t heads = 4;
  double ffn_mult = 4.0;
  ArchKind arch = ArchKind::EncoderOnly;
  int64_t dec_layers = 3;
  DecCrossOrder dec_cross_order = DecCrossOrder::TextFirst;

  int64_t effective_layers() const {
    if (layers > 0) return layers;
    return kind == FusionKind::Merged ? 12 : 6;
  }
  int64_t ffn_inner() const { return static_cast<int64_t>(ffn_mult * static_cast<double>(hidden)); }
  void validate() const;
};

struct FusionOutput {
  Tensor text_states;    // [B, T, hidden]
  Tensor vision_states;  // [B, V, hidden]
};

// optional per-layer forward wall-clock, appended by each fusion layer
struct LayerProfile {
  std::vector<double> layer_ms;
};

// Single transformer over [text; vision] with learned per-modality
// embeddings added before concatenation.
class MergedFusion {
 public:
  MergedFusion(const FusionConfig& cfg, ParamStore& ps, const std::string& prefix = "fusion");
  FusionOutput forward(const Tensor& text_feats, const Tensor& vision_feats,
                       const Tensor& text_mask, Trace* trace = nullptr,
                       LayerProfile* profile = nullptr) const;
  const FusionConfig& config() const { return cfg_; }

 private:
  FusionConfig cfg_;
  Tensor modality_emb_;  // [2, hidden]: row 0 text, row 1 vision
  std::vector<EncoderLayerWeights> layers_;
};

// Two towers; per layer each tower runs self-attention, then cross-attention
// with queries from its own stream and keys/values from the other tower's
// current-layer post-self-attention states, then FFN. No weight sharing.
class CoAttentionFusion {
 public:
  CoAttentionFusion(const FusionConfig& cfg, ParamStore& ps, const std::string& prefix = "fusion");
  FusionOutput forward(const Tensor& text_feats, const Tensor& vision_feats,
                       const Tensor& text_mask, Trace* trace = nullptr,
                       LayerProfile* profile = nullptr) const;
  const FusionConfig& config() const { return cfg_; }

 private:
  struct TowerLayer {
    AttentionWeights self_attn;
    AttentionWeights cross_attn;
    FfnWeights ffn;
  };
  FusionConfig cfg_;
  std::vector<TowerLayer> text_layers_;
  std::vector<TowerLayer> vision_layers_;
};

// Autoregressive decoder: causal self-attention, one cross-attention block
// into the text states and one into the vision states per layer, then FFN.
class Decoder {
 public:
  Decoder(const FusionConfig& cfg, int64_t vocab_size, ParamStore& ps,
          const std::string& prefix = "decoder");
  // ids [B*Td] with Td >= 1; returns [B, Td, hidden]
  Tensor forward(const FusionOutput& encoded, const Tensor& text_mask,
                 const std::vector<int64_t>& ids, int64_t batch, int64_t dec_len,
                 Trace* trace = nullptr) const;

 private:
  struct DecLayer {
    AttentionWeights self_attn;
    AttentionWeights cross_text;
    AttentionWeights cross_vision;
    FfnWeights ffn;
  };
  FusionConfig cfg_;
  Tensor token_emb_;  // decoder-side table, group top
  Tensor pos_emb_;
  std::vector<DecLayer> layers_;
};

// text-branch position-0 ([CLS]) state: [B, hidden]
Tensor pool_cls(const FusionOutput& out);

}  // namespace duet
