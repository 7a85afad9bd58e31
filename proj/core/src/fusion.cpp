#include "duet/fusion.hpp"

#include <chrono>

namespace duet {

const char* to_string(FusionKind k) { return k == FusionKind::Merged ? "merged" : "coattn"; }
const char* to_string(ArchKind a) {
  return a == ArchKind::EncoderOnly ? "encoder_only" : "encoder_decoder";
}

void FusionConfig::validate() const {
  if (hidden <= 0 || heads <= 0) throw ShapeError("fusion config: non-positive dimensions");
  if (hidden % heads != 0)
    throw ShapeError("fusion config: hidden " + std::to_string(hidden) +
                     " not divisible by heads " + std::to_string(heads));
  if (arch == ArchKind::EncoderDecoder && dec_layers < 1)
    throw ShapeError("fusion config: encoder_decoder requires dec_layers >= 1");
}

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void check_hidden(const Tensor& text, const Tensor& vision, int64_t hidden) {
  if (text.dim(2) != hidden || vision.dim(2) != hidden)
    throw ShapeError("fusion: feature hidden sizes " + std::to_string(text.dim(2)) + "/" +
                     std::to_string(vision.dim(2)) + " do not match fusion hidden " +
                     std::to_string(hidden));
}

}  // namespace

// ---- merged attention ----

MergedFusion::MergedFusion(const FusionConfig& cfg, ParamStore& ps, const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  modality_emb_ = ps.add_normal(prefix + ".modality_emb", ParamGroup::Top, {2, cfg_.hidden});
  for (int64_t l = 0; l < cfg_.effective_layers(); ++l) {
    std::string lp = prefix + ".layer" + std::to_string(l);
    layers_.push_back(EncoderLayerWeights{
        make_attention_weights(ps, lp + ".self_attn", ParamGroup::Top, cfg_.hidden),
        make_ffn_weights(ps, lp + ".ffn", ParamGroup::Top, cfg_.hidden, cfg_.ffn_inner())});
  }
}

FusionOutput MergedFusion::forward(const Tensor& text_feats, const Tensor& vision_feats,
                                   const Tensor& text_mask, Trace* trace,
                                   LayerProfile* profile) const {
  check_hidden(text_feats, vision_feats, cfg_.hidden);
  int64_t b = text_feats.dim(0), t = text_feats.dim(1), v = vision_feats.dim(1);

  Tensor text_in = add(text_feats, slice(modality_emb_, 0, 0, 1));
  Tensor vision_in = add(vision_feats, slice(modality_emb_, 0, 1, 1));
  Tensor x = concat({text_in, vision_in}, 1);

  // vision tokens are always attendable; text obeys the padding mask
  Tensor ones = Tensor::full({b, v}, 1.0);
  Tensor keep = attn_keep_from_token_mask(concat({text_mask, ones}, 1));

  for (size_t l = 0; l < layers_.size(); ++l) {
    double t0 = profile ? now_ms() : 0.0;
    x = attention_block(x, x, layers_[l].attn, cfg_.heads, &keep, false, trace, "fusion.self",
                        static_cast<int>(l));
    x = ffn_block(x, layers_[l].ffn);
    if (profile) profile->layer_ms.push_back(now_ms() - t0);
  }
  FusionOutput out;
  out.text_states = slice(x, 1, 0, t);
  out.vision_states = slice(x, 1, t, v);
  return out;
}

// ---- co-attention ----

CoAttentionFusion::CoAttentionFusion(const FusionConfig& cfg, ParamStore& ps,
                                     const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  for (int64_t l = 0; l < cfg_.effective_layers(); ++l) {
    std::string tl = prefix + ".text.layer" + std::to_string(l);
    std::string vl = prefix + ".vision.layer" + std::to_string(l);
    text_layers_.push_back(
        TowerLayer{make_attention_weights(ps, tl + ".self_attn", ParamGroup::Top, cfg_.hidden),
                   make_attention_weights(ps, tl + ".cross_attn", ParamGroup::Top, cfg_.hidden),
                   make_ffn_weights(ps, tl + ".ffn", ParamGroup::Top, cfg_.hidden,
                                    cfg_.ffn_inner())});
    vision_layers_.push_back(
        TowerLayer{make_attention_weights(ps, vl + ".self_attn", ParamGroup::Top, cfg_.hidden),
                   make_attention_weights(ps, vl + ".cross_attn", ParamGroup::Top, cfg_.hidden),
                   make_ffn_weights(ps, vl + ".ffn", ParamGroup::Top, cfg_.hidden,
                                    cfg_.ffn_inner())});
  }
}

FusionOutput CoAttentionFusion::forward(const Tensor& text_feats, const Tensor& vision_feats,
                                        const Tensor& text_mask, Trace* trace,
                                        LayerProfile* profile) const {
  check_hidden(text_feats, vision_feats, cfg_.hidden);
  Tensor text_keep = attn_keep_from_token_mask(text_mask);

  Tensor t = text_feats;
  Tensor v = vision_feats;
  for (size_t l = 0; l < text_layers_.size(); ++l) {
    double t0 = profile ? now_ms() : 0.0;
    int li = static_cast<int>(l);
    // self-attention within each modality
    Tensor t_sa = attention_block(t, t, text_layers_[l].self_attn, cfg_.heads, &text_keep, false,
                                  trace, "fusion.text.self", li);
    Tensor v_sa = attention_block(v, v, vision_layers_[l].self_attn, cfg_.heads, nullptr, false,
                                  trace, "fusion.vision.self", li);
    // cross-attention against the other tower's current-layer states
    Tensor t_ca = attention_block(t_sa, v_sa, text_layers_[l].cross_attn, cfg_.heads, nullptr,
                                  false, trace, "fusion.cross_text", li);
    Tensor v_ca = attention_block(v_sa, t_sa, vision_layers_[l].cross_attn, cfg_.heads,
                                  &text_keep, false, trace, "fusion.cross_vision", li);
    t = ffn_block(t_ca, text_layers_[l].ffn);
    v = ffn_block(v_ca, vision_layers_[l].ffn);
    if (profile) profile->layer_ms.push_back(now_ms() - t0);
  }
  return FusionOutput{t, v};
}

// ---- decoder ----

Decoder::Decoder(const FusionConfig& cfg, int64_t vocab_size, ParamStore& ps,
                 const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  token_emb_ = ps.add_normal(prefix + ".token_emb", ParamGroup::Top, {vocab_size, cfg_.hidden});
  pos_emb_ = ps.add_normal(prefix + ".pos_emb", ParamGroup::Top, {64, cfg_.hidden});
  for (int64_t l = 0; l < cfg_.dec_layers; ++l) {
    std::string lp = prefix + ".layer" + std::to_string(l);
    layers_.push_back(DecLayer{
        make_attention_weights(ps, lp + ".self_attn", ParamGroup::Top, cfg_.hidden),
        make_attention_weights(ps, lp + ".cross_text", ParamGroup::Top, cfg_.hidden),
        make_attention_weights(ps, lp + ".cross_vision", ParamGroup::Top, cfg_.hidden),
        make_ffn_weights(ps, lp + ".ffn", ParamGroup::Top, cfg_.hidden, cfg_.ffn_inner())});
  }
}

Tensor Decoder::forward(const FusionOutput& encoded, const Tensor& text_mask,
                        const std::vector<int64_t>& ids, int64_t batch, int64_t dec_len,
                        Trace* trace) const {
  if (dec_len < 1) throw ShapeError("decoder: empty decoder input");
  if (static_cast<int64_t>(ids.size()) != batch * dec_len)
    throw ShapeError("decoder: id count does not match batch x dec_len");
  if (dec_len > pos_emb_.dim(0))
    throw ShapeError("decoder: sequence length " + std::to_string(dec_len) +
                     " exceeds decoder positions " + std::to_string(pos_emb_.dim(0)));
  Tensor x = embedding_lookup(token_emb_, ids, {batch, dec_len});
  x = add(x, slice(pos_emb_, 0, 0, dec_len));
  Tensor text_keep = attn_keep_from_token_mask(text_mask);

  for (size_t l = 0; l < layers_.size(); ++l) {
    int li = static_cast<int>(l);
    x = attention_block(x, x, layers_[l].self_attn, cfg_.heads, nullptr, true, trace,
                        "decoder.self", li);
    auto cross_text = [&] {
      x = attention_block(x, encoded.text_states, layers_[l].cross_text, cfg_.heads, &text_keep,
                          false, trace, "decoder.cross_text", li);
    };
    auto cross_vision = [&] {
      x = attention_block(x, encoded.vision_states, layers_[l].cross_vision, cfg_.heads, nullptr,
                          false, trace, "decoder.cross_vision", li);
    };
    if (cfg_.dec_cross_order == DecCrossOrder::TextFirst) {
      cross_text();
      cross_vision();
    } else {
      cross_vision();
      cross_text();
    }
    x = ffn_block(x, layers_[l].ffn);
  }
  return x;
}

Tensor pool_cls(const FusionOutput& out) {
  int64_t b = out.text_states.dim(0), d = out.text_states.dim(2);
  return reshape(slice(out.text_states, 1, 0, 1), {b, d});
}

}  // namespace duet
