#include "duet/encoders.hpp"

#include <cmath>

namespace duet {

// ---- shared attention machinery ----

AttentionWeights make_attention_weights(ParamStore& ps, const std::string& prefix, ParamGroup g,
                                        int64_t hidden) {
  AttentionWeights w;
  w.ln_g = ps.add_ones(prefix + ".ln.g", g, {hidden});
  w.ln_b = ps.add_zeros(prefix + ".ln.b", g, {hidden});
  w.wq = ps.add_normal(prefix + ".wq", g, {hidden, hidden});
  w.bq = ps.add_zeros(prefix + ".bq", g, {hidden});
  w.wk = ps.add_normal(prefix + ".wk", g, {hidden, hidden});
  w.bk = ps.add_zeros(prefix + ".bk", g, {hidden});
  w.wv = ps.add_normal(prefix + ".wv", g, {hidden, hidden});
  w.bv = ps.add_zeros(prefix + ".bv", g, {hidden});
  w.wo = ps.add_normal(prefix + ".wo", g, {hidden, hidden});
  w.bo = ps.add_zeros(prefix + ".bo", g, {hidden});
  return w;
}

FfnWeights make_ffn_weights(ParamStore& ps, const std::string& prefix, ParamGroup g,
                            int64_t hidden, int64_t inner) {
  FfnWeights w;
  w.ln_g = ps.add_ones(prefix + ".ln.g", g, {hidden});
  w.ln_b = ps.add_zeros(prefix + ".ln.b", g, {hidden});
  w.w1 = ps.add_normal(prefix + ".w1", g, {hidden, inner});
  w.b1 = ps.add_zeros(prefix + ".b1", g, {inner});
  w.w2 = ps.add_normal(prefix + ".w2", g, {inner, hidden});
  w.b2 = ps.add_zeros(prefix + ".b2", g, {hidden});
  return w;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add(matmul(x, w), b);
}

Tensor norm_affine(const Tensor& x, const Tensor& g, const Tensor& b) {
  return add(mul(layer_norm(x, 1e-5), g), b);
}

Tensor attn_keep_from_token_mask(const Tensor& token_mask) {
  int64_t b = token_mask.dim(0), t = token_mask.dim(1);
  return reshape(token_mask, {b, 1, 1, t});
}

namespace {

// [B, T, d] -> [B, H, T, dk]
Tensor split_heads(const Tensor& x, int64_t heads) {
  int64_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  return transpose(reshape(x, {b, t, heads, d / heads}), 1, 2);
}

// [B, H, T, dk] -> [B, T, d]
Tensor merge_heads(const Tensor& x) {
  int64_t b = x.dim(0), h = x.dim(1), t = x.dim(2), dk = x.dim(3);
  return reshape(transpose(x, 1, 2), {b, t, h * dk});
}

Tensor causal_keep(int64_t t) {
  std::vector<double> m(static_cast<size_t>(t * t), 0.0);
  for (int64_t i = 0; i < t; ++i)
    for (int64_t j = 0; j <= i; ++j) m[static_cast<size_t>(i * t + j)] = 1.0;
  return Tensor::from_data({t, t}, std::move(m));
}

}  // namespace

Tensor attention_block(const Tensor& x, const Tensor& kv, const AttentionWeights& w,
                       int64_t heads, const Tensor* kv_keep, bool causal, Trace* trace,
                       const char* trace_stage, int layer_index) {
  const int64_t d = x.dim(2);
  if (kv.dim(2) != d)
    throw ShapeError("attention: query hidden " + std::to_string(d) +
                     " and key/value hidden " + std::to_string(kv.dim(2)) + " disagree");
  Tensor xq = norm_affine(x, w.ln_g, w.ln_b);
  // cross attention normalizes the query stream; kv states are consumed raw
  const Tensor& xkv = kv.node_id() == x.node_id() ? xq : kv;

  Tensor q = split_heads(linear(xq, w.wq, w.bq), heads);
  Tensor k = split_heads(linear(xkv, w.wk, w.bk), heads);
  Tensor v = split_heads(linear(xkv, w.wv, w.bv), heads);

  Tensor scores = scale(matmul(q, transpose(k, 2, 3)),
                        1.0 / std::sqrt(static_cast<double>(d / heads)));
  if (kv_keep) scores = mask_fill(scores, *kv_keep, -1e30);
  if (causal) scores = mask_fill(scores, causal_keep(x.dim(1)), -1e30);
  Tensor probs = softmax(scores, 3);
  if (trace && trace_stage)
    trace->entries.push_back(Trace::Entry{trace_stage, layer_index, probs});

  Tensor ctx = merge_heads(matmul(probs, v));
  return add(x, linear(ctx, w.wo, w.bo));
}

Tensor ffn_block(const Tensor& x, const FfnWeights& w) {
  Tensor h = norm_affine(x, w.ln_g, w.ln_b);
  h = gelu(linear(h, w.w1, w.b1));
  return add(x, linear(h, w.w2, w.b2));
}

// ---- configs ----

void EncoderConfig::validate(const char* who) const {
  if (hidden <= 0 || heads <= 0 || layers < 0)
    throw ShapeError(std::string(who) + ": non-positive dimensions");
  if (hidden % heads != 0)
    throw ShapeError(std::string(who) + ": hidden " + std::to_string(hidden) +
                     " not divisible by heads " + std::to_string(heads));
}

// ---- text encoder ----

TextEncoder::TextEncoder(const EncoderConfig& cfg, int64_t vocab_size, ParamStore& ps,
                         const std::string& prefix)
    : cfg_(cfg), vocab_size_(vocab_size), prefix_(prefix) {
  cfg_.validate("text encoder");
  token_emb_ = ps.add_normal(prefix + ".token_emb", ParamGroup::Bottom, {vocab_size, cfg_.hidden});
  pos_emb_ = ps.add_normal(prefix + ".pos_emb", ParamGroup::Bottom,
                           {cfg_.max_positions, cfg_.hidden});
  for (int64_t l = 0; l < cfg_.layers; ++l) {
    std::string lp = prefix + ".layer" + std::to_string(l);
    layers_.push_back(EncoderLayerWeights{
        make_attention_weights(ps, lp + ".attn", ParamGroup::Bottom, cfg_.hidden),
        make_ffn_weights(ps, lp + ".ffn", ParamGroup::Bottom, cfg_.hidden, cfg_.ffn_inner())});
  }
}

LayerOutputs TextEncoder::forward(const std::vector<int64_t>& ids, int64_t batch, int64_t seq_len,
                                  const Tensor& mask, Trace* trace) const {
  if (static_cast<int64_t>(ids.size()) != batch * seq_len)
    throw ShapeError("text encoder: id count does not match batch x seq_len");
  if (seq_len > cfg_.max_positions)
    throw ShapeError("text encoder: sequence length " + std::to_string(seq_len) +
                     " exceeds max_positions " + std::to_string(cfg_.max_positions));
  Tensor x = embedding_lookup(token_emb_, ids, {batch, seq_len});
  x = add(x, slice(pos_emb_, 0, 0, seq_len));
  Tensor keep = attn_keep_from_token_mask(mask);

  LayerOutputs out;
  out.states.push_back(x);
  for (size_t l = 0; l < layers_.size(); ++l) {
    x = attention_block(x, x, layers_[l].attn, cfg_.heads, &keep, false, trace, "text_enc.self",
                        static_cast<int>(l));
    x = ffn_block(x, layers_[l].ffn);
    out.states.push_back(x);
  }
  return out;
}

// ---- vision encoder ----

VisionEncoder::VisionEncoder(const EncoderConfig& cfg, int64_t grid, ParamStore& ps,
                             bool with_mask_embedding, const std::string& prefix)
    : cfg_(cfg), grid_(grid), store_(&ps), prefix_(prefix) {
  cfg_.validate("vision encoder");
  patch_dim_ = cfg_.patch_size * cfg_.patch_size * 3;
  proj_w_ = ps.add_normal(prefix + ".patch_proj.w", ParamGroup::Bottom, {patch_dim_, cfg_.hidden});
  proj_b_ = ps.add_zeros(prefix + ".patch_proj.b", ParamGroup::Bottom, {cfg_.hidden});
  cls_emb_ = ps.add_normal(prefix + ".cls_emb", ParamGroup::Bottom, {1, cfg_.hidden});
  if (with_mask_embedding)
    mask_emb_ = ps.add_normal(prefix + ".mask_patch_emb", ParamGroup::Bottom, {cfg_.hidden});
  pos_emb_ = ps.add_normal(prefix + ".pos_emb", ParamGroup::Bottom, {grid_ * grid_, cfg_.hidden});
  for (int64_t l = 0; l < cfg_.layers; ++l) {
    std::string lp = prefix + ".layer" + std::to_string(l);
    layers_.push_back(EncoderLayerWeights{
        make_attention_weights(ps, lp + ".attn", ParamGroup::Bottom, cfg_.hidden),
        make_ffn_weights(ps, lp + ".ffn", ParamGroup::Bottom, cfg_.hidden, cfg_.ffn_inner())});
  }
}

Tensor VisionEncoder::project_patches(const Tensor& patch_grids) const {
  if (patch_grids.rank() != 3 || patch_grids.dim(2) != patch_dim_)
    throw ShapeError("vision encoder: expected patch grids [B, P, " + std::to_string(patch_dim_) +
                     "], got " + shape_str(patch_grids.shape()));
  return linear(patch_grids, proj_w_, proj_b_);
}

Tensor VisionEncoder::mask_embedding() const {
  if (!mask_emb_.defined())
    throw TensorError("vision encoder: mask embedding not allocated (masked image modeling off)");
  return mask_emb_;
}

LayerOutputs VisionEncoder::forward(const Tensor& patch_grids, const Tensor* patch_keep_mask,
                                    Trace* trace) const {
  Tensor x = project_patches(patch_grids);
  int64_t b = x.dim(0), p = x.dim(1);
  if (p != grid_ * grid_)
    throw ShapeError("vision encoder: got " + std::to_string(p) + " patches, expected " +
                     std::to_string(grid_ * grid_) + " for grid " + std::to_string(grid_));
  if (patch_keep_mask) {
    // masked patches take the learned embedding; position embeddings stay
    Tensor keep = reshape(*patch_keep_mask, {b, p, 1});
    Tensor dropped = mask_fill(x, keep, 0.0);
    Tensor inverse = sub(Tensor::full({b, p, 1}, 1.0), keep);
    dropped = add(dropped, mul(inverse, mask_embedding()));
    x = dropped;
  }
  x = add(x, pos_emb_);
  // class token has no grid position; its embedding absorbs it
  std::vector<Tensor> cls_rows(1);
  cls_rows[0] = cls_emb_;
  Tensor cls_batch = cls_emb_;
  if (b > 1) {
    std::vector<Tensor> rows(static_cast<size_t>(b), cls_emb_);
    cls_batch = concat(rows, 0);
  }
  x = concat({reshape(cls_batch, {b, 1, cfg_.hidden}), x}, 1);

  LayerOutputs out;
  out.states.push_back(x);
  for (size_t l = 0; l < layers_.size(); ++l) {
    x = attention_block(x, x, layers_[l].attn, cfg_.heads, nullptr, false, trace,
                        "vision_enc.self", static_cast<int>(l));
    x = ffn_block(x, layers_[l].ffn);
    out.states.push_back(x);
  }
  return out;
}

Tensor interpolate_pos_embed(const Tensor& pos, int64_t new_grid) {
  if (new_grid < 1) throw ShapeError("interpolate_pos_embed: new_grid must be >= 1");
  if (pos.rank() != 2) throw ShapeError("interpolate_pos_embed: expected [g*g, d]");
  int64_t n = pos.dim(0), d = pos.dim(1);
  int64_t g = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (g * g != n)
    throw ShapeError("interpolate_pos_embed: " + std::to_string(n) + " rows is not a square grid");
  if (new_grid == g) return reshape(pos, {n, d});

  std::vector<double> out(static_cast<size_t>(new_grid * new_grid * d));
  const auto& src = pos.data();
  for (int64_t y = 0; y < new_grid; ++y) {
    for (int64_t x = 0; x < new_grid; ++x) {
      // align-corners sampling of the g x g field
      double sy = g == 1 ? 0.0
                         : static_cast<double>(y) * static_cast<double>(g - 1) /
                               static_cast<double>(new_grid - 1);
      double sx = g == 1 ? 0.0
                         : static_cast<double>(x) * static_cast<double>(g - 1) /
                               static_cast<double>(new_grid - 1);
      int64_t y0 = static_cast<int64_t>(std::floor(sy));
      int64_t x0 = static_cast<int64_t>(std::floor(sx));
      int64_t y1 = std::min(y0 + 1, g - 1);
      int64_t x1 = std::min(x0 + 1, g - 1);
      double fy = sy - static_cast<double>(y0);
      double fx = sx - static_cast<double>(x0);
      for (int64_t c = 0; c < d; ++c) {
        double v00 = src[static_cast<size_t>((y0 * g + x0) * d + c)];
        double v01 = src[static_cast<size_t>((y0 * g + x1) * d + c)];
        double v10 = src[static_cast<size_t>((y1 * g + x0) * d + c)];
        double v11 = src[static_cast<size_t>((y1 * g + x1) * d + c)];
        out[static_cast<size_t>((y * new_grid + x) * d + c)] =
            (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
      }
    }
  }
  return Tensor::from_data({new_grid * new_grid, d}, std::move(out));
}

void VisionEncoder::resize_grid(int64_t new_grid) {
  if (new_grid == grid_) return;
  Tensor resampled = interpolate_pos_embed(pos_emb_, new_grid);
  Tensor fresh =
      Tensor::from_data({new_grid * new_grid, cfg_.hidden}, resampled.data(), true);
  store_->replace(prefix_ + ".pos_emb", fresh);
  pos_emb_ = fresh;
  grid_ = new_grid;
}

// ---- multiscale gate ----

MultiscaleGate::MultiscaleGate(int64_t layers, int64_t hidden, ParamStore& ps,
                               const std::string& prefix) {
  for (int64_t l = 0; l < layers; ++l) {
    gate_w_.push_back(
        ps.add_zeros(prefix + ".gate" + std::to_string(l) + ".w", ParamGroup::Top, {hidden, 1}));
    gate_b_.push_back(
        ps.add_zeros(prefix + ".gate" + std::to_string(l) + ".b", ParamGroup::Top, {1}));
  }
}

Tensor MultiscaleGate::fuse(const LayerOutputs& outputs) const {
  if (outputs.states.size() != gate_w_.size() + 1)
    throw ShapeError("multiscale fuse: " + std::to_string(gate_w_.size()) + " gates for " +
                     std::to_string(outputs.states.size()) + " layer states (need layers+1)");
  Tensor out = outputs.top();
  for (size_t j = 0; j < gate_w_.size(); ++j) {
    const Tensor& h = outputs.states[j];
    Tensor gate = linear(h, gate_w_[j], gate_b_[j]);  // [B, S, 1] scalar per token
    out = add(out, mul(gate, h));
  }
  return out;
}

}  // namespace duet
