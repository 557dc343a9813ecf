#include "sdae/vit.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

#include "sdae/ops.hpp"
#include "sdae/rng.hpp"

namespace sdae {

namespace {
constexpr double kLayerNormEps = 1e-6;
}

void VitConfig::validate() const {
  if (image_size == 0 || patch_size == 0 || channels == 0)
    throw ConfigError("vit: zero image/patch/channel size");
  if (image_size % patch_size != 0)
    throw ConfigError("vit: image size " + std::to_string(image_size) +
                      " not divisible by patch size " +
                      std::to_string(patch_size));
  if (embed_dim == 0 || embed_dim % num_heads != 0)
    throw ConfigError("vit: embed_dim " + std::to_string(embed_dim) +
                      " not divisible by num_heads " +
                      std::to_string(num_heads));
  if (decoder_dim == 0 || decoder_dim % decoder_num_heads != 0)
    throw ConfigError("vit: decoder_dim " + std::to_string(decoder_dim) +
                      " not divisible by decoder_num_heads " +
                      std::to_string(decoder_num_heads));
  if (embed_dim % 4 != 0 || decoder_dim % 4 != 0)
    throw ConfigError("vit: embedding widths must be divisible by 4 for the "
                      "2-D sinusoidal tables");
  if (encoder_depth == 0 || decoder_depth == 0)
    throw ConfigError("vit: depths must be >= 1");
  if (!(drop_path_rate >= 0.0 && drop_path_rate < 1.0))
    throw ConfigError("vit: drop_path_rate must lie in [0,1)");
  if (mlp_ratio <= 0.0) throw ConfigError("vit: mlp_ratio must be > 0");
}

namespace {

template <typename S>
BlockParamsT<S> init_block(std::size_t dim, std::size_t hidden, Rng& rng) {
  const S std_dev = S(0.02);
  BlockParamsT<S> b;
  b.norm1_gain = TensorT<S>::full({dim}, S(1));
  b.norm1_bias = TensorT<S>::zeros({dim});
  b.qkv_weight = TensorT<S>::trunc_normal({dim, 3 * dim}, rng, std_dev);
  b.qkv_bias = TensorT<S>::zeros({3 * dim});
  b.proj_weight = TensorT<S>::trunc_normal({dim, dim}, rng, std_dev);
  b.proj_bias = TensorT<S>::zeros({dim});
  b.norm2_gain = TensorT<S>::full({dim}, S(1));
  b.norm2_bias = TensorT<S>::zeros({dim});
  b.fc1_weight = TensorT<S>::trunc_normal({dim, hidden}, rng, std_dev);
  b.fc1_bias = TensorT<S>::zeros({hidden});
  b.fc2_weight = TensorT<S>::trunc_normal({hidden, dim}, rng, std_dev);
  b.fc2_bias = TensorT<S>::zeros({dim});
  return b;
}

std::size_t mlp_hidden(std::size_t dim, double ratio) {
  const auto h = static_cast<std::size_t>(
      std::llround(static_cast<double>(dim) * ratio));
  return h == 0 ? 1 : h;
}

}  // namespace

template <typename S>
VitStateT<S> init_vit(const VitConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(Rng::derive(seed, {0x766974ULL}));
  const S std_dev = S(0.02);

  VitStateT<S> st;
  st.config = cfg;

  auto& e = st.encoder;
  e.patch_weight =
      TensorT<S>::trunc_normal({cfg.token_dim(), cfg.embed_dim}, rng, std_dev);
  e.patch_bias = TensorT<S>::zeros({cfg.embed_dim});
  if (cfg.use_class_token)
    e.class_token = TensorT<S>::trunc_normal({1, cfg.embed_dim}, rng, std_dev);
  for (std::size_t i = 0; i < cfg.encoder_depth; ++i)
    e.blocks.push_back(init_block<S>(
        cfg.embed_dim, mlp_hidden(cfg.embed_dim, cfg.mlp_ratio), rng));
  e.norm_gain = TensorT<S>::full({cfg.embed_dim}, S(1));
  e.norm_bias = TensorT<S>::zeros({cfg.embed_dim});

  auto& d = st.decoder;
  d.embed_weight =
      TensorT<S>::trunc_normal({cfg.embed_dim, cfg.decoder_dim}, rng, std_dev);
  d.embed_bias = TensorT<S>::zeros({cfg.decoder_dim});
  d.mask_token = TensorT<S>::trunc_normal({1, cfg.decoder_dim}, rng, std_dev);
  for (std::size_t i = 0; i < cfg.decoder_depth; ++i)
    d.blocks.push_back(init_block<S>(
        cfg.decoder_dim, mlp_hidden(cfg.decoder_dim, cfg.mlp_ratio), rng));
  d.norm_gain = TensorT<S>::full({cfg.decoder_dim}, S(1));
  d.norm_bias = TensorT<S>::zeros({cfg.decoder_dim});
  d.head_weight =
      TensorT<S>::trunc_normal({cfg.decoder_dim, cfg.embed_dim}, rng, std_dev);
  d.head_bias = TensorT<S>::zeros({cfg.embed_dim});

  st.enc_pos = pos_embed_2d<S>(cfg.grid_side(), cfg.embed_dim);
  st.dec_pos = pos_embed_2d<S>(cfg.grid_side(), cfg.decoder_dim);

  for (auto& [name, t] : named_params(st)) t.set_requires_grad(true);
  return st;
}

namespace {

template <typename S>
void collect_block(BlockParamsT<S>& b, const std::string& prefix,
                   NamedParamsT<S>& out) {
  out.add(prefix + ".norm1.gain", b.norm1_gain);
  out.add(prefix + ".norm1.bias", b.norm1_bias);
  out.add(prefix + ".attn.qkv.weight", b.qkv_weight);
  out.add(prefix + ".attn.qkv.bias", b.qkv_bias);
  out.add(prefix + ".attn.proj.weight", b.proj_weight);
  out.add(prefix + ".attn.proj.bias", b.proj_bias);
  out.add(prefix + ".norm2.gain", b.norm2_gain);
  out.add(prefix + ".norm2.bias", b.norm2_bias);
  out.add(prefix + ".mlp.fc1.weight", b.fc1_weight);
  out.add(prefix + ".mlp.fc1.bias", b.fc1_bias);
  out.add(prefix + ".mlp.fc2.weight", b.fc2_weight);
  out.add(prefix + ".mlp.fc2.bias", b.fc2_bias);
}

}  // namespace

template <typename S>
void collect_encoder_params(EncoderParamsT<S>& enc, bool use_class_token,
                            NamedParamsT<S>& out) {
  out.add("patch_embed.weight", enc.patch_weight);
  out.add("patch_embed.bias", enc.patch_bias);
  if (use_class_token) out.add("class_token", enc.class_token);
  for (std::size_t i = 0; i < enc.blocks.size(); ++i)
    collect_block(enc.blocks[i], "encoder.block" + std::to_string(i), out);
  out.add("encoder.norm.gain", enc.norm_gain);
  out.add("encoder.norm.bias", enc.norm_bias);
}

template <typename S>
NamedParamsT<S> named_params(VitStateT<S>& state) {
  NamedParamsT<S> out;
  collect_encoder_params(state.encoder, state.config.use_class_token, out);
  auto& d = state.decoder;
  out.add("decoder.embed.weight", d.embed_weight);
  out.add("decoder.embed.bias", d.embed_bias);
  out.add("decoder.mask_token", d.mask_token);
  for (std::size_t i = 0; i < d.blocks.size(); ++i)
    collect_block(d.blocks[i], "decoder.block" + std::to_string(i), out);
  out.add("decoder.norm.gain", d.norm_gain);
  out.add("decoder.norm.bias", d.norm_bias);
  out.add("decoder.head.weight", d.head_weight);
  out.add("decoder.head.bias", d.head_bias);
  return out;
}

template <typename S>
VitStateT<S> clone_state(const VitStateT<S>& state) {
  VitStateT<S> copy;
  copy.config = state.config;
  copy.enc_pos = state.enc_pos.clone();
  copy.dec_pos = state.dec_pos.clone();
  VitStateT<S>& mut = copy;
  mut.encoder.blocks.resize(state.encoder.blocks.size());
  mut.decoder.blocks.resize(state.decoder.blocks.size());
  auto clone_into = [](const TensorT<S>& from, TensorT<S>& to) {
    to = from.clone();
  };
  clone_into(state.encoder.patch_weight, mut.encoder.patch_weight);
  clone_into(state.encoder.patch_bias, mut.encoder.patch_bias);
  if (state.config.use_class_token)
    clone_into(state.encoder.class_token, mut.encoder.class_token);
  for (std::size_t i = 0; i < state.encoder.blocks.size(); ++i) {
    const auto& f = state.encoder.blocks[i];
    auto& t = mut.encoder.blocks[i];
    clone_into(f.norm1_gain, t.norm1_gain);
    clone_into(f.norm1_bias, t.norm1_bias);
    clone_into(f.qkv_weight, t.qkv_weight);
    clone_into(f.qkv_bias, t.qkv_bias);
    clone_into(f.proj_weight, t.proj_weight);
    clone_into(f.proj_bias, t.proj_bias);
    clone_into(f.norm2_gain, t.norm2_gain);
    clone_into(f.norm2_bias, t.norm2_bias);
    clone_into(f.fc1_weight, t.fc1_weight);
    clone_into(f.fc1_bias, t.fc1_bias);
    clone_into(f.fc2_weight, t.fc2_weight);
    clone_into(f.fc2_bias, t.fc2_bias);
  }
  clone_into(state.encoder.norm_gain, mut.encoder.norm_gain);
  clone_into(state.encoder.norm_bias, mut.encoder.norm_bias);
  clone_into(state.decoder.embed_weight, mut.decoder.embed_weight);
  clone_into(state.decoder.embed_bias, mut.decoder.embed_bias);
  clone_into(state.decoder.mask_token, mut.decoder.mask_token);
  for (std::size_t i = 0; i < state.decoder.blocks.size(); ++i) {
    const auto& f = state.decoder.blocks[i];
    auto& t = mut.decoder.blocks[i];
    clone_into(f.norm1_gain, t.norm1_gain);
    clone_into(f.norm1_bias, t.norm1_bias);
    clone_into(f.qkv_weight, t.qkv_weight);
    clone_into(f.qkv_bias, t.qkv_bias);
    clone_into(f.proj_weight, t.proj_weight);
    clone_into(f.proj_bias, t.proj_bias);
    clone_into(f.norm2_gain, t.norm2_gain);
    clone_into(f.norm2_bias, t.norm2_bias);
    clone_into(f.fc1_weight, t.fc1_weight);
    clone_into(f.fc1_bias, t.fc1_bias);
    clone_into(f.fc2_weight, t.fc2_weight);
    clone_into(f.fc2_bias, t.fc2_bias);
  }
  clone_into(state.decoder.norm_gain, mut.decoder.norm_gain);
  clone_into(state.decoder.norm_bias, mut.decoder.norm_bias);
  clone_into(state.decoder.head_weight, mut.decoder.head_weight);
  clone_into(state.decoder.head_bias, mut.decoder.head_bias);
  return copy;
}

template <typename S>
TensorT<S> patchify(const TensorT<S>& image, std::size_t patch_size) {
  if (image.ndim() != 3)
    throw ShapeError("patchify: expected [H x W x C], got " +
                     shape_str(image.shape()));
  const std::size_t h = image.shape()[0], w = image.shape()[1],
                    c = image.shape()[2];
  if (h != w)
    throw ShapeError("patchify: image must be square, got " +
                     shape_str(image.shape()));
  if (patch_size == 0 || h % patch_size != 0)
    throw ShapeError("patchify: size " + std::to_string(h) +
                     " not divisible by patch " + std::to_string(patch_size));
  const std::size_t g = h / patch_size;
  const std::size_t token_dim = patch_size * patch_size * c;
  auto out = TensorT<S>::zeros({g * g, token_dim});
  const S* src = image.ptr();
  S* dst = out.ptr();
  for (std::size_t pr = 0; pr < g; ++pr)
    for (std::size_t pc = 0; pc < g; ++pc) {
      S* row = dst + (pr * g + pc) * token_dim;
      for (std::size_t y = 0; y < patch_size; ++y)
        for (std::size_t x = 0; x < patch_size; ++x)
          for (std::size_t ch = 0; ch < c; ++ch)
            *row++ = src[((pr * patch_size + y) * w + pc * patch_size + x) * c +
                         ch];
    }
  return out;
}

template <typename S>
TensorT<S> unpatchify(const TensorT<S>& tokens, std::size_t image_size,
                      std::size_t channels, std::size_t patch_size) {
  if (tokens.ndim() != 2)
    throw ShapeError("unpatchify: expected a token matrix, got " +
                     shape_str(tokens.shape()));
  const std::size_t g = image_size / patch_size;
  if (patch_size == 0 || image_size % patch_size != 0 ||
      tokens.rows() != g * g ||
      tokens.cols() != patch_size * patch_size * channels)
    throw ShapeError("unpatchify: token matrix " + shape_str(tokens.shape()) +
                     " inconsistent with image " + std::to_string(image_size) +
                     ", patch " + std::to_string(patch_size));
  auto out = TensorT<S>::zeros({image_size, image_size, channels});
  const S* src = tokens.ptr();
  S* dst = out.ptr();
  const std::size_t token_dim = tokens.cols();
  for (std::size_t pr = 0; pr < g; ++pr)
    for (std::size_t pc = 0; pc < g; ++pc) {
      const S* row = src + (pr * g + pc) * token_dim;
      for (std::size_t y = 0; y < patch_size; ++y)
        for (std::size_t x = 0; x < patch_size; ++x)
          for (std::size_t ch = 0; ch < channels; ++ch)
            dst[((pr * patch_size + y) * image_size + pc * patch_size + x) *
                    channels +
                ch] = *row++;
    }
  return out;
}

template <typename S>
TensorT<S> pos_embed_2d(std::size_t grid_side, std::size_t dim) {
  if (dim == 0 || dim % 4 != 0)
    throw ConfigError("pos_embed_2d: dim " + std::to_string(dim) +
                      " must be divisible by 4");
  const std::size_t quarter = dim / 4;
  auto out = TensorT<S>::zeros({grid_side * grid_side, dim});
  S* dst = out.ptr();
  for (std::size_t r = 0; r < grid_side; ++r)
    for (std::size_t c = 0; c < grid_side; ++c) {
      S* row = dst + (r * grid_side + c) * dim;
      for (std::size_t i = 0; i < quarter; ++i) {
        const double omega =
            1.0 / std::pow(10000.0, static_cast<double>(i) /
                                        static_cast<double>(quarter));
        row[i] = static_cast<S>(std::sin(static_cast<double>(r) * omega));
        row[quarter + i] =
            static_cast<S>(std::cos(static_cast<double>(r) * omega));
        row[2 * quarter + i] =
            static_cast<S>(std::sin(static_cast<double>(c) * omega));
        row[3 * quarter + i] =
            static_cast<S>(std::cos(static_cast<double>(c) * omega));
      }
    }
  return out;
}

namespace {

template <typename S>
TensorT<S> affine_layernorm(const TensorT<S>& x, const TensorT<S>& gain,
                            const TensorT<S>& bias) {
  return ops::add_rowvec(
      ops::mul_rowvec(ops::layernorm(x, S(kLayerNormEps)), gain), bias);
}

template <typename S>
TensorT<S> linear(const TensorT<S>& x, const TensorT<S>& w,
                  const TensorT<S>& b) {
  return ops::add_rowvec(ops::matmul(x, w), b);
}

// Pre-norm transformer block. drop_scale multiplies both residual branches
// (stochastic depth); probe, when set, receives each head's attention rows.
template <typename S>
TensorT<S> block_forward(const BlockParamsT<S>& p, const TensorT<S>& x_in,
                         std::size_t num_heads, S drop_scale,
                         std::vector<TensorT<S>>* probe) {
  const std::size_t dim = x_in.cols();
  const std::size_t head_dim = dim / num_heads;
  const S attn_scale =
      S(1) / static_cast<S>(std::sqrt(static_cast<double>(head_dim)));

  TensorT<S> x = x_in;
  TensorT<S> h = affine_layernorm(x, p.norm1_gain, p.norm1_bias);
  TensorT<S> qkv = linear(h, p.qkv_weight, p.qkv_bias);
  std::vector<TensorT<S>> heads;
  heads.reserve(num_heads);
  for (std::size_t hd = 0; hd < num_heads; ++hd) {
    TensorT<S> q = ops::slice_cols(qkv, hd * head_dim, head_dim);
    TensorT<S> k = ops::slice_cols(qkv, dim + hd * head_dim, head_dim);
    TensorT<S> v = ops::slice_cols(qkv, 2 * dim + hd * head_dim, head_dim);
    TensorT<S> scores =
        ops::scale(ops::matmul(q, ops::transpose(k)), attn_scale);
    TensorT<S> attn = ops::softmax(scores);
    if (probe) probe->push_back(attn);
    heads.push_back(ops::matmul(attn, v));
  }
  TensorT<S> ctx = num_heads == 1 ? heads[0] : ops::concat_cols(heads);
  TensorT<S> attn_out = linear(ctx, p.proj_weight, p.proj_bias);
  if (drop_scale != S(1)) attn_out = ops::scale(attn_out, drop_scale);
  x = ops::add(x, attn_out);

  TensorT<S> m = affine_layernorm(x, p.norm2_gain, p.norm2_bias);
  TensorT<S> mlp =
      linear(ops::gelu(linear(m, p.fc1_weight, p.fc1_bias)), p.fc2_weight,
             p.fc2_bias);
  if (drop_scale != S(1)) mlp = ops::scale(mlp, drop_scale);
  return ops::add(x, mlp);
}

}  // namespace

template <typename S>
TensorT<S> encoder_forward(const VitConfig& cfg, const EncoderParamsT<S>& enc,
                           const TensorT<S>& enc_pos, const TensorT<S>& tokens,
                           const std::vector<std::size_t>& positions,
                           const std::vector<S>* drop_path_scale,
                           AttnProbeT<S>* probe) {
  if (tokens.ndim() != 2 || tokens.cols() != cfg.token_dim())
    throw ShapeError("encoder: token matrix " + shape_str(tokens.shape()) +
                     " does not match token dim " +
                     std::to_string(cfg.token_dim()));
  if (positions.size() != tokens.rows() || positions.empty())
    throw ContractError("encoder: " + std::to_string(positions.size()) +
                        " positions for " + std::to_string(tokens.rows()) +
                        " tokens");
  std::unordered_set<std::size_t> seen;
  for (std::size_t p : positions) {
    if (p >= cfg.n_tokens())
      throw ContractError("encoder: position " + std::to_string(p) +
                          " out of range");
    if (!seen.insert(p).second)
      throw ContractError("encoder: duplicate position " + std::to_string(p));
  }
  if (drop_path_scale && drop_path_scale->size() != cfg.encoder_depth)
    throw ContractError("encoder: drop-path scale count mismatch");

  TensorT<S> x = linear(tokens, enc.patch_weight, enc.patch_bias);
  x = ops::add(x, ops::select_rows(enc_pos, positions));
  if (cfg.use_class_token)
    x = ops::concat_rows<S>({enc.class_token, x});

  for (std::size_t b = 0; b < cfg.encoder_depth; ++b) {
    const S ds = drop_path_scale ? (*drop_path_scale)[b] : S(1);
    std::vector<TensorT<S>>* blk_probe = nullptr;
    if (probe && b + 1 == cfg.encoder_depth) {
      probe->last_block_attn.clear();
      blk_probe = &probe->last_block_attn;
    }
    x = block_forward(enc.blocks[b], x, cfg.num_heads, ds, blk_probe);
  }
  return affine_layernorm(x, enc.norm_gain, enc.norm_bias);
}

template <typename S>
TensorT<S> decoder_forward(const VitStateT<S>& state,
                           const TensorT<S>& encoder_latents,
                           const MaskPlan& plan) {
  const VitConfig& cfg = state.config;
  const auto& dec = state.decoder;
  const std::size_t cls = cfg.use_class_token ? 1 : 0;
  if (plan.n_tokens != cfg.n_tokens())
    throw ContractError("decoder: plan covers " +
                        std::to_string(plan.n_tokens) + " tokens, model has " +
                        std::to_string(cfg.n_tokens()));
  if (encoder_latents.ndim() != 2 ||
      encoder_latents.rows() != plan.visible_idx.size() + cls ||
      encoder_latents.cols() != cfg.embed_dim)
    throw ContractError("decoder: latents " +
                        shape_str(encoder_latents.shape()) +
                        " do not match the mask plan (" +
                        std::to_string(plan.visible_idx.size()) +
                        " visible tokens)");
  if (plan.masked_idx.empty())
    throw ContractError("decoder: plan has no masked tokens");

  TensorT<S> proj = linear(encoder_latents, dec.embed_weight, dec.embed_bias);

  TensorT<S> seq;
  std::vector<std::size_t> masked_rows;  // where predictions sit in seq
  if (cfg.decoder_masked_only) {
    // Mask tokens only (plus the class latent when present).
    const std::size_t len = plan.masked_idx.size() + cls;
    TensorT<S> base = ops::broadcast_row(dec.mask_token, len);
    if (cls) {
      seq = ops::scatter_rows(base, {0}, ops::slice_rows(proj, 0, 1));
    } else {
      seq = base;
    }
    TensorT<S> pos = TensorT<S>::zeros({len, cfg.decoder_dim});
    for (std::size_t j = 0; j < plan.masked_idx.size(); ++j)
      std::copy_n(state.dec_pos.ptr() + plan.masked_idx[j] * cfg.decoder_dim,
                  cfg.decoder_dim, pos.ptr() + (cls + j) * cfg.decoder_dim);
    seq = ops::add(seq, pos);
    masked_rows.resize(plan.masked_idx.size());
    for (std::size_t j = 0; j < masked_rows.size(); ++j)
      masked_rows[j] = cls + j;
  } else {
    // Full sequence: visible latents at their positions, mask tokens at
    // masked positions.
    const std::size_t len = cfg.n_tokens() + cls;
    TensorT<S> base = ops::broadcast_row(dec.mask_token, len);
    std::vector<std::size_t> idx;
    idx.reserve(plan.visible_idx.size() + cls);
    if (cls) idx.push_back(0);
    for (std::size_t v : plan.visible_idx) idx.push_back(cls + v);
    seq = ops::scatter_rows(base, idx, proj);
    TensorT<S> pos = TensorT<S>::zeros({len, cfg.decoder_dim});
    std::copy_n(state.dec_pos.ptr(), cfg.n_tokens() * cfg.decoder_dim,
                pos.ptr() + cls * cfg.decoder_dim);
    seq = ops::add(seq, pos);
    masked_rows.resize(plan.masked_idx.size());
    for (std::size_t j = 0; j < masked_rows.size(); ++j)
      masked_rows[j] = cls + plan.masked_idx[j];
  }

  for (std::size_t b = 0; b < cfg.decoder_depth; ++b)
    seq = block_forward(dec.blocks[b], seq, cfg.decoder_num_heads, S(1),
                        static_cast<std::vector<TensorT<S>>*>(nullptr));
  seq = affine_layernorm(seq, dec.norm_gain, dec.norm_bias);
  TensorT<S> picked = ops::select_rows(seq, masked_rows);
  return linear(picked, dec.head_weight, dec.head_bias);
}

template <typename S>
AttentionMapT<S> attention_map(const VitStateT<S>& state,
                               const TensorT<S>& image) {
  const VitConfig& cfg = state.config;
  if (!cfg.use_class_token)
    throw ConfigError("attention_map: requires the class token");
  NoTapeScopeT<S> no_tape;

  TensorT<S> tokens = patchify(image, cfg.patch_size);
  std::vector<std::size_t> positions(cfg.n_tokens());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;

  AttnProbeT<S> probe;
  encoder_forward(cfg, state.encoder, state.enc_pos, tokens, positions,
                  static_cast<const std::vector<S>*>(nullptr), &probe);

  const std::size_t n = cfg.n_tokens();
  AttentionMapT<S> out;
  out.grid_side = cfg.grid_side();
  TensorT<S> mean = TensorT<S>::zeros({n});
  for (const TensorT<S>& attn : probe.last_block_attn) {
    // Class-token query row, class-token key dropped, renormalized over
    // the patch positions.
    TensorT<S> row = TensorT<S>::zeros({n});
    S total = S(0);
    for (std::size_t j = 0; j < n; ++j) {
      row.data()[j] = attn.at(0, 1 + j);
      total += row.data()[j];
    }
    for (std::size_t j = 0; j < n; ++j) row.data()[j] /= total;
    for (std::size_t j = 0; j < n; ++j)
      mean.data()[j] += row.data()[j] / static_cast<S>(cfg.num_heads);
    out.head_rows.push_back(std::move(row));
  }
  out.mean_row = std::move(mean);
  return out;
}

template <typename S>
void write_attention_pgm(const std::string& path, const TensorT<S>& row,
                         std::size_t grid_side) {
  if (row.size() != grid_side * grid_side)
    throw ShapeError("attention pgm: row length " + std::to_string(row.size()) +
                     " != grid " + std::to_string(grid_side) + "^2");
  S mx = S(0);
  for (S v : row.data()) mx = std::max(mx, v);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("attention pgm: cannot open '" + path + "'");
  os << "P5\n" << grid_side << " " << grid_side << "\n255\n";
  for (S v : row.data()) {
    const int g = mx > S(0)
                      ? static_cast<int>(std::lround(255.0 *
                                                     static_cast<double>(v) /
                                                     static_cast<double>(mx)))
                      : 0;
    os.put(static_cast<char>(g < 0 ? 0 : (g > 255 ? 255 : g)));
  }
  if (!os) throw FormatError("attention pgm: write failed for '" + path + "'");
}

#define SDAE_INSTANTIATE_VIT(S)                                                \
  template VitStateT<S> init_vit<S>(const VitConfig&, std::uint64_t);          \
  template void collect_encoder_params<S>(EncoderParamsT<S>&, bool,            \
                                          NamedParamsT<S>&);                   \
  template NamedParamsT<S> named_params<S>(VitStateT<S>&);                     \
  template VitStateT<S> clone_state<S>(const VitStateT<S>&);                   \
  template TensorT<S> patchify<S>(const TensorT<S>&, std::size_t);             \
  template TensorT<S> unpatchify<S>(const TensorT<S>&, std::size_t,            \
                                    std::size_t, std::size_t);                 \
  template TensorT<S> pos_embed_2d<S>(std::size_t, std::size_t);               \
  template TensorT<S> encoder_forward<S>(                                      \
      const VitConfig&, const EncoderParamsT<S>&, const TensorT<S>&,           \
      const TensorT<S>&, const std::vector<std::size_t>&,                      \
      const std::vector<S>*, AttnProbeT<S>*);                                  \
  template TensorT<S> decoder_forward<S>(const VitStateT<S>&,                  \
                                         const TensorT<S>&, const MaskPlan&);  \
  template AttentionMapT<S> attention_map<S>(const VitStateT<S>&,              \
                                             const TensorT<S>&);               \
  template void write_attention_pgm<S>(const std::string&, const TensorT<S>&,  \
                                       std::size_t);

SDAE_INSTANTIATE_VIT(float)
SDAE_INSTANTIATE_VIT(double)

}  // namespace sdae
