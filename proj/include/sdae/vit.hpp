#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdae/masking.hpp"
#include "sdae/params.hpp"
#include "sdae/tensor.hpp"

namespace sdae {

struct VitConfig {
  std::size_t image_size = 32;
  std::size_t patch_size = 4;
  std::size_t channels = 3;
  std::size_t encoder_depth = 4;
  std::size_t decoder_depth = 2;
  std::size_t embed_dim = 64;
  std::size_t decoder_dim = 48;
  std::size_t num_heads = 4;
  std::size_t decoder_num_heads = 4;
  double mlp_ratio = 4.0;
  double drop_path_rate = 0.0;  // encoder blocks only
  bool use_class_token = true;
  // Alternative decoder feeding: mask tokens only, no visible latents.
  bool decoder_masked_only = false;

  std::size_t grid_side() const { return image_size / patch_size; }
  std::size_t n_tokens() const { return grid_side() * grid_side(); }
  std::size_t token_dim() const {
    return patch_size * patch_size * channels;
  }
  void validate() const;
};

template <typename S>
struct BlockParamsT {
  TensorT<S> norm1_gain, norm1_bias;
  TensorT<S> qkv_weight, qkv_bias;    // [D x 3D], [3D]
  TensorT<S> proj_weight, proj_bias;  // [D x D], [D]
  TensorT<S> norm2_gain, norm2_bias;
  TensorT<S> fc1_weight, fc1_bias;    // [D x hidden]
  TensorT<S> fc2_weight, fc2_bias;    // [hidden x D]
};

template <typename S>
struct EncoderParamsT {
  TensorT<S> patch_weight, patch_bias;  // [P^2*C x D], [D]
  TensorT<S> class_token;               // [1 x D] when enabled
  std::vector<BlockParamsT<S>> blocks;
  TensorT<S> norm_gain, norm_bias;
};

template <typename S>
struct DecoderParamsT {
  TensorT<S> embed_weight, embed_bias;  // [D x Dd], [Dd]
  TensorT<S> mask_token;                // [1 x Dd]
  std::vector<BlockParamsT<S>> blocks;
  TensorT<S> norm_gain, norm_bias;
  TensorT<S> head_weight, head_bias;    // [Dd x D], [D]
};

// Student model: parameters plus the fixed sinusoidal position tables
// (the tables are buffers, not parameters).
template <typename S>
struct VitStateT {
  VitConfig config;
  EncoderParamsT<S> encoder;
  DecoderParamsT<S> decoder;
  TensorT<S> enc_pos;  // [N x D]
  TensorT<S> dec_pos;  // [N x Dd]
};

using VitState = VitStateT<float>;

// Truncated-normal(0.02) weights, zero biases, unit layernorm gains.
template <typename S>
VitStateT<S> init_vit(const VitConfig& cfg, std::uint64_t seed);

// Canonical parameter names ("encoder.block0.attn.qkv.weight", ...). The
// returned handles share storage with the state.
template <typename S>
void collect_encoder_params(EncoderParamsT<S>& enc, bool use_class_token,
                            NamedParamsT<S>& out);
template <typename S>
NamedParamsT<S> named_params(VitStateT<S>& state);

// Deep copy with fresh storage.
template <typename S>
VitStateT<S> clone_state(const VitStateT<S>& state);

// image [H x W x C] (row-major) -> tokens [N x P^2*C]; patches ordered
// row-major over the grid, each patch flattened row-major. Lossless.
template <typename S>
TensorT<S> patchify(const TensorT<S>& image, std::size_t patch_size);
template <typename S>
TensorT<S> unpatchify(const TensorT<S>& tokens, std::size_t image_size,
                      std::size_t channels, std::size_t patch_size);

// Fixed 2-D sinusoidal table [grid^2 x dim]; dim must be divisible by 4
// (sin/cos per axis). Layout per row: [sin_r | cos_r | sin_c | cos_c].
template <typename S>
TensorT<S> pos_embed_2d(std::size_t grid_side, std::size_t dim);

// Per-head class-token attention rows of the last encoder block, captured
// when a probe is passed to encoder_forward.
template <typename S>
struct AttnProbeT {
  std::vector<TensorT<S>> last_block_attn;  // num_heads x [rows x rows]
};

// Visible tokens only. positions are distinct token indices; output has one
// row per token plus a leading class-token row when enabled.
// drop_path_scale holds one residual-branch multiplier per encoder block
// (nullptr = all ones).
template <typename S>
TensorT<S> encoder_forward(const VitConfig& cfg, const EncoderParamsT<S>& enc,
                           const TensorT<S>& enc_pos, const TensorT<S>& tokens,
                           const std::vector<std::size_t>& positions,
                           const std::vector<S>* drop_path_scale = nullptr,
                           AttnProbeT<S>* probe = nullptr);

// Projects encoder latents to decoder width, inserts the shared mask token
// at masked positions, runs the decoder and returns head outputs at masked
// positions (in masked_idx order), [|masked| x embed_dim].
template <typename S>
TensorT<S> decoder_forward(const VitStateT<S>& state,
                           const TensorT<S>& encoder_latents,
                           const MaskPlan& plan);

template <typename S>
struct AttentionMapT {
  std::vector<TensorT<S>> head_rows;  // num_heads x [N], each sums to 1
  TensorT<S> mean_row;                // [N]
  std::size_t grid_side = 0;
};

using AttentionMap = AttentionMapT<float>;

// Class-token-query attention of the last encoder block over the full
// image, per head plus the head mean, renormalized over patch positions.
template <typename S>
AttentionMapT<S> attention_map(const VitStateT<S>& state,
                               const TensorT<S>& image);

// 8-bit binary PGM, one gray value per patch cell, scaled so the largest
// attention weight maps to 255.
template <typename S>
void write_attention_pgm(const std::string& path, const TensorT<S>& row,
                         std::size_t grid_side);

}  // namespace sdae
