#pragma once

// ViT encoder, transformer-block decoder and the two per-token output heads
// (image reconstruction and pixel classification).
//
// All forward functions work on a batch. Token tensors are [B*L, D] with the
// L tokens of each sample contiguous; images are [B, C, H, W].

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tadc/tensor.hpp"

namespace tadc {

struct ModelConfig {
    std::size_t image_size = 64;
    std::size_t channels = 3;
    std::size_t patch_size = 8;
    std::size_t encoder_dim = 128;
    std::size_t encoder_depth = 4;
    std::size_t encoder_heads = 4;
    std::size_t decoder_dim = 64;
    std::size_t decoder_depth = 2;
    std::size_t decoder_heads = 4;
    std::size_t mlp_ratio = 4;
    double mask_ratio = 0.75;

    /// Throws ConfigError when any structural invariant fails.
    void validate() const;

    std::size_t grid() const { return image_size / patch_size; }
    std::size_t tokens() const { return grid() * grid(); }
    std::size_t patch_dim() const { return patch_size * patch_size * channels; }
    std::size_t masked_count() const;

    bool operator==(const ModelConfig&) const = default;
};

struct LinearParams {
    Tensor weight;  // [in, out]
    Tensor bias;    // [out]
};

struct NormParams {
    Tensor gamma;
    Tensor beta;
};

struct BlockParams {
    NormParams norm1;
    LinearParams qkv;
    LinearParams proj;
    NormParams norm2;
    LinearParams fc1;
    LinearParams fc2;
};

enum class ParamGroup { Encoder, Decoder, Heads };

struct NamedParam {
    std::string name;
    Tensor tensor;
    ParamGroup group;
    bool decay;  // receives weight decay (matrices only)
};

struct ModelParams {
    LinearParams patch_embed;
    std::vector<BlockParams> encoder_blocks;
    NormParams encoder_norm;

    LinearParams decoder_embed;
    Tensor mask_token;
    std::vector<BlockParams> decoder_blocks;
    NormParams decoder_norm;

    LinearParams head_reconstruct;  // decoder_dim -> p*p*C
    LinearParams head_classify;     // decoder_dim -> p*p

    /// Every parameter with a stable dotted name, in a fixed order.
    std::vector<NamedParam> named() const;
};

/// Fixed 2-D sine-cosine position table [grid*grid, dim]; dim must be a multiple of 4.
Tensor sincos_pos_embed_2d(std::size_t dim, std::size_t grid);

struct Model {
    ModelConfig config;
    ModelParams params;
    Tensor encoder_pos;  // [n, encoder_dim], constant
    Tensor decoder_pos;  // [n, decoder_dim], constant

    /// Truncated-normal(0.02) projections, zero biases, unit norm scales.
    static Model create(const ModelConfig& config, std::uint64_t seed);

    /// Deep copy with independent parameter storage.
    Model clone() const;

    /// Marks a parameter group trainable (or frozen).
    void set_trainable(ParamGroup group, bool trainable);
    std::vector<Tensor> parameters(ParamGroup group) const;
};

/// [C,H,W] -> [n, p*p*C] or [B,C,H,W] -> [B*n, p*p*C]; patch rows in raster
/// order, each flattened as (row, col, channel).
Tensor patchify(const Tensor& images, std::size_t patch_size);
/// Inverse of patchify; returns [B, channels, H, W].
Tensor unpatchify(const Tensor& patches, std::size_t patch_size, std::size_t channels,
                  std::size_t height, std::size_t width);

/// Per-sample token positions; every sample has the same count.
using PositionSets = std::vector<std::vector<std::size_t>>;

/// All n positions for each of `batch` samples.
PositionSets all_positions(std::size_t batch, std::size_t tokens);

/// Encodes the visible patches [B*v, p*p*C] at the given positions -> [B*v, encoder_dim].
Tensor encode(const Model& model, const Tensor& visible_patches, const PositionSets& positions);

/// Embeds encoder output, fills every other position with the mask token and
/// runs the decoder blocks -> [B*n, decoder_dim] in raster order.
Tensor decode(const Model& model, const Tensor& encoded, const PositionSets& positions);

/// Per-token linear map to p*p*C values, reassembled into [B, C, H, W].
Tensor head_reconstruct(const Model& model, const Tensor& decoded);
/// Per-pixel logits [B, H, W].
Tensor head_classify_logits(const Model& model, const Tensor& decoded);
/// sigmoid(head_classify_logits): pixel anomaly probabilities in [0,1].
Tensor head_classify(const Model& model, const Tensor& decoded);

/// Unmasked encode + decode of whole images [B, C, H, W] -> [B*n, decoder_dim].
Tensor forward_full(const Model& model, const Tensor& images);

}  // namespace tadc
