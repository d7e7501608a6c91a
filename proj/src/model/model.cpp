#include "tadc/model.hpp"

#include <algorithm>
#include <cmath>

#include "tadc/error.hpp"
#include "tadc/ops.hpp"
#include "tadc/rng.hpp"

namespace tadc {

void ModelConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
    if (image_size == 0 || channels == 0 || patch_size == 0) fail("sizes must be positive");
    if (image_size % patch_size != 0) {
        fail("image_size " + std::to_string(image_size) + " not divisible by patch_size " +
             std::to_string(patch_size));
    }
    if (encoder_heads == 0 || encoder_dim % encoder_heads != 0) fail("encoder_dim must divide into encoder_heads");
    if (decoder_heads == 0 || decoder_dim % decoder_heads != 0) fail("decoder_dim must divide into decoder_heads");
    if (encoder_dim % 4 != 0 || decoder_dim % 4 != 0) fail("embedding dims must be multiples of 4");
    if (mlp_ratio == 0) fail("mlp_ratio must be positive");
    if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) fail("mask_ratio must lie in (0,1)");
    const std::size_t masked = masked_count();
    if (masked == 0 || masked >= tokens()) {
        fail("mask_ratio " + std::to_string(mask_ratio) + " masks " + std::to_string(masked) + " of " +
             std::to_string(tokens()) + " tokens");
    }
}

std::size_t ModelConfig::masked_count() const {
    return static_cast<std::size_t>(std::floor(mask_ratio * static_cast<double>(tokens())));
}

std::vector<NamedParam> ModelParams::named() const {
    std::vector<NamedParam> out;
    auto lin = [&](const std::string& name, const LinearParams& l, ParamGroup g) {
        out.push_back({name + ".weight", l.weight, g, true});
        out.push_back({name + ".bias", l.bias, g, false});
    };
    auto norm = [&](const std::string& name, const NormParams& n, ParamGroup g) {
        out.push_back({name + ".gamma", n.gamma, g, false});
        out.push_back({name + ".beta", n.beta, g, false});
    };
    auto block = [&](const std::string& name, const BlockParams& b, ParamGroup g) {
        norm(name + ".norm1", b.norm1, g);
        lin(name + ".attn.qkv", b.qkv, g);
        lin(name + ".attn.proj", b.proj, g);
        norm(name + ".norm2", b.norm2, g);
        lin(name + ".mlp.fc1", b.fc1, g);
        lin(name + ".mlp.fc2", b.fc2, g);
    };
    lin("encoder.patch_embed", patch_embed, ParamGroup::Encoder);
    for (std::size_t i = 0; i < encoder_blocks.size(); ++i) {
        block("encoder.blocks." + std::to_string(i), encoder_blocks[i], ParamGroup::Encoder);
    }
    norm("encoder.norm", encoder_norm, ParamGroup::Encoder);
    lin("decoder.embed", decoder_embed, ParamGroup::Decoder);
    out.push_back({"decoder.mask_token", mask_token, ParamGroup::Decoder, false});
    for (std::size_t i = 0; i < decoder_blocks.size(); ++i) {
        block("decoder.blocks." + std::to_string(i), decoder_blocks[i], ParamGroup::Decoder);
    }
    norm("decoder.norm", decoder_norm, ParamGroup::Decoder);
    lin("head.reconstruct", head_reconstruct, ParamGroup::Heads);
    lin("head.classify", head_classify, ParamGroup::Heads);
    return out;
}

Tensor sincos_pos_embed_2d(std::size_t dim, std::size_t grid) {
    if (dim % 4 != 0) throw ConfigError("position embedding dim must be a multiple of 4");
    const std::size_t quarter = dim / 4;
    std::vector<float> table(grid * grid * dim);
    // First half encodes the column index, second half the row index; each
    // half is [sin(pos*omega), cos(pos*omega)].
    for (std::size_t r = 0; r < grid; ++r) {
        for (std::size_t c = 0; c < grid; ++c) {
            float* row = table.data() + (r * grid + c) * dim;
            const double coords[2] = {static_cast<double>(c), static_cast<double>(r)};
            for (std::size_t half = 0; half < 2; ++half) {
                float* dst = row + half * (dim / 2);
                for (std::size_t k = 0; k < quarter; ++k) {
                    const double omega =
                        1.0 / std::pow(10000.0, static_cast<double>(k) / static_cast<double>(quarter));
                    const double angle = coords[half] * omega;
                    dst[k] = static_cast<float>(std::sin(angle));
                    dst[quarter + k] = static_cast<float>(std::cos(angle));
                }
            }
        }
    }
    return Tensor::from({grid * grid, dim}, std::move(table));
}

namespace {

Tensor trunc_normal(Shape shape, Rng& rng, double stddev = 0.02) {
    std::vector<float> v(numel(shape));
    for (float& x : v) {
        double z = rng.normal();
        while (std::abs(z) > 2.0) z = rng.normal();
        x = static_cast<float>(z * stddev);
    }
    return Tensor::from(std::move(shape), std::move(v));
}

LinearParams make_linear(std::size_t in, std::size_t out, Rng& rng) {
    return {trunc_normal({in, out}, rng), Tensor::zeros({out})};
}

NormParams make_norm(std::size_t d) { return {Tensor::full({d}, 1.0f), Tensor::zeros({d})}; }

BlockParams make_block(std::size_t dim, std::size_t mlp_ratio, Rng& rng) {
    BlockParams b;
    b.norm1 = make_norm(dim);
    b.qkv = make_linear(dim, 3 * dim, rng);
    b.proj = make_linear(dim, dim, rng);
    b.norm2 = make_norm(dim);
    b.fc1 = make_linear(dim, dim * mlp_ratio, rng);
    b.fc2 = make_linear(dim * mlp_ratio, dim, rng);
    return b;
}

}  // namespace

Model Model::create(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(derive_seed(seed, 0x1417));
    Model m;
    m.config = config;
    ModelParams& p = m.params;
    p.patch_embed = make_linear(config.patch_dim(), config.encoder_dim, rng);
    for (std::size_t i = 0; i < config.encoder_depth; ++i) {
        p.encoder_blocks.push_back(make_block(config.encoder_dim, config.mlp_ratio, rng));
    }
    p.encoder_norm = make_norm(config.encoder_dim);
    p.decoder_embed = make_linear(config.encoder_dim, config.decoder_dim, rng);
    p.mask_token = trunc_normal({config.decoder_dim}, rng);
    for (std::size_t i = 0; i < config.decoder_depth; ++i) {
        p.decoder_blocks.push_back(make_block(config.decoder_dim, config.mlp_ratio, rng));
    }
    p.decoder_norm = make_norm(config.decoder_dim);
    const std::size_t pp = config.patch_size * config.patch_size;
    p.head_reconstruct = make_linear(config.decoder_dim, pp * config.channels, rng);
    p.head_classify = make_linear(config.decoder_dim, pp, rng);
    m.encoder_pos = sincos_pos_embed_2d(config.encoder_dim, config.grid());
    m.decoder_pos = sincos_pos_embed_2d(config.decoder_dim, config.grid());
    for (auto& np : p.named()) np.tensor.set_requires_grad(true);
    return m;
}

Model Model::clone() const {
    Model m = Model::create(config, 0);
    const std::vector<NamedParam> src = params.named();
    std::vector<NamedParam> dst = m.params.named();
    for (std::size_t i = 0; i < src.size(); ++i) {
        std::copy(src[i].tensor.data().begin(), src[i].tensor.data().end(), dst[i].tensor.mutable_data().begin());
        dst[i].tensor.set_requires_grad(src[i].tensor.requires_grad());
    }
    return m;
}

void Model::set_trainable(ParamGroup group, bool trainable) {
    for (auto& np : params.named()) {
        if (np.group == group) np.tensor.set_requires_grad(trainable);
    }
}

std::vector<Tensor> Model::parameters(ParamGroup group) const {
    std::vector<Tensor> out;
    for (auto& np : params.named()) {
        if (np.group == group) out.push_back(np.tensor);
    }
    return out;
}

Tensor patchify(const Tensor& images, std::size_t p) {
    Tensor x = images;
    if (x.rank() == 3) x = ops::reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
    if (x.rank() != 4) throw DimensionError("patchify: expected [C,H,W] or [B,C,H,W], got " + to_string(images.shape()));
    const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (p == 0 || h % p != 0 || w % p != 0) {
        throw ConfigError("patchify: image " + std::to_string(h) + "x" + std::to_string(w) +
                          " not divisible by patch size " + std::to_string(p));
    }
    const std::size_t gh = h / p, gw = w / p;
    Tensor t = ops::reshape(x, {b, c, gh, p, gw, p});
    t = ops::permute(t, {0, 2, 4, 3, 5, 1});  // [b, gh, gw, p, p, c]
    return ops::reshape(t, {b * gh * gw, p * p * c});
}

Tensor unpatchify(const Tensor& patches, std::size_t p, std::size_t c, std::size_t h, std::size_t w) {
    if (p == 0 || h % p != 0 || w % p != 0) {
        throw ConfigError("unpatchify: image " + std::to_string(h) + "x" + std::to_string(w) +
                          " not divisible by patch size " + std::to_string(p));
    }
    const std::size_t gh = h / p, gw = w / p;
    if (patches.rank() != 2 || patches.dim(1) != p * p * c || patches.dim(0) % (gh * gw) != 0) {
        throw DimensionError("unpatchify: patches " + to_string(patches.shape()) + " do not tile a " +
                             std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w) + " image");
    }
    const std::size_t b = patches.dim(0) / (gh * gw);
    Tensor t = ops::reshape(patches, {b, gh, gw, p, p, c});
    t = ops::permute(t, {0, 5, 1, 3, 2, 4});  // [b, c, gh, p, gw, p]
    return ops::reshape(t, {b, c, h, w});
}

PositionSets all_positions(std::size_t batch, std::size_t tokens) {
    std::vector<std::size_t> all(tokens);
    for (std::size_t i = 0; i < tokens; ++i) all[i] = i;
    return PositionSets(batch, all);
}

namespace {

// Validates the position sets and returns the common per-sample length.
std::size_t check_positions(const PositionSets& positions, std::size_t tokens) {
    if (positions.empty()) throw DimensionError("empty batch");
    const std::size_t len = positions.front().size();
    if (len == 0) throw DimensionError("at least one visible token is required");
    std::vector<bool> seen(tokens);
    for (const auto& set : positions) {
        if (set.size() != len) throw DimensionError("all samples must have the same number of visible tokens");
        std::fill(seen.begin(), seen.end(), false);
        for (std::size_t pos : set) {
            if (pos >= tokens) {
                throw IndexError("token position " + std::to_string(pos) + " out of range for " +
                                 std::to_string(tokens) + " tokens");
            }
            if (seen[pos]) throw IndexError("duplicate token position " + std::to_string(pos));
            seen[pos] = true;
        }
    }
    return len;
}

Tensor positional_rows(const Tensor& table, const PositionSets& positions) {
    std::vector<std::size_t> rows;
    for (const auto& set : positions) rows.insert(rows.end(), set.begin(), set.end());
    return ops::gather_rows(table, rows);
}

Tensor attention(const BlockParams& b, const Tensor& x, std::size_t batch, std::size_t len,
                 std::size_t heads) {
    const std::size_t dim = x.dim(1);
    const std::size_t hd = dim / heads;
    const std::size_t groups = batch * heads;
    Tensor qkv = ops::linear(x, b.qkv.weight, b.qkv.bias);
    qkv = ops::reshape(qkv, {batch, len, 3, heads, hd});
    qkv = ops::permute(qkv, {2, 0, 3, 1, 4});  // [3, B, H, L, hd]
    qkv = ops::reshape(qkv, {3 * groups, len, hd});
    const Tensor q = ops::slice_rows(qkv, 0, groups);
    const Tensor k = ops::slice_rows(qkv, groups, 2 * groups);
    const Tensor v = ops::slice_rows(qkv, 2 * groups, 3 * groups);
    Tensor scores = ops::scale(ops::bmm(q, k, true), 1.0f / std::sqrt(static_cast<float>(hd)));
    Tensor attn = ops::softmax(scores, 2);
    Tensor out = ops::bmm(attn, v);  // [B*H, L, hd]
    out = ops::reshape(out, {batch, heads, len, hd});
    out = ops::permute(out, {0, 2, 1, 3});
    out = ops::reshape(out, {batch * len, dim});
    return ops::linear(out, b.proj.weight, b.proj.bias);
}

Tensor block_forward(const BlockParams& b, const Tensor& x, std::size_t batch, std::size_t len,
                     std::size_t heads) {
    Tensor h = ops::layernorm(x, b.norm1.gamma, b.norm1.beta);
    Tensor y = ops::add(x, attention(b, h, batch, len, heads));
    Tensor m = ops::layernorm(y, b.norm2.gamma, b.norm2.beta);
    m = ops::linear(ops::gelu(ops::linear(m, b.fc1.weight, b.fc1.bias)), b.fc2.weight, b.fc2.bias);
    return ops::add(y, m);
}

}  // namespace

Tensor encode(const Model& model, const Tensor& visible_patches, const PositionSets& positions) {
    const ModelConfig& cfg = model.config;
    const std::size_t len = check_positions(positions, cfg.tokens());
    const std::size_t batch = positions.size();
    if (visible_patches.rank() != 2 || visible_patches.dim(0) != batch * len ||
        visible_patches.dim(1) != cfg.patch_dim()) {
        throw DimensionError("encode: patches " + to_string(visible_patches.shape()) + " do not match " +
                             std::to_string(batch) + " samples x " + std::to_string(len) + " positions of width " +
                             std::to_string(cfg.patch_dim()));
    }
    const ModelParams& p = model.params;
    Tensor x = ops::linear(visible_patches, p.patch_embed.weight, p.patch_embed.bias);
    x = ops::add(x, positional_rows(model.encoder_pos, positions));
    for (const auto& blk : p.encoder_blocks) x = block_forward(blk, x, batch, len, cfg.encoder_heads);
    return ops::layernorm(x, p.encoder_norm.gamma, p.encoder_norm.beta);
}

Tensor decode(const Model& model, const Tensor& encoded, const PositionSets& positions) {
    const ModelConfig& cfg = model.config;
    const std::size_t n = cfg.tokens();
    const std::size_t len = check_positions(positions, n);
    const std::size_t batch = positions.size();
    if (encoded.rank() != 2 || encoded.dim(0) != batch * len || encoded.dim(1) != cfg.encoder_dim) {
        throw DimensionError("decode: encoded " + to_string(encoded.shape()) + " does not match " +
                             std::to_string(batch) + " samples x " + std::to_string(len) + " tokens");
    }
    const ModelParams& p = model.params;
    Tensor y = ops::linear(encoded, p.decoder_embed.weight, p.decoder_embed.bias);
    std::vector<std::size_t> visible_rows, masked_rows;
    std::vector<bool> is_visible(n);
    for (std::size_t s = 0; s < batch; ++s) {
        std::fill(is_visible.begin(), is_visible.end(), false);
        for (std::size_t pos : positions[s]) {
            visible_rows.push_back(s * n + pos);
            is_visible[pos] = true;
        }
        for (std::size_t pos = 0; pos < n; ++pos) {
            if (!is_visible[pos]) masked_rows.push_back(s * n + pos);
        }
    }
    Tensor x = ops::scatter_rows(y, visible_rows, batch * n);
    if (!masked_rows.empty()) {
        x = ops::add(x, ops::scatter_rows(ops::repeat_row(p.mask_token, masked_rows.size()), masked_rows, batch * n));
    }
    x = ops::add(x, positional_rows(model.decoder_pos, all_positions(batch, n)));
    for (const auto& blk : p.decoder_blocks) x = block_forward(blk, x, batch, n, cfg.decoder_heads);
    return ops::layernorm(x, p.decoder_norm.gamma, p.decoder_norm.beta);
}

Tensor head_reconstruct(const Model& model, const Tensor& decoded) {
    const ModelConfig& cfg = model.config;
    const LinearParams& h = model.params.head_reconstruct;
    Tensor patches = ops::linear(decoded, h.weight, h.bias);
    return unpatchify(patches, cfg.patch_size, cfg.channels, cfg.image_size, cfg.image_size);
}

Tensor head_classify_logits(const Model& model, const Tensor& decoded) {
    const ModelConfig& cfg = model.config;
    const LinearParams& h = model.params.head_classify;
    Tensor logits = ops::linear(decoded, h.weight, h.bias);
    Tensor img = unpatchify(logits, cfg.patch_size, 1, cfg.image_size, cfg.image_size);
    return ops::reshape(img, {img.dim(0), cfg.image_size, cfg.image_size});
}

Tensor head_classify(const Model& model, const Tensor& decoded) {
    return ops::sigmoid(head_classify_logits(model, decoded));
}

Tensor forward_full(const Model& model, const Tensor& images) {
    const std::size_t batch = images.rank() == 4 ? images.dim(0) : 1;
    const Tensor patches = patchify(images, model.config.patch_size);
    const PositionSets positions = all_positions(batch, model.config.tokens());
    return decode(model, encode(model, patches, positions), positions);
}

}  // namespace tadc
