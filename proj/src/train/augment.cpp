#include "tadc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tadc/error.hpp"

namespace tadc {

namespace {

struct OpName {
    CorruptionOp op;
    const char* name;
};

constexpr OpName kOpNames[] = {
    {CorruptionOp::GaussianNoise, "gaussian_noise"}, {CorruptionOp::ChannelShuffle, "channel_shuffle"},
    {CorruptionOp::ChannelShift, "channel_shift"},   {CorruptionOp::FlipH, "flip_h"},
    {CorruptionOp::FlipV, "flip_v"},                 {CorruptionOp::Rotate90, "rotate90"},
    {CorruptionOp::Rotate180, "rotate180"},
};

}  // namespace

std::string to_string(CorruptionOp op) {
    for (const auto& entry : kOpNames) {
        if (entry.op == op) return entry.name;
    }
    return "unknown";
}

CorruptionOp parse_corruption_op(const std::string& name) {
    for (const auto& entry : kOpNames) {
        if (name == entry.name) return entry.op;
    }
    throw ConfigError("unknown corruption op '" + name + "'");
}

void CorruptionConfig::validate() const {
    auto prob = [](double p, const char* what) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0,1]");
    };
    prob(corrupt_probability, "corrupt_probability");
    prob(multi_op_probability, "multi_op_probability");
    if (min_blocks == 0 || min_blocks > max_blocks) throw ConfigError("block count range must satisfy 1 <= min <= max");
    if (!(min_side_fraction > 0.0 && min_side_fraction <= max_side_fraction && max_side_fraction <= 1.0)) {
        throw ConfigError("block side fractions must satisfy 0 < lo <= hi <= 1");
    }
    if (ops.empty()) throw ConfigError("corruption op set is empty");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be non-negative");
    if (!(min_shift >= 0.0 && min_shift <= max_shift)) throw ConfigError("shift range must satisfy 0 <= lo <= hi");
}

namespace {

void flip_h(Image& im, const Block& b) {
    for (std::size_t c = 0; c < im.channels; ++c) {
        for (std::size_t y = b.y; y < b.y + b.height; ++y) {
            float* row = &im.at(c, y, b.x);
            std::reverse(row, row + b.width);
        }
    }
}

void flip_v(Image& im, const Block& b) {
    for (std::size_t c = 0; c < im.channels; ++c) {
        for (std::size_t i = 0; i < b.height / 2; ++i) {
            float* top = &im.at(c, b.y + i, b.x);
            float* bottom = &im.at(c, b.y + b.height - 1 - i, b.x);
            std::swap_ranges(top, top + b.width, bottom);
        }
    }
}

// Clockwise quarter turn of a square block.
void rotate90(Image& im, const Block& b) {
    const std::size_t s = b.height;
    std::vector<float> tmp(s * s);
    for (std::size_t c = 0; c < im.channels; ++c) {
        for (std::size_t y = 0; y < s; ++y) {
            for (std::size_t x = 0; x < s; ++x) tmp[x * s + (s - 1 - y)] = im.at(c, b.y + y, b.x + x);
        }
        for (std::size_t y = 0; y < s; ++y) {
            for (std::size_t x = 0; x < s; ++x) im.at(c, b.y + y, b.x + x) = tmp[y * s + x];
        }
    }
}

void channel_shuffle(Image& im, const Block& b, Rng& rng) {
    if (im.channels < 2) return;
    std::vector<std::size_t> perm(im.channels);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    if (std::is_sorted(perm.begin(), perm.end())) std::rotate(perm.begin(), perm.begin() + 1, perm.end());
    std::vector<float> src(im.channels);
    for (std::size_t y = b.y; y < b.y + b.height; ++y) {
        for (std::size_t x = b.x; x < b.x + b.width; ++x) {
            for (std::size_t c = 0; c < im.channels; ++c) src[c] = im.at(c, y, x);
            for (std::size_t c = 0; c < im.channels; ++c) im.at(c, y, x) = src[perm[c]];
        }
    }
}

void channel_shift(Image& im, const Block& b, const CorruptionConfig& cfg, Rng& rng) {
    for (std::size_t c = 0; c < im.channels; ++c) {
        const double magnitude = rng.uniform(cfg.min_shift, cfg.max_shift);
        const float shift = static_cast<float>(rng.bernoulli(0.5) ? magnitude : -magnitude);
        for (std::size_t y = b.y; y < b.y + b.height; ++y) {
            for (std::size_t x = b.x; x < b.x + b.width; ++x) {
                float& v = im.at(c, y, x);
                v = std::clamp(v + shift, 0.0f, 1.0f);
            }
        }
    }
}

void gaussian_noise(Image& im, const Block& b, const CorruptionConfig& cfg, Rng& rng) {
    for (std::size_t c = 0; c < im.channels; ++c) {
        for (std::size_t y = b.y; y < b.y + b.height; ++y) {
            for (std::size_t x = b.x; x < b.x + b.width; ++x) {
                float& v = im.at(c, y, x);
                v = std::clamp(v + static_cast<float>(rng.normal(0.0, cfg.noise_sigma)), 0.0f, 1.0f);
            }
        }
    }
}

std::size_t draw_side(std::size_t side, const CorruptionConfig& cfg, Rng& rng) {
    const double f = rng.uniform(cfg.min_side_fraction, cfg.max_side_fraction);
    const auto len = static_cast<std::size_t>(std::lround(f * static_cast<double>(side)));
    return std::clamp<std::size_t>(len, 1, side);
}

}  // namespace

void apply_op(Image& image, const Block& block, CorruptionOp op, const CorruptionConfig& config, Rng& rng) {
    if (block.height == 0 || block.width == 0 || block.y + block.height > image.height ||
        block.x + block.width > image.width) {
        throw IndexError("apply_op: block outside the image");
    }
    switch (op) {
        case CorruptionOp::GaussianNoise: gaussian_noise(image, block, config, rng); break;
        case CorruptionOp::ChannelShuffle: channel_shuffle(image, block, rng); break;
        case CorruptionOp::ChannelShift: channel_shift(image, block, config, rng); break;
        case CorruptionOp::FlipH: flip_h(image, block); break;
        case CorruptionOp::FlipV: flip_v(image, block); break;
        case CorruptionOp::Rotate90:
            if (block.height == block.width) {
                rotate90(image, block);
            } else {
                flip_h(image, block);
                flip_v(image, block);
            }
            break;
        case CorruptionOp::Rotate180:
            flip_h(image, block);
            flip_v(image, block);
            break;
    }
}

AugmentedSample clean_sample(const Image& image) {
    return AugmentedSample{image, image, Image(1, image.height, image.width, 0.0f)};
}

AugmentedSample corrupt_forced(const Image& image, const CorruptionConfig& config, Rng& rng) {
    config.validate();
    AugmentedSample s = clean_sample(image);
    const auto count = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(config.min_blocks), static_cast<std::int64_t>(config.max_blocks)));
    for (std::size_t k = 0; k < count; ++k) {
        Block b;
        b.height = draw_side(image.height, config, rng);
        b.width = draw_side(image.width, config, rng);
        b.y = static_cast<std::size_t>(rng.bounded(image.height - b.height + 1));
        b.x = static_cast<std::size_t>(rng.bounded(image.width - b.width + 1));
        const std::size_t n_ops = rng.bernoulli(config.multi_op_probability) ? 2 : 1;
        for (std::size_t i = 0; i < n_ops; ++i) {
            apply_op(s.corrupted, b, config.ops[rng.bounded(config.ops.size())], config, rng);
        }
        for (std::size_t y = b.y; y < b.y + b.height; ++y) {
            for (std::size_t x = b.x; x < b.x + b.width; ++x) s.label.at(0, y, x) = 1.0f;
        }
    }
    return s;
}

AugmentedSample corrupt(const Image& image, const CorruptionConfig& config, Rng& rng) {
    config.validate();
    if (!rng.bernoulli(config.corrupt_probability)) return clean_sample(image);
    return corrupt_forced(image, config, rng);
}

std::vector<AugmentedSample> make_epoch_stream(std::span<const Image> dataset, const CorruptionConfig& config,
                                               std::size_t epoch_index, std::uint64_t base_seed) {
    if (dataset.empty()) throw ConfigError("make_epoch_stream: empty dataset");
    config.validate();
    const std::size_t n = dataset.size();
    const auto k = static_cast<std::size_t>(std::llround(config.corrupt_probability * static_cast<double>(n)));

    Rng epoch_rng(derive_seed(base_seed, 0xE90C, epoch_index));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    epoch_rng.shuffle(order);
    std::vector<bool> selected(n, false);
    for (std::size_t i = 0; i < k; ++i) selected[order[i]] = true;

    std::vector<AugmentedSample> stream;
    stream.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (selected[i]) {
            Rng sample_rng(derive_seed(base_seed, 0xB10C, epoch_index, i));
            stream.push_back(corrupt_forced(dataset[i], config, sample_rng));
        } else {
            stream.push_back(clean_sample(dataset[i]));
        }
    }
    epoch_rng.shuffle(stream);
    return stream;
}

}  // namespace tadc
