#include "tadc/score.hpp"

#include <algorithm>
#include <cmath>

#include "tadc/error.hpp"
#include "tadc/losses.hpp"
#include "tadc/mae.hpp"
#include "tadc/ops.hpp"
#include "tadc/parallel.hpp"
#include "tadc/rng.hpp"

namespace tadc {

std::string to_string(ScoreMode mode) {
    switch (mode) {
        case ScoreMode::Fusion: return "fusion";
        case ScoreMode::EOnly: return "e";
        case ScoreMode::POnly: return "p";
        case ScoreMode::MaskedE: return "masked_e";
    }
    return "unknown";
}

ScoreMode parse_score_mode(const std::string& name) {
    if (name == "fusion") return ScoreMode::Fusion;
    if (name == "e") return ScoreMode::EOnly;
    if (name == "p") return ScoreMode::POnly;
    if (name == "masked_e") return ScoreMode::MaskedE;
    throw ConfigError("unknown score mode '" + name + "'");
}

std::string to_string(Pooling pooling) { return pooling == Pooling::Mean ? "mean" : "max"; }

Pooling parse_pooling(const std::string& name) {
    if (name == "mean") return Pooling::Mean;
    if (name == "max") return Pooling::Max;
    throw ConfigError("unknown pooling '" + name + "'");
}

Image reconstruction_error(const Image& original, const Image& recon) {
    if (original.channels != recon.channels || original.height != recon.height || original.width != recon.width) {
        throw DimensionError("reconstruction_error: image sizes differ");
    }
    Image E(1, original.height, original.width);
    const std::size_t plane = original.plane();
    for (std::size_t i = 0; i < plane; ++i) {
        float acc = 0.0f;
        for (std::size_t c = 0; c < original.channels; ++c) {
            const float d = original.data[c * plane + i] - recon.data[c * plane + i];
            acc += d * d;
        }
        E.data[i] = acc / static_cast<float>(original.channels);
    }
    return E;
}

Image fuse(const Image& E, const Image& P) {
    if (E.channels != P.channels || E.height != P.height || E.width != P.width) {
        throw DimensionError("fuse: map sizes differ");
    }
    Image S = E;
    for (std::size_t i = 0; i < S.data.size(); ++i) S.data[i] = E.data[i] * P.data[i];
    return S;
}

double image_score(const Image& S, Pooling pooling) {
    if (S.data.empty()) throw DimensionError("image_score: empty map");
    if (pooling == Pooling::Max) return *std::max_element(S.data.begin(), S.data.end());
    double acc = 0.0;
    for (float v : S.data) acc += v;
    return acc / static_cast<double>(S.data.size());
}

namespace {

Image smooth(const Image& map, double sigma) {
    auto window = static_cast<std::size_t>(2 * std::ceil(3.0 * sigma) + 1);
    const std::size_t side = std::min(map.height, map.width);
    if (window > side) window = side % 2 == 1 ? side : side - 1;
    const Tensor blurred = ops::blur2d(Tensor::from({1, map.height, map.width}, map.data), gaussian_window(window, sigma));
    Image out(1, map.height, map.width);
    std::copy(blurred.data().begin(), blurred.data().end(), out.data.begin());
    return out;
}

void min_max_normalize(Image& map) {
    const auto [lo, hi] = std::minmax_element(map.data.begin(), map.data.end());
    const float mn = *lo, mx = *hi;
    if (!(mx > mn)) {
        std::fill(map.data.begin(), map.data.end(), 0.0f);
        return;
    }
    for (float& v : map.data) v = (v - mn) / (mx - mn);
}

Image masked_error(const Model& model, const Image& image, const ScoreOptions& options) {
    const ModelConfig& mc = model.config;
    const std::size_t n = mc.tokens(), p = mc.patch_size, g = mc.grid();
    const Tensor patches = patchify(to_tensor(image), p);
    std::vector<double> sum(image.plane(), 0.0), all(image.plane(), 0.0);
    std::vector<std::size_t> count(image.plane(), 0);
    for (std::size_t k = 0; k < options.mask_draws; ++k) {
        Rng rng(derive_seed(options.seed, 0x3A5C, k));
        const MaskPlan plan = sample_mask(n, mc.mask_ratio, rng);
        const PositionSets visible{plan.visible};
        const Tensor encoded = encode(model, ops::gather_rows(patches, plan.visible), visible);
        const Tensor recon = head_reconstruct(model, decode(model, encoded, visible));
        const Image E = reconstruction_error(image, image_from_tensor(recon));
        std::vector<bool> masked(n, false);
        for (std::size_t idx : plan.masked) masked[idx] = true;
        for (std::size_t y = 0; y < image.height; ++y) {
            for (std::size_t x = 0; x < image.width; ++x) {
                const std::size_t i = y * image.width + x;
                all[i] += E.data[i];
                if (masked[(y / p) * g + x / p]) {
                    sum[i] += E.data[i];
                    ++count[i];
                }
            }
        }
    }
    Image E(1, image.height, image.width);
    for (std::size_t i = 0; i < E.data.size(); ++i) {
        // A pixel whose patch was never masked falls back to the all-draw mean.
        E.data[i] = count[i] > 0 ? static_cast<float>(sum[i] / static_cast<double>(count[i]))
                                 : static_cast<float>(all[i] / static_cast<double>(options.mask_draws));
    }
    return E;
}

}  // namespace

ScoreMaps score_image(const Model& model, const Image& image, const ScoreOptions& options) {
    const ModelConfig& mc = model.config;
    if (image.channels != mc.channels || image.height != mc.image_size || image.width != mc.image_size) {
        throw DimensionError("score_image: image does not match the model input size");
    }
    ScoreMaps maps;
    if (options.mode == ScoreMode::MaskedE) {
        if (options.mask_draws == 0) throw ConfigError("masked scoring needs at least one mask draw");
        maps.E = masked_error(model, image, options);
        maps.P = Image(1, image.height, image.width, 1.0f);
    } else {
        const Tensor decoded = forward_full(model, to_tensor(image));
        if (options.mode == ScoreMode::POnly) {
            maps.E = Image(1, image.height, image.width, 1.0f);
        } else {
            maps.E = reconstruction_error(image, image_from_tensor(head_reconstruct(model, decoded)));
        }
        if (options.mode == ScoreMode::EOnly) {
            maps.P = Image(1, image.height, image.width, 1.0f);
        } else {
            const Tensor prob = head_classify(model, decoded);
            maps.P = Image(1, image.height, image.width);
            std::copy(prob.data().begin(), prob.data().end(), maps.P.data.begin());
        }
    }
    maps.S = fuse(maps.E, maps.P);
    if (options.smooth_sigma > 0.0) maps.S = smooth(maps.S, options.smooth_sigma);
    maps.image_score = image_score(maps.S, options.pooling);
    if (options.normalize_per_image) min_max_normalize(maps.S);
    return maps;
}

std::vector<ScoreMaps> score_images(const Model& model, std::span<const Image> images, const ScoreOptions& options) {
    std::vector<ScoreMaps> out(images.size());
    parallel_for(images.size(), [&](std::size_t i) { out[i] = score_image(model, images[i], options); });
    return out;
}

void write_heatmap_pgm(const std::filesystem::path& path, const Image& map) {
    Image norm = map;
    min_max_normalize(norm);
    write_pgm(path, norm, 16);
}

void write_heatmap_png(const std::filesystem::path& path, const Image& map) {
    Image norm = map;
    min_max_normalize(norm);
    write_png(path, norm);
}

}  // namespace tadc
