#pragma once

// Inference: reconstruction-error map E, pixel-probability map P, their
// product S and the scalar image score.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tadc/image.hpp"
#include "tadc/model.hpp"

namespace tadc {

enum class ScoreMode {
    Fusion,   // S = E * P
    EOnly,    // P = 1
    POnly,    // E = 1
    MaskedE,  // E averaged over random 75% mask draws, P = 1
};

enum class Pooling { Mean, Max };

std::string to_string(ScoreMode mode);
ScoreMode parse_score_mode(const std::string& name);
std::string to_string(Pooling pooling);
Pooling parse_pooling(const std::string& name);

struct ScoreOptions {
    ScoreMode mode = ScoreMode::Fusion;
    Pooling pooling = Pooling::Mean;
    /// Gaussian smoothing of S before pooling; sigma <= 0 disables it.
    double smooth_sigma = 0.0;
    /// Min-max normalizes each S map after the image score is taken.
    bool normalize_per_image = false;
    std::size_t mask_draws = 8;
    std::uint64_t seed = 0;
};

/// Single-channel [1,H,W] maps.
struct ScoreMaps {
    Image E;
    Image P;
    Image S;
    double image_score = 0.0;
};

/// Channel mean of the squared difference, as [1,H,W].
Image reconstruction_error(const Image& original, const Image& recon);
/// Elementwise product.
Image fuse(const Image& E, const Image& P);
double image_score(const Image& S, Pooling pooling = Pooling::Mean);

ScoreMaps score_image(const Model& model, const Image& image, const ScoreOptions& options);
/// Scores every image; parallel over images when TADC_THREADS > 1, with
/// results identical to scoring one at a time.
std::vector<ScoreMaps> score_images(const Model& model, std::span<const Image> images, const ScoreOptions& options);

/// Min-max normalized 16-bit PGM (a constant map is written as zeros).
void write_heatmap_pgm(const std::filesystem::path& path, const Image& map);
/// Min-max normalized 8-bit grayscale PNG.
void write_heatmap_png(const std::filesystem::path& path, const Image& map);

}  // namespace tadc
