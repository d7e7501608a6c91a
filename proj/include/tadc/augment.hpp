#pragma once

// Stage-2 input corruption: random rectangular blocks of a normal image are
// altered and a binary label map marks every treated pixel.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tadc/image.hpp"
#include "tadc/rng.hpp"

namespace tadc {

enum class CorruptionOp { GaussianNoise, ChannelShuffle, ChannelShift, FlipH, FlipV, Rotate90, Rotate180 };

std::string to_string(CorruptionOp op);
/// Parses the snake_case name ("gaussian_noise", "flip_h", ...).
CorruptionOp parse_corruption_op(const std::string& name);

struct CorruptionConfig {
    double corrupt_probability = 5.0 / 6.0;
    std::size_t min_blocks = 1;
    std::size_t max_blocks = 12;
    double min_side_fraction = 0.05;
    double max_side_fraction = 0.35;
    std::vector<CorruptionOp> ops{CorruptionOp::GaussianNoise, CorruptionOp::ChannelShuffle,
                                  CorruptionOp::ChannelShift,  CorruptionOp::FlipH,
                                  CorruptionOp::FlipV,         CorruptionOp::Rotate90,
                                  CorruptionOp::Rotate180};
    double noise_sigma = 0.2;
    double min_shift = 0.2;
    double max_shift = 0.6;
    /// Chance that a block gets a second op stacked on the first.
    double multi_op_probability = 0.3;

    void validate() const;
};

struct AugmentedSample {
    Image original;
    Image corrupted;
    Image label;  // [1,H,W] in {0,1}
};

struct Block {
    std::size_t y = 0;
    std::size_t x = 0;
    std::size_t height = 0;
    std::size_t width = 0;
};

/// Applies `op` to the pixels inside `block`, in place.
void apply_op(Image& image, const Block& block, CorruptionOp op, const CorruptionConfig& config, Rng& rng);

/// Draws Bernoulli(corrupt_probability) and corrupts on success.
AugmentedSample corrupt(const Image& image, const CorruptionConfig& config, Rng& rng);

/// Always corrupts (the selection draw is skipped).
AugmentedSample corrupt_forced(const Image& image, const CorruptionConfig& config, Rng& rng);

/// Clean pass-through sample with an all-zero label.
AugmentedSample clean_sample(const Image& image);

/// One epoch of samples: exactly round(p*N) chosen without replacement are
/// corrupted, the rest pass through clean, and the order is shuffled.
/// Fully determined by (dataset, config, epoch_index, base_seed).
std::vector<AugmentedSample> make_epoch_stream(std::span<const Image> dataset, const CorruptionConfig& config,
                                               std::size_t epoch_index, std::uint64_t base_seed);

}  // namespace tadc
