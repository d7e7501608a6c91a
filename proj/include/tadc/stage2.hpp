#pragma once

// Stage-2 training: whole-image forward through a frozen encoder, with the
// decoder and both heads fitted to the combined reconstruction and pixel
// classification objective.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tadc/augment.hpp"
#include "tadc/losses.hpp"
#include "tadc/model.hpp"
#include "tadc/optim.hpp"

namespace tadc {

enum class InputMode {
    Clean,      // input is the original image, labels all zero
    Corrupted,  // input is the augmented image
};

std::string to_string(InputMode mode);
InputMode parse_input_mode(const std::string& name);

struct Stage2Config {
    std::size_t epochs = 200;
    std::size_t batch_size = 16;
    double max_lr = 1e-3;
    double min_lr = 1e-9;
    double period_epochs = 60.0;
    InputMode input_mode = InputMode::Corrupted;
    /// Trains the encoder too (used by variants without stage-1 weights).
    bool train_encoder = false;
    LossConfig loss{};
    CorruptionConfig corruption{};
    AdamWConfig adamw{};
};

struct Stage2EpochStats {
    std::size_t epoch = 0;
    double total = 0.0;
    double mse = 0.0;
    double ssim = 0.0;
    double ce = 0.0;
    double lr = 0.0;  // learning rate of the epoch's last step
};

/// Optimizer over decoder + heads, plus the encoder when config.train_encoder.
AdamW make_stage2_optimizer(const Model& model, const Stage2Config& config);

ScheduleConfig stage2_schedule(const Stage2Config& config, std::size_t dataset_size);

/// The samples one epoch trains on, in order.
std::vector<AugmentedSample> stage2_stream(std::span<const Image> dataset, const Stage2Config& config,
                                           std::size_t epoch, std::uint64_t seed);

/// One pass over the epoch stream. Encoder parameters are left untouched
/// unless config.train_encoder is set.
Stage2EpochStats stage2_epoch(Model& model, std::span<const Image> dataset, const Stage2Config& config,
                              AdamW& optimizer, const ScheduleConfig& schedule, std::size_t& step,
                              std::size_t epoch, std::uint64_t seed);

using Stage2Callback = std::function<void(const Stage2EpochStats&)>;

std::vector<Stage2EpochStats> train_stage2(Model& model, std::span<const Image> dataset, const Stage2Config& config,
                                           std::uint64_t seed, const Stage2Callback& on_epoch = {});

}  // namespace tadc
