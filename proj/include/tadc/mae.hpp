#pragma once

// Stage-1 training: random patch masking and masked-patch reconstruction.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tadc/image.hpp"
#include "tadc/model.hpp"
#include "tadc/optim.hpp"
#include "tadc/rng.hpp"

namespace tadc {

/// Partition of the n token positions into masked and visible sets, both sorted.
struct MaskPlan {
    std::size_t n = 0;
    std::vector<std::size_t> masked;
    std::vector<std::size_t> visible;
};

/// Masks floor(mask_ratio * n) positions chosen uniformly without replacement.
MaskPlan sample_mask(std::size_t n, double mask_ratio, Rng& rng);

/// Mean squared error over the masked rows of [n,d] (or [B*n,d] with one plan
/// per sample), normalized by the number of masked elements.
Tensor masked_mse(const Tensor& original_patches, const Tensor& recon_patches, const MaskPlan& plan);
Tensor masked_mse(const Tensor& original_patches, const Tensor& recon_patches,
                  std::span<const MaskPlan> plans);

/// Per-token reconstruction-head output [B*n, p*p*C] (before unpatchify).
Tensor head_reconstruct_patches(const Model& model, const Tensor& decoded);

struct PretrainConfig {
    std::size_t epochs = 120;
    std::size_t batch_size = 20;
    double lr_base = 1e-3;  // scaled by batch_size / 256
    double min_lr = 0.0;
    double warmup_fraction = 0.1;
    AdamWConfig adamw{};
};

struct PretrainEpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;
    double lr = 0.0;  // learning rate of the epoch's last step
};

/// Optimizer over every model parameter (encoder, decoder, heads).
AdamW make_pretrain_optimizer(const Model& model, const AdamWConfig& config);

ScheduleConfig pretrain_schedule(const PretrainConfig& config, std::size_t dataset_size);

/// One pass over `dataset` (normal images only). `step` is the global
/// optimizer step counter and advances by the number of batches.
PretrainEpochStats pretrain_epoch(Model& model, std::span<const Image> dataset, const PretrainConfig& config,
                                  AdamW& optimizer, const ScheduleConfig& schedule, std::size_t& step,
                                  std::size_t epoch, Rng& rng);

using PretrainCallback = std::function<void(const PretrainEpochStats&)>;

/// Full stage-1 run from the model's current parameters.
std::vector<PretrainEpochStats> pretrain(Model& model, std::span<const Image> dataset,
                                         const PretrainConfig& config, std::uint64_t seed,
                                         const PretrainCallback& on_epoch = {});

}  // namespace tadc
