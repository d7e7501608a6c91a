#include "tadc/mae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tadc/error.hpp"
#include "tadc/ops.hpp"

namespace tadc {

MaskPlan sample_mask(std::size_t n, double mask_ratio, Rng& rng) {
    const auto masked_count = static_cast<std::size_t>(std::floor(mask_ratio * static_cast<double>(n)));
    if (masked_count == 0 || masked_count >= n) {
        throw ConfigError("mask ratio " + std::to_string(mask_ratio) + " masks " + std::to_string(masked_count) +
                          " of " + std::to_string(n) + " tokens; need 0 < masked < n");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    MaskPlan plan;
    plan.n = n;
    plan.masked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(masked_count));
    plan.visible.assign(order.begin() + static_cast<std::ptrdiff_t>(masked_count), order.end());
    std::sort(plan.masked.begin(), plan.masked.end());
    std::sort(plan.visible.begin(), plan.visible.end());
    return plan;
}

Tensor masked_mse(const Tensor& original, const Tensor& recon, const MaskPlan& plan) {
    return masked_mse(original, recon, std::span<const MaskPlan>(&plan, 1));
}

Tensor masked_mse(const Tensor& original, const Tensor& recon, std::span<const MaskPlan> plans) {
    if (original.shape() != recon.shape() || original.rank() != 2) {
        throw DimensionError("masked_mse: shapes " + to_string(original.shape()) + " and " +
                             to_string(recon.shape()) + " must be equal matrices");
    }
    std::size_t total_rows = 0;
    std::vector<std::size_t> rows;
    for (std::size_t s = 0; s < plans.size(); ++s) {
        for (std::size_t idx : plans[s].masked) rows.push_back(total_rows + idx);
        total_rows += plans[s].n;
    }
    if (total_rows != original.dim(0)) {
        throw DimensionError("masked_mse: plans cover " + std::to_string(total_rows) + " rows, tensors have " +
                             std::to_string(original.dim(0)));
    }
    const Tensor diff = ops::sub(ops::gather_rows(recon, rows), ops::gather_rows(original, rows));
    return ops::mean(ops::square(diff));
}

Tensor head_reconstruct_patches(const Model& model, const Tensor& decoded) {
    const LinearParams& h = model.params.head_reconstruct;
    return ops::linear(decoded, h.weight, h.bias);
}

AdamW make_pretrain_optimizer(const Model& model, const AdamWConfig& config) {
    std::vector<Tensor> params;
    std::vector<bool> decay;
    for (const auto& np : model.params.named()) {
        params.push_back(np.tensor);
        decay.push_back(np.decay);
    }
    return AdamW(std::move(params), config, std::move(decay));
}

ScheduleConfig pretrain_schedule(const PretrainConfig& config, std::size_t dataset_size) {
    ScheduleConfig s;
    s.mode = ScheduleMode::WarmupHalfCosine;
    s.base_lr = scaled_lr(config.lr_base, config.batch_size);
    s.min_lr = config.min_lr;
    const std::size_t per_epoch = (dataset_size + config.batch_size - 1) / config.batch_size;
    s.steps_per_epoch = per_epoch;
    s.total_steps = per_epoch * config.epochs;
    s.warmup_steps = static_cast<std::size_t>(std::floor(config.warmup_fraction * static_cast<double>(s.total_steps)));
    return s;
}

PretrainEpochStats pretrain_epoch(Model& model, std::span<const Image> dataset, const PretrainConfig& config,
                                  AdamW& optimizer, const ScheduleConfig& schedule, std::size_t& step,
                                  std::size_t epoch, Rng& rng) {
    if (dataset.empty()) throw ConfigError("pretrain: empty dataset");
    if (config.batch_size == 0) throw ConfigError("pretrain: batch size must be positive");
    const ModelConfig& mc = model.config;
    const std::size_t n = mc.tokens();
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    PretrainEpochStats stats;
    stats.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
        const std::size_t end = std::min(order.size(), begin + config.batch_size);
        std::vector<Image> batch;
        std::vector<MaskPlan> plans;
        PositionSets visible;
        for (std::size_t i = begin; i < end; ++i) {
            batch.push_back(dataset[order[i]]);
            plans.push_back(sample_mask(n, mc.mask_ratio, rng));
            visible.push_back(plans.back().visible);
        }
        const Tensor patches = patchify(to_tensor(batch), mc.patch_size);
        std::vector<std::size_t> visible_rows;
        for (std::size_t s = 0; s < visible.size(); ++s) {
            for (std::size_t pos : visible[s]) visible_rows.push_back(s * n + pos);
        }

        const double lr = cosine_lr(step, schedule);
        GradTape tape;
        const Tensor encoded = encode(model, ops::gather_rows(patches, visible_rows), visible);
        const Tensor decoded = decode(model, encoded, visible);
        const Tensor recon = head_reconstruct_patches(model, decoded);
        const Tensor loss = masked_mse(patches, recon, plans);
        tape.backward(loss);
        optimizer.step(static_cast<float>(lr));
        ++step;

        loss_sum += static_cast<double>(loss.item()) * static_cast<double>(end - begin);
        stats.lr = lr;
    }
    stats.loss = loss_sum / static_cast<double>(dataset.size());
    return stats;
}

std::vector<PretrainEpochStats> pretrain(Model& model, std::span<const Image> dataset,
                                         const PretrainConfig& config, std::uint64_t seed,
                                         const PretrainCallback& on_epoch) {
    for (const ParamGroup g : {ParamGroup::Encoder, ParamGroup::Decoder, ParamGroup::Heads}) {
        model.set_trainable(g, true);
    }
    AdamW optimizer = make_pretrain_optimizer(model, config.adamw);
    const ScheduleConfig schedule = pretrain_schedule(config, dataset.size());
    Rng rng(derive_seed(seed, 0x5741));
    std::size_t step = 0;
    std::vector<PretrainEpochStats> history;
    for (std::size_t e = 0; e < config.epochs; ++e) {
        history.push_back(pretrain_epoch(model, dataset, config, optimizer, schedule, step, e, rng));
        if (on_epoch) on_epoch(history.back());
    }
    return history;
}

}  // namespace tadc
