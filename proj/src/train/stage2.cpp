#include "tadc/stage2.hpp"

#include <algorithm>

#include "tadc/error.hpp"
#include "tadc/ops.hpp"

namespace tadc {

std::string to_string(InputMode mode) { return mode == InputMode::Clean ? "clean" : "corrupted"; }

InputMode parse_input_mode(const std::string& name) {
    if (name == "clean") return InputMode::Clean;
    if (name == "corrupted") return InputMode::Corrupted;
    throw ConfigError("unknown input mode '" + name + "'");
}

AdamW make_stage2_optimizer(const Model& model, const Stage2Config& config) {
    std::vector<Tensor> params;
    std::vector<bool> decay;
    for (const auto& np : model.params.named()) {
        if (np.group == ParamGroup::Encoder && !config.train_encoder) continue;
        params.push_back(np.tensor);
        decay.push_back(np.decay);
    }
    return AdamW(std::move(params), config.adamw, std::move(decay));
}

ScheduleConfig stage2_schedule(const Stage2Config& config, std::size_t dataset_size) {
    ScheduleConfig s;
    s.mode = ScheduleMode::PeriodicCosine;
    s.base_lr = config.max_lr;
    s.min_lr = config.min_lr;
    s.steps_per_epoch = (dataset_size + config.batch_size - 1) / config.batch_size;
    s.total_steps = s.steps_per_epoch * config.epochs;
    s.period_epochs = config.period_epochs;
    return s;
}

std::vector<AugmentedSample> stage2_stream(std::span<const Image> dataset, const Stage2Config& config,
                                           std::size_t epoch, std::uint64_t seed) {
    if (config.input_mode == InputMode::Corrupted) {
        return make_epoch_stream(dataset, config.corruption, epoch, seed);
    }
    CorruptionConfig none = config.corruption;
    none.corrupt_probability = 0.0;
    return make_epoch_stream(dataset, none, epoch, seed);
}

Stage2EpochStats stage2_epoch(Model& model, std::span<const Image> dataset, const Stage2Config& config,
                              AdamW& optimizer, const ScheduleConfig& schedule, std::size_t& step,
                              std::size_t epoch, std::uint64_t seed) {
    if (dataset.empty()) throw ConfigError("stage 2: empty dataset");
    if (config.batch_size == 0) throw ConfigError("stage 2: batch size must be positive");
    model.set_trainable(ParamGroup::Encoder, config.train_encoder);
    model.set_trainable(ParamGroup::Decoder, true);
    model.set_trainable(ParamGroup::Heads, true);

    const std::vector<AugmentedSample> stream = stage2_stream(dataset, config, epoch, seed);
    const bool need_recon = config.loss.lambda_mse > 0.0 || config.loss.lambda_ssim > 0.0;
    const bool need_class = config.loss.lambda_ce > 0.0;

    Stage2EpochStats stats;
    stats.epoch = epoch;
    for (std::size_t begin = 0; begin < stream.size(); begin += config.batch_size) {
        const std::size_t end = std::min(stream.size(), begin + config.batch_size);
        std::vector<Image> inputs, targets, labels;
        for (std::size_t i = begin; i < end; ++i) {
            inputs.push_back(stream[i].corrupted);
            targets.push_back(stream[i].original);
            labels.push_back(stream[i].label);
        }
        const Tensor target = to_tensor(targets);
        const Tensor label_maps = ops::reshape(to_tensor(labels), {end - begin, model.config.image_size,
                                                                   model.config.image_size});

        const double lr = cosine_lr(step, schedule);
        GradTape tape;
        const Tensor decoded = forward_full(model, to_tensor(inputs));
        const Tensor recon = need_recon ? head_reconstruct(model, decoded) : Tensor();
        const Tensor logits = need_class ? head_classify_logits(model, decoded) : Tensor();
        const LossParts loss = total_loss(target, recon, label_maps, logits, config.loss);
        if (loss.total.requires_grad()) tape.backward(loss.total);
        optimizer.step(static_cast<float>(lr));
        ++step;

        const auto w = static_cast<double>(end - begin);
        stats.total += static_cast<double>(loss.total.item()) * w;
        stats.mse += loss.mse * w;
        stats.ssim += loss.ssim * w;
        stats.ce += loss.ce * w;
        stats.lr = lr;
    }
    const auto n = static_cast<double>(stream.size());
    stats.total /= n;
    stats.mse /= n;
    stats.ssim /= n;
    stats.ce /= n;
    return stats;
}

std::vector<Stage2EpochStats> train_stage2(Model& model, std::span<const Image> dataset, const Stage2Config& config,
                                           std::uint64_t seed, const Stage2Callback& on_epoch) {
    config.loss.validate(model.config.image_size);
    config.corruption.validate();
    AdamW optimizer = make_stage2_optimizer(model, config);
    const ScheduleConfig schedule = stage2_schedule(config, dataset.size());
    const std::uint64_t stream_seed = derive_seed(seed, 0x57A6E2);
    std::size_t step = 0;
    std::vector<Stage2EpochStats> history;
    for (std::size_t e = 0; e < config.epochs; ++e) {
        history.push_back(stage2_epoch(model, dataset, config, optimizer, schedule, step, e, stream_seed));
        if (on_epoch) on_epoch(history.back());
    }
    return history;
}

}  // namespace tadc
