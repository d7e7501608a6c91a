#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tadc/tensor.hpp"

namespace tadc {

struct AdamWConfig {
    float beta1 = 0.9f;
    float beta2 = 0.95f;
    float eps = 1e-8f;
    float weight_decay = 0.05f;
    /// Global L2 gradient-norm clip; <= 0 disables clipping.
    float clip_norm = 0.0f;
};

/// Moment buffers and step count for a fixed list of parameters.
class AdamW {
public:
    /// decay_mask[i] selects whether params[i] receives weight decay; an empty
    /// mask decays every parameter.
    AdamW(std::vector<Tensor> params, AdamWConfig config, std::vector<bool> decay_mask = {});

    /// Applies one update using the gradients currently stored on the
    /// parameters (missing gradients count as zero), then clears them.
    void step(float lr);

    /// Same update with explicit gradients; grads[i] must match params[i].
    void step(float lr, const std::vector<std::vector<float>>& grads);

    std::uint64_t step_count() const { return steps_; }
    const AdamWConfig& config() const { return config_; }
    const std::vector<Tensor>& params() const { return params_; }
    const std::vector<float>& first_moment(std::size_t i) const { return m_[i]; }
    const std::vector<float>& second_moment(std::size_t i) const { return v_[i]; }

private:
    void apply(float lr, const std::vector<const float*>& grads);

    std::vector<Tensor> params_;
    AdamWConfig config_;
    std::vector<bool> decay_;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
    std::uint64_t steps_ = 0;
};

/// lr = lr_base * batch_size / 256 (linear scaling rule).
double scaled_lr(double lr_base, std::size_t batch_size);

enum class ScheduleMode {
    /// Linear warmup, then a single half-cosine from base_lr down to min_lr.
    WarmupHalfCosine,
    /// Periodic cosine annealing: restarts at max every `period_epochs`.
    PeriodicCosine,
};

struct ScheduleConfig {
    ScheduleMode mode = ScheduleMode::WarmupHalfCosine;
    double base_lr = 1e-3;  // peak (max) learning rate
    double min_lr = 0.0;
    std::size_t total_steps = 1;
    std::size_t warmup_steps = 0;
    // Periodic mode: schedule position is step / steps_per_epoch in epochs.
    std::size_t steps_per_epoch = 1;
    double period_epochs = 60.0;
};

double cosine_lr(std::size_t step, const ScheduleConfig& schedule);

}  // namespace tadc
