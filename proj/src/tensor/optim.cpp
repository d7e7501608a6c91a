#include "tadc/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "tadc/error.hpp"
#include "tadc/kernels.hpp"

namespace tadc {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig config, std::vector<bool> decay_mask)
    : params_(std::move(params)), config_(config), decay_(std::move(decay_mask)) {
    if (decay_.empty()) decay_.assign(params_.size(), true);
    if (decay_.size() != params_.size()) {
        throw DimensionError("AdamW: decay mask has " + std::to_string(decay_.size()) + " entries for " +
                             std::to_string(params_.size()) + " parameters");
    }
    for (const Tensor& p : params_) {
        m_.emplace_back(p.size(), 0.0f);
        v_.emplace_back(p.size(), 0.0f);
    }
}

void AdamW::step(float lr) {
    std::vector<std::vector<float>> zeros;
    std::vector<const float*> grads(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].has_grad()) {
            grads[i] = params_[i].grad().data();
        } else {
            zeros.emplace_back(params_[i].size(), 0.0f);
            grads[i] = zeros.back().data();
        }
    }
    apply(lr, grads);
    for (Tensor& p : params_) p.zero_grad();
}

void AdamW::step(float lr, const std::vector<std::vector<float>>& grads) {
    if (grads.size() != params_.size()) {
        throw DimensionError("AdamW: " + std::to_string(grads.size()) + " gradients for " +
                             std::to_string(params_.size()) + " parameters");
    }
    std::vector<const float*> ptrs(grads.size());
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (grads[i].size() != params_[i].size()) {
            throw DimensionError("AdamW: gradient " + std::to_string(i) + " has " +
                                 std::to_string(grads[i].size()) + " values, parameter has " +
                                 std::to_string(params_[i].size()));
        }
        ptrs[i] = grads[i].data();
    }
    apply(lr, ptrs);
}

void AdamW::apply(float lr, const std::vector<const float*>& grads) {
    if (lr < 0.0f) throw ConfigError("AdamW: negative learning rate");
    ++steps_;
    float clip_scale = 1.0f;
    if (config_.clip_norm > 0.0f) {
        double sq = 0.0;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            for (std::size_t j = 0; j < params_[i].size(); ++j) sq += double(grads[i][j]) * grads[i][j];
        }
        const double norm = std::sqrt(sq);
        if (norm > config_.clip_norm) clip_scale = static_cast<float>(config_.clip_norm / norm);
    }
    const auto t = static_cast<double>(steps_);
    kernels::AdamWCoeffs c;
    c.lr = lr;
    c.beta1 = config_.beta1;
    c.beta2 = config_.beta2;
    c.eps = config_.eps;
    c.bias_corr1 = static_cast<float>(1.0 / (1.0 - std::pow(double(config_.beta1), t)));
    c.bias_corr2 = static_cast<float>(1.0 / (1.0 - std::pow(double(config_.beta2), t)));
    const auto& k = kernels::active();
    std::vector<float> scaled;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        c.decay_factor = decay_[i] ? 1.0f - lr * config_.weight_decay : 1.0f;
        const float* g = grads[i];
        if (clip_scale != 1.0f) {
            scaled.resize(params_[i].size());
            k.scale(scaled.size(), clip_scale, g, scaled.data());
            g = scaled.data();
        }
        k.adamw(params_[i].size(), params_[i].mutable_data().data(), g, m_[i].data(), v_[i].data(), c);
    }
}

double scaled_lr(double lr_base, std::size_t batch_size) {
    return lr_base * static_cast<double>(batch_size) / 256.0;
}

double cosine_lr(std::size_t step, const ScheduleConfig& s) {
    switch (s.mode) {
        case ScheduleMode::WarmupHalfCosine: {
            if (step < s.warmup_steps) {
                return s.base_lr * static_cast<double>(step + 1) / static_cast<double>(s.warmup_steps);
            }
            const std::size_t last = s.total_steps == 0 ? 0 : s.total_steps - 1;
            if (last <= s.warmup_steps) return s.base_lr;
            const double progress = std::min(
                1.0, static_cast<double>(step - s.warmup_steps) / static_cast<double>(last - s.warmup_steps));
            return s.min_lr + (s.base_lr - s.min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
        }
        case ScheduleMode::PeriodicCosine: {
            const double epoch = static_cast<double>(step) / static_cast<double>(std::max<std::size_t>(1, s.steps_per_epoch));
            const double phase = std::fmod(epoch, s.period_epochs) / s.period_epochs;
            return s.min_lr + (s.base_lr - s.min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * phase));
        }
    }
    return s.base_lr;
}

}  // namespace tadc
