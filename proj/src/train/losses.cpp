#include "tadc/losses.hpp"

#include <cmath>

#include "tadc/error.hpp"
#include "tadc/ops.hpp"

namespace tadc {

void LossConfig::validate(std::size_t image_side) const {
    if (lambda_mse < 0.0 || lambda_ssim < 0.0 || lambda_ce < 0.0) throw ConfigError("loss weights must be non-negative");
    if (!(omega > 0.0)) throw ConfigError("omega must be positive");
    if (ssim_window == 0 || ssim_window % 2 == 0) throw ConfigError("ssim_window must be odd");
    if (image_side != 0 && ssim_window > image_side) {
        throw ConfigError("ssim_window " + std::to_string(ssim_window) + " exceeds image side " +
                          std::to_string(image_side));
    }
    if (!(ssim_sigma > 0.0) || ssim_k1 < 0.0 || ssim_k2 < 0.0) throw ConfigError("invalid SSIM constants");
}

std::vector<float> gaussian_window(std::size_t size, double sigma) {
    if (size == 0 || size % 2 == 0) throw ConfigError("gaussian_window: size must be odd");
    const double r = static_cast<double>(size / 2);
    std::vector<double> g(size);
    double total = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
        const double d = static_cast<double>(i) - r;
        g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += g[i];
    }
    std::vector<float> out(size);
    for (std::size_t i = 0; i < size; ++i) out[i] = static_cast<float>(g[i] / total);
    return out;
}

Tensor mse_full(const Tensor& target, const Tensor& recon) {
    if (target.shape() != recon.shape()) {
        throw DimensionError("mse_full: shapes " + to_string(target.shape()) + " and " + to_string(recon.shape()));
    }
    return ops::mean(ops::square(ops::sub(recon, target)));
}

namespace {

// [B,C,H,W] or [C,H,W] -> [B*C,H,W]
Tensor as_planes(const Tensor& x) {
    const Shape& s = x.shape();
    if (s.size() == 3) return x;
    if (s.size() == 4) return ops::reshape(x, {s[0] * s[1], s[2], s[3]});
    throw DimensionError("ssim: expected [C,H,W] or [B,C,H,W], got " + to_string(s));
}

}  // namespace

Tensor ssim_map(const Tensor& a, const Tensor& b, const LossConfig& config) {
    if (a.shape() != b.shape()) {
        throw DimensionError("ssim: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
    }
    const Tensor x = as_planes(a);
    const Tensor y = as_planes(b);
    if (config.ssim_window > x.dim(1) || config.ssim_window > x.dim(2)) {
        throw ConfigError("ssim: window " + std::to_string(config.ssim_window) + " larger than image");
    }
    const std::vector<float> g = gaussian_window(config.ssim_window, config.ssim_sigma);
    const auto c1 = static_cast<float>(config.ssim_k1 * config.ssim_k1);
    const auto c2 = static_cast<float>(config.ssim_k2 * config.ssim_k2);

    const Tensor mu_x = ops::blur2d(x, g);
    const Tensor mu_y = ops::blur2d(y, g);
    const Tensor mu_xx = ops::square(mu_x);
    const Tensor mu_yy = ops::square(mu_y);
    const Tensor mu_xy = ops::mul(mu_x, mu_y);
    const Tensor var_x = ops::sub(ops::blur2d(ops::square(x), g), mu_xx);
    const Tensor var_y = ops::sub(ops::blur2d(ops::square(y), g), mu_yy);
    const Tensor cov = ops::sub(ops::blur2d(ops::mul(x, y), g), mu_xy);

    const Tensor num = ops::mul(ops::add_scalar(ops::scale(mu_xy, 2.0f), c1), ops::add_scalar(ops::scale(cov, 2.0f), c2));
    const Tensor den = ops::mul(ops::add_scalar(ops::add(mu_xx, mu_yy), c1), ops::add_scalar(ops::add(var_x, var_y), c2));
    return ops::div(num, den);
}

Tensor ssim_loss(const Tensor& a, const Tensor& b, const LossConfig& config) {
    return ops::add_scalar(ops::scale(ops::mean(ssim_map(a, b, config)), -1.0f), 1.0f);
}

Tensor weighted_bce(const Tensor& labels, const Tensor& logits, double omega) {
    return ops::bce_with_logits(logits, labels, static_cast<float>(omega));
}

LossParts total_loss(const Tensor& target, const Tensor& recon, const Tensor& labels, const Tensor& logits,
                     const LossConfig& config) {
    LossParts parts;
    std::vector<Tensor> terms;
    if (config.lambda_mse > 0.0) {
        const Tensor l = mse_full(target, recon);
        parts.mse = l.item();
        terms.push_back(ops::scale(l, static_cast<float>(config.lambda_mse)));
    }
    if (config.lambda_ssim > 0.0) {
        const Tensor l = ssim_loss(target, recon, config);
        parts.ssim = l.item();
        terms.push_back(ops::scale(l, static_cast<float>(config.lambda_ssim)));
    }
    if (config.lambda_ce > 0.0) {
        const Tensor l = weighted_bce(labels, logits, config.omega);
        parts.ce = l.item();
        terms.push_back(ops::scale(l, static_cast<float>(config.lambda_ce)));
    }
    if (terms.empty()) {
        parts.total = Tensor::scalar(0.0f);
        return parts;
    }
    parts.total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) parts.total = ops::add(parts.total, terms[i]);
    return parts;
}

}  // namespace tadc
