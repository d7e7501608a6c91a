#pragma once

// Stage-2 objective: full-image MSE, SSIM loss and weighted pixel BCE.
// Images are [B,C,H,W] (or [C,H,W]); labels and logits are [B,H,W] (or [H,W]).

#include <vector>

#include "tadc/tensor.hpp"

namespace tadc {

struct LossConfig {
    double lambda_mse = 1.0;
    double lambda_ssim = 0.5;
    double lambda_ce = 1.0;
    double omega = 3.0;  // weight of the positive (m = 1) BCE term
    std::size_t ssim_window = 11;
    double ssim_sigma = 1.5;
    double ssim_k1 = 0.01;
    double ssim_k2 = 0.03;

    /// `image_side` bounds the SSIM window; 0 skips that check.
    void validate(std::size_t image_side = 0) const;
};

/// Normalized 1-D Gaussian of odd length.
std::vector<float> gaussian_window(std::size_t size, double sigma);

Tensor mse_full(const Tensor& target, const Tensor& recon);

/// Per-pixel SSIM map [B*C,H,W] with data range 1.
Tensor ssim_map(const Tensor& a, const Tensor& b, const LossConfig& config);
/// 1 - mean SSIM over channels and pixel centers.
Tensor ssim_loss(const Tensor& a, const Tensor& b, const LossConfig& config);

Tensor weighted_bce(const Tensor& labels, const Tensor& logits, double omega);

struct LossParts {
    Tensor total;
    // Unweighted component values; a component whose weight is zero is not
    // evaluated and reports 0.
    double mse = 0.0;
    double ssim = 0.0;
    double ce = 0.0;
};

/// lambda_mse*mse + lambda_ssim*ssim + lambda_ce*bce. `recon` may be undefined
/// when both reconstruction weights are zero, `logits` when lambda_ce is zero.
LossParts total_loss(const Tensor& target, const Tensor& recon, const Tensor& labels, const Tensor& logits,
                     const LossConfig& config);

}  // namespace tadc
