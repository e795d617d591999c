#pragma once

#include "planefield/tensor.hpp"

namespace planefield {

inline constexpr double kPsnrCap = 99.0;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Peak signal-to-noise ratio in dB for images in [0, 1] (peak 1.0):
/// 10 * log10(1 / MSE), capped at 99.0 (the value returned for identical
/// images). Throws ShapeError on mismatched dims, DomainError on non-finite
/// pixels.
double psnr(const Tensor& a, const Tensor& b);

/// Mean single-scale structural similarity over valid window positions,
/// computed per channel with an 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1.0, then averaged across channels.
/// Throws DomainError when the image is smaller than the window.
double ssim(const Tensor& a, const Tensor& b);

}  // namespace planefield
