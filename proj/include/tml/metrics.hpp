#pragma once

#include "tml/image.hpp"

namespace tml {

// Zero MSE is reported as a documented 99.0 dB cap.
inline constexpr double kPsnrCap = 99.0;

double psnr(const ImageBuffer& pred, const ImageBuffer& ref, double max_value = 1.0);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), C1=(0.01L)^2,
// C2=(0.03L)^2 with L=1, computed per channel over valid positions and
// averaged.
double ssim(const ImageBuffer& pred, const ImageBuffer& ref);

}  // namespace tml
