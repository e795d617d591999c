#pragma once

#include <array>
#include <span>
#include <vector>

#include "planefield/errors.hpp"

namespace planefield {

using Rgb = std::array<double, 3>;

/// One ray sample carrying an opacity in [0, 1].
struct AlphaSample {
  Rgb color;
  double alpha;
};

/// One ray sample carrying a volume density (>= 0) and the length (> 0) of
/// the ray interval it occupies.
struct DensitySample {
  Rgb color;
  double sigma;
  double delta;
};

struct CompositeResult {
  Rgb color;
  double alpha;  // accumulated opacity
};

/// Front-to-back over operator. Samples must be ordered near-to-far; the
/// running product of (1 - alpha_j) over the samples already composited
/// plays the role of the remaining transmittance. `initial_transmittance`
/// seeds that product, which makes compositing associative: the tail of a
/// list can be composited separately and added.
CompositeResult alpha_composite(std::span<const AlphaSample> samples,
                                double initial_transmittance = 1.0);

/// Per-sample transmittance T_i = exp(-sum_{j<i} sigma_j * delta_j), with
/// T_1 = 1. Monotone non-increasing in (0, 1].
std::vector<double> transmittance(std::span<const DensitySample> samples);

/// Emission-absorption volume rendering: color = sum_i T_i * w_i * c_i with
/// w_i = 1 - exp(-sigma_i * delta_i); the accumulated alpha is sum_i T_i * w_i.
CompositeResult volume_render(std::span<const DensitySample> samples,
                              double initial_transmittance = 1.0);

/// Opacity of one interval: 1 - exp(-sigma * delta), in [0, 1).
double alpha_from_density(double sigma, double delta);

}  // namespace planefield
