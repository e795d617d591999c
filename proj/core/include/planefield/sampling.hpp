#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "planefield/errors.hpp"

namespace planefield {

/// Per-stack disparity schedule, stored near-to-far (strictly descending
/// disparity, i.e. ascending depth). Disparity d = 1/z.
struct DisparitySchedule {
  std::vector<double> disparities;
  double d_min = 0.0;
  double d_max = 0.0;

  int count() const { return static_cast<int>(disparities.size()); }
  double depth(int i) const { return 1.0 / disparities[static_cast<std::size_t>(i)]; }

  void validate() const;  // throws DomainError on broken invariants
};

/// n disparities equally spaced over [d_min, d_max], endpoints inclusive
/// (n = 1 yields the midpoint), returned near-to-far.
DisparitySchedule fixed_disparities(int n, double d_min, double d_max);

/// Splits [d_min, d_max] into n equal bins and draws one uniform sample per
/// bin, returned near-to-far. Bin 0 is the highest-disparity (nearest) bin.
/// `uniform01` must produce variates in [0, 1); zeros are redrawn so every
/// sample lands strictly inside its bin and the schedule stays strictly
/// monotone. Samples are drawn in near-to-far bin order, so a given variate
/// sequence maps to exactly one schedule.
DisparitySchedule stratified_disparities(int n, double d_min, double d_max,
                                         const std::function<double()>& uniform01);

/// Seeded uniform source backed by mt19937_64. Variates take the top 53
/// bits of each engine output, so sequences are bit-exact across standard
/// library implementations.
class UniformRng {
 public:
  explicit UniformRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1).
  double next() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

DisparitySchedule stratified_disparities(int n, double d_min, double d_max,
                                         UniformRng& rng);

}  // namespace planefield
