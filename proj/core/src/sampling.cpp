#include "planefield/sampling.hpp"

#include <cmath>

namespace planefield {

void DisparitySchedule::validate() const {
  if (disparities.empty()) {
    throw DomainError("disparity schedule is empty");
  }
  if (!(d_min > 0.0) || !(d_max >= d_min)) {
    throw DomainError("disparity range must satisfy 0 < d_min <= d_max");
  }
  for (std::size_t i = 0; i < disparities.size(); ++i) {
    const double d = disparities[i];
    if (!std::isfinite(d) || d < d_min || d > d_max) {
      throw DomainError("disparity outside [d_min, d_max]");
    }
    if (i > 0 && !(d < disparities[i - 1])) {
      throw DomainError("disparities must be strictly descending");
    }
  }
}

static void check_range(int n, double d_min, double d_max, bool strict) {
  if (n < 1) {
    throw DomainError("plane count must be at least 1");
  }
  if (!(d_min > 0.0) || !std::isfinite(d_min) || !std::isfinite(d_max)) {
    throw DomainError("disparity range must be positive and finite");
  }
  if (strict ? !(d_min < d_max) : !(d_min <= d_max)) {
    throw DomainError("invalid disparity range");
  }
}

DisparitySchedule fixed_disparities(int n, double d_min, double d_max) {
  check_range(n, d_min, d_max, /*strict=*/n > 1);
  DisparitySchedule schedule;
  schedule.d_min = d_min;
  schedule.d_max = d_max;
  schedule.disparities.resize(static_cast<std::size_t>(n));
  if (n == 1) {
    schedule.disparities[0] = 0.5 * (d_min + d_max);
    return schedule;
  }
  const double step = (d_max - d_min) / (n - 1);
  for (int i = 0; i < n; ++i) {
    schedule.disparities[static_cast<std::size_t>(i)] = d_max - i * step;
  }
  schedule.disparities.back() = d_min;  // endpoint exact
  return schedule;
}

DisparitySchedule stratified_disparities(
    int n, double d_min, double d_max,
    const std::function<double()>& uniform01) {
  check_range(n, d_min, d_max, /*strict=*/true);
  DisparitySchedule schedule;
  schedule.d_min = d_min;
  schedule.d_max = d_max;
  schedule.disparities.resize(static_cast<std::size_t>(n));
  const double bin_width = (d_max - d_min) / n;
  for (int i = 0; i < n; ++i) {
    double u = uniform01();
    while (u == 0.0) {
      u = uniform01();  // keep samples strictly inside their bin
    }
    if (!(u > 0.0 && u < 1.0)) {
      throw DomainError("uniform source must produce values in [0, 1)");
    }
    // Bin i spans (d_max - (i+1)w, d_max - i*w]; sampling from the top end
    // keeps adjacent samples strictly ordered even on shared bin edges.
    schedule.disparities[static_cast<std::size_t>(i)] =
        d_max - i * bin_width - u * bin_width;
  }
  return schedule;
}

DisparitySchedule stratified_disparities(int n, double d_min, double d_max,
                                         UniformRng& rng) {
  return stratified_disparities(n, d_min, d_max,
                                [&rng] { return rng.next(); });
}

}  // namespace planefield
