#include "planefield/compositing.hpp"

#include <cmath>

namespace planefield {

namespace {

void check_alpha(double a) {
  if (!(a >= 0.0 && a <= 1.0)) {
    throw DomainError("alpha must lie in [0, 1]");
  }
}

void check_density(const DensitySample& s) {
  if (!(s.sigma >= 0.0) || !std::isfinite(s.sigma)) {
    throw DomainError("density must be non-negative and finite");
  }
  if (!(s.delta > 0.0) || !std::isfinite(s.delta)) {
    throw DomainError("ray interval must be positive and finite");
  }
}

}  // namespace

CompositeResult alpha_composite(std::span<const AlphaSample> samples,
                                double initial_transmittance) {
  CompositeResult out{{0.0, 0.0, 0.0}, 0.0};
  double remaining = initial_transmittance;
  for (const AlphaSample& s : samples) {
    check_alpha(s.alpha);
    const double w = s.alpha * remaining;
    out.color[0] += w * s.color[0];
    out.color[1] += w * s.color[1];
    out.color[2] += w * s.color[2];
    out.alpha += w;
    remaining *= 1.0 - s.alpha;
  }
  return out;
}

std::vector<double> transmittance(std::span<const DensitySample> samples) {
  std::vector<double> t(samples.size());
  double optical_depth = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    check_density(samples[i]);
    t[i] = std::exp(-optical_depth);
    optical_depth += samples[i].sigma * samples[i].delta;
  }
  return t;
}

CompositeResult volume_render(std::span<const DensitySample> samples,
                              double initial_transmittance) {
  CompositeResult out{{0.0, 0.0, 0.0}, 0.0};
  double t = initial_transmittance;
  for (const DensitySample& s : samples) {
    check_density(s);
    const double decay = std::exp(-s.sigma * s.delta);
    const double w = t * (1.0 - decay);
    out.color[0] += w * s.color[0];
    out.color[1] += w * s.color[1];
    out.color[2] += w * s.color[2];
    out.alpha += w;
    t *= decay;
  }
  return out;
}

double alpha_from_density(double sigma, double delta) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw DomainError("density must be non-negative and finite");
  }
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw DomainError("ray interval must be positive and finite");
  }
  return -std::expm1(-sigma * delta);
}

}  // namespace planefield
