#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "planefield/compositing.hpp"
#include "planefield/geometry.hpp"
#include "planefield/sampling.hpp"
#include "planefield/tensor.hpp"

namespace planefield {

/// One fronto-parallel radiance plane: color (H, W, 3) in [0, 1] and volume
/// density (H, W, 1) >= 0, at source-frame depth `depth` = 1/disparity.
struct RadiancePlane {
  Tensor color;
  Tensor density;
  double disparity = 0.0;
  double depth = 0.0;
};

/// N radiance planes ordered near-to-far, tied to the source camera whose
/// frustum they discretize.
struct PlaneStack {
  std::vector<RadiancePlane> planes;
  Camera source_camera;
  DisparitySchedule schedule;

  int plane_count() const { return static_cast<int>(planes.size()); }
  int height() const { return planes.empty() ? 0 : planes[0].color.dim(0); }
  int width() const { return planes.empty() ? 0 : planes[0].color.dim(1); }

  void validate() const;
};

enum class CompositingMode {
  kAlpha,       // over operator on per-interval opacities
  kVolumetric,  // transmittance-weighted emission-absorption
};

struct RenderOutput {
  Tensor image;      // (H, W, 3) in [0, 1]
  Tensor acc_alpha;  // (H, W, 1) in [0, 1]
  double wall_time_s = 0.0;
};

/// Inverse-warps a multi-channel image through homography `h`: output pixel
/// (x, y) bilinearly samples the source at H * (x + 0.5, y + 0.5, 1).
/// Source taps outside the image contribute zero (transparent borders).
/// Throws SingularityError when `h` is singular.
Tensor warp_plane(const Tensor& image, const Eigen::Matrix3d& h,
                  int out_height, int out_width);

/// Warps every plane of `stack` into the target camera's pixel grid,
/// producing a stack aligned with the target frustum (same schedule, target
/// camera attached).
PlaneStack warp_stack(const PlaneStack& stack, const Camera& tgt,
                      int threads = 0);

/// Renders `stack` into the target view: per plane, target pixels sample
/// the source plane through the plane-induced homography, and samples are
/// composited near-to-far per pixel.
///
/// Ray intervals delta_i are per-pixel: the distance along the target pixel
/// ray between its intersections with planes z_i and z_{i+1}; the last
/// interval copies the previous one (a single-plane stack uses the plane
/// depth). Plane intersections behind the target camera are skipped, so a
/// pixel composites only its valid samples; a pixel with no valid sample is
/// transparent black.
RenderOutput render_view(const PlaneStack& stack, const Camera& tgt,
                         CompositingMode mode = CompositingMode::kVolumetric,
                         int threads = 0);

/// Brute-force reference path: casts each target pixel ray, intersects it
/// with every source plane, projects each intersection into the source
/// image, samples color/density there, and volume-renders the samples.
/// Shares no homography code with render_view; agreement between the two
/// is a geometry cross-check.
RenderOutput raymarch_oracle(const PlaneStack& stack, const Camera& tgt,
                             int threads = 0);

struct BenchEntry {
  std::string method;  // "render_view" | "raymarch_oracle"
  int h = 0;
  int w = 0;
  int n_planes = 0;
  int reps = 0;
  double mean_s = 0.0;
  double median_s = 0.0;
  int threads = 0;
  int warmup_frames = 0;
};

struct BenchReport {
  std::vector<BenchEntry> entries;
};

/// Times reps x |targets| frames of render_view and raymarch_oracle on
/// identical inputs with a monotonic clock, discarding `warmup` frames per
/// method first. Throws DomainError for reps < 1 or an empty target list.
BenchReport bench_render(const PlaneStack& stack,
                         std::span<const Camera> targets, int reps,
                         int threads = 0, int warmup = 3);

}  // namespace planefield
