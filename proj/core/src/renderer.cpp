#include "planefield/renderer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "planefield/parallel.hpp"

namespace planefield {

namespace {

constexpr double kMinRayDistance = 1e-9;

// Bilinear tap at continuous pixel coordinate (xs, ys), pixel centers at
// integer + 0.5. Out-of-bounds taps contribute zero in every channel.
inline void sample_bilinear(const double* data, int h, int w, int channels,
                            double xs, double ys, double* out) {
  const double gx = xs - 0.5;
  const double gy = ys - 0.5;
  for (int c = 0; c < channels; ++c) out[c] = 0.0;
  // Also rejects NaN and coordinates too large for an int.
  if (!(gx > -1.0 && gx < static_cast<double>(w)) ||
      !(gy > -1.0 && gy < static_cast<double>(h))) {
    return;
  }
  const double fx = std::floor(gx);
  const double fy = std::floor(gy);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double ax = gx - fx;
  const double ay = gy - fy;
  const double w00 = (1.0 - ax) * (1.0 - ay);
  const double w10 = ax * (1.0 - ay);
  const double w01 = (1.0 - ax) * ay;
  const double w11 = ax * ay;
  const auto tap = [&](int x, int y, double weight) {
    if (weight == 0.0 || x < 0 || y < 0 || x >= w || y >= h) return;
    const double* p = data + (static_cast<std::size_t>(y) * w + x) * channels;
    for (int c = 0; c < channels; ++c) out[c] += weight * p[c];
  };
  tap(x0, y0, w00);
  tap(x0 + 1, y0, w10);
  tap(x0, y0 + 1, w01);
  tap(x0 + 1, y0 + 1, w11);
}

struct PlaneGeometry {
  // World-space plane family of the source camera: a . x = b_i per plane,
  // a = R_s^T e_z. For a ray o + s * d the hit parameter is
  // s_i = (b_i - a.o) / (a.d).
  Eigen::Vector3d normal;
  std::vector<double> offsets;  // b_i - a.o for the target camera center

  PlaneGeometry(const PlaneStack& stack, const Camera& tgt) {
    normal = stack.source_camera.pose.rotation.row(2).transpose();
    const double nt = stack.source_camera.pose.translation.z();
    const double c0 = normal.dot(tgt.pose.center());
    offsets.resize(static_cast<std::size_t>(stack.plane_count()));
    for (int i = 0; i < stack.plane_count(); ++i) {
      offsets[static_cast<std::size_t>(i)] =
          (stack.planes[static_cast<std::size_t>(i)].depth - nt) - c0;
    }
  }
};

// Bilinear footprint of one continuous sample point; density can be tapped
// first so fully transparent samples skip the color fetch.
struct BilinearTaps {
  int x0 = 0, y0 = 0;
  double w00 = 0.0, w10 = 0.0, w01 = 0.0, w11 = 0.0;
  bool interior = false;
  bool outside = true;

  void locate(double xs, double ys, int h, int w) {
    const double gx = xs - 0.5;
    const double gy = ys - 0.5;
    // Also rejects NaN and coordinates too large for an int.
    if (!(gx > -1.0 && gx < static_cast<double>(w)) ||
        !(gy > -1.0 && gy < static_cast<double>(h))) {
      x0 = y0 = 0;
      interior = false;
      outside = true;
      return;
    }
    const double fx = std::floor(gx);
    const double fy = std::floor(gy);
    x0 = static_cast<int>(fx);
    y0 = static_cast<int>(fy);
    const double ax = gx - fx;
    const double ay = gy - fy;
    w00 = (1.0 - ax) * (1.0 - ay);
    w10 = ax * (1.0 - ay);
    w01 = (1.0 - ax) * ay;
    w11 = ax * ay;
    interior = x0 >= 0 && y0 >= 0 && x0 + 1 < w && y0 + 1 < h;
    outside = false;
  }

  double sample1(const double* data, int h, int w) const {
    if (interior) {
      const double* d = data + static_cast<std::size_t>(y0) * w + x0;
      return w00 * d[0] + w10 * d[1] + w01 * d[w] + w11 * d[w + 1];
    }
    if (outside) return 0.0;
    double acc = 0.0;
    const auto tap = [&](int x, int y, double weight) {
      if (x < 0 || y < 0 || x >= w || y >= h) return;
      acc += weight * data[static_cast<std::size_t>(y) * w + x];
    };
    tap(x0, y0, w00);
    tap(x0 + 1, y0, w10);
    tap(x0, y0 + 1, w01);
    tap(x0 + 1, y0 + 1, w11);
    return acc;
  }

  void sample3(const double* data, int h, int w, double out[3]) const {
    if (interior) {
      const double* c00 = data + (static_cast<std::size_t>(y0) * w + x0) * 3;
      const double* c01 = c00 + static_cast<std::size_t>(w) * 3;
      out[0] = w00 * c00[0] + w10 * c00[3] + w01 * c01[0] + w11 * c01[3];
      out[1] = w00 * c00[1] + w10 * c00[4] + w01 * c01[1] + w11 * c01[4];
      out[2] = w00 * c00[2] + w10 * c00[5] + w01 * c01[2] + w11 * c01[5];
      return;
    }
    out[0] = out[1] = out[2] = 0.0;
    if (outside) return;
    const auto tap = [&](int x, int y, double weight) {
      if (x < 0 || y < 0 || x >= w || y >= h) return;
      const double* c = data + (static_cast<std::size_t>(y) * w + x) * 3;
      out[0] += weight * c[0];
      out[1] += weight * c[1];
      out[2] += weight * c[2];
    };
    tap(x0, y0, w00);
    tap(x0 + 1, y0, w10);
    tap(x0, y0 + 1, w01);
    tap(x0 + 1, y0 + 1, w11);
  }
};

// Ray intervals for one pixel: hit parameters against every plane, then
// delta_i = |s_{i+1} - s_i| with the last interval copying the previous
// one. A single-plane stack falls back to the plane depth.
inline void ray_intervals(const PlaneGeometry& geom, double inv_m,
                          const PlaneStack& stack, double* s, double* delta) {
  const int n = static_cast<int>(geom.offsets.size());
  for (int i = 0; i < n; ++i) {
    s[i] = geom.offsets[static_cast<std::size_t>(i)] * inv_m;
  }
  if (n == 1) {
    delta[0] = stack.planes[0].depth;
    return;
  }
  for (int i = 0; i + 1 < n; ++i) {
    delta[i] = std::abs(s[i + 1] - s[i]);
  }
  delta[n - 1] = delta[n - 2];
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

}  // namespace

void PlaneStack::validate() const {
  if (planes.empty()) {
    throw DomainError("plane stack is empty");
  }
  schedule.validate();
  source_camera.validate();
  if (static_cast<int>(planes.size()) != schedule.count()) {
    throw ShapeError("plane count does not match the disparity schedule");
  }
  const int h = planes[0].color.dim(0);
  const int w = planes[0].color.dim(1);
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const RadiancePlane& p = planes[i];
    if (p.color.rank() != 3 || p.color.dim(2) != 3) {
      throw ShapeError("plane color must be (H, W, 3)");
    }
    if (p.density.rank() != 3 || p.density.dim(2) != 1) {
      throw ShapeError("plane density must be (H, W, 1)");
    }
    if (p.color.dim(0) != h || p.color.dim(1) != w ||
        p.density.dim(0) != h || p.density.dim(1) != w) {
      throw ShapeError("all planes must share dimensions");
    }
    if (p.disparity != schedule.disparities[i]) {
      throw DomainError("plane disparities must match the schedule order");
    }
    if (!(p.depth > 0.0)) {
      throw DomainError("plane depth must be positive");
    }
  }
}

Tensor warp_plane(const Tensor& image, const Eigen::Matrix3d& h,
                  int out_height, int out_width) {
  if (image.rank() != 3 || image.dim(0) <= 0 || image.dim(1) <= 0) {
    throw ShapeError("warp input must be a non-empty (H, W, C) tensor");
  }
  if (out_height <= 0 || out_width <= 0) {
    throw ShapeError("warp output dimensions must be positive");
  }
  if (!h.allFinite() || std::abs(h.determinant()) < 1e-300) {
    throw SingularityError("warp homography is singular");
  }
  const int sh = image.dim(0);
  const int sw = image.dim(1);
  const int channels = image.dim(2);
  Tensor out({out_height, out_width, channels});
  const double* src = image.data();
  double* dst = out.data();
  for (int y = 0; y < out_height; ++y) {
    const double vc = y + 0.5;
    for (int x = 0; x < out_width; ++x) {
      const double uc = x + 0.5;
      const double hx = h(0, 0) * uc + h(0, 1) * vc + h(0, 2);
      const double hy = h(1, 0) * uc + h(1, 1) * vc + h(1, 2);
      const double hw = h(2, 0) * uc + h(2, 1) * vc + h(2, 2);
      double* pixel = dst + (static_cast<std::size_t>(y) * out_width + x) * channels;
      if (!(std::abs(hw) > 1e-300) || !std::isfinite(hw)) {
        for (int c = 0; c < channels; ++c) pixel[c] = 0.0;
        continue;
      }
      const double inv = 1.0 / hw;
      sample_bilinear(src, sh, sw, channels, hx * inv, hy * inv, pixel);
    }
  }
  return out;
}

PlaneStack warp_stack(const PlaneStack& stack, const Camera& tgt,
                      int threads) {
  stack.validate();
  tgt.validate();
  const int th = tgt.intrinsics.height;
  const int tw = tgt.intrinsics.width;
  PlaneStack out;
  out.source_camera = tgt;
  out.schedule = stack.schedule;
  out.planes.resize(stack.planes.size());
  const int workers = resolve_threads(threads);
  parallel_chunks(stack.plane_count(), workers, [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const RadiancePlane& plane = stack.planes[static_cast<std::size_t>(i)];
      const Eigen::Matrix3d h =
          plane_homography(stack.source_camera, tgt, plane.depth);
      RadiancePlane warped;
      warped.color = warp_plane(plane.color, h, th, tw);
      warped.density = warp_plane(plane.density, h, th, tw);
      warped.disparity = plane.disparity;
      warped.depth = plane.depth;
      out.planes[static_cast<std::size_t>(i)] = std::move(warped);
    }
  });
  return out;
}

RenderOutput render_view(const PlaneStack& stack, const Camera& tgt,
                         CompositingMode mode, int threads) {
  stack.validate();
  tgt.validate();
  const double t_start = now_seconds();

  const int n = stack.plane_count();
  const int sh = stack.height();
  const int sw = stack.width();
  const int th = tgt.intrinsics.height;
  const int tw = tgt.intrinsics.width;

  // One homography per plane; per pixel the warp reduces to one fused
  // multiply-add per coordinate (the row terms are hoisted) plus the
  // perspective divide.
  std::vector<std::array<double, 9>> homographies(static_cast<std::size_t>(n));
  std::vector<const double*> color_data(static_cast<std::size_t>(n));
  std::vector<const double*> density_data(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Eigen::Matrix3d h = plane_homography(
        stack.source_camera, tgt, stack.planes[static_cast<std::size_t>(i)].depth);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        homographies[static_cast<std::size_t>(i)]
                    [static_cast<std::size_t>(r) * 3 + c] = h(r, c);
      }
    }
    color_data[static_cast<std::size_t>(i)] =
        stack.planes[static_cast<std::size_t>(i)].color.data();
    density_data[static_cast<std::size_t>(i)] =
        stack.planes[static_cast<std::size_t>(i)].density.data();
  }

  const PlaneGeometry geom(stack, tgt);
  const Eigen::Matrix3d rt = tgt.pose.rotation.transpose();
  const CameraIntrinsics& k = tgt.intrinsics;
  // Pixel ray directions are affine in the pixel coordinates: dir =
  // dir_base + uc * dir_du + vc * dir_dv in world space.
  const Eigen::Vector3d dir_du = rt.col(0) / k.fx;
  const Eigen::Vector3d dir_dv = rt.col(1) / k.fy;
  const Eigen::Vector3d dir_base =
      rt.col(2) - rt.col(0) * (k.cx / k.fx) - rt.col(1) * (k.cy / k.fy);
  const bool volumetric = mode == CompositingMode::kVolumetric;

  RenderOutput out;
  out.image = Tensor({th, tw, 3});
  out.acc_alpha = Tensor({th, tw, 1});
  double* image = out.image.data();
  double* acc = out.acc_alpha.data();

  const int workers = resolve_threads(threads);
  parallel_chunks(th, workers, [&](int row_begin, int row_end) {
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<double> delta(static_cast<std::size_t>(n));
    std::vector<double> row_hx(static_cast<std::size_t>(n));
    std::vector<double> row_hy(static_cast<std::size_t>(n));
    std::vector<double> row_hw(static_cast<std::size_t>(n));
    for (int y = row_begin; y < row_end; ++y) {
      const double vc = y + 0.5;
      for (int i = 0; i < n; ++i) {
        const double* h = homographies[static_cast<std::size_t>(i)].data();
        row_hx[static_cast<std::size_t>(i)] = h[1] * vc + h[2];
        row_hy[static_cast<std::size_t>(i)] = h[4] * vc + h[5];
        row_hw[static_cast<std::size_t>(i)] = h[7] * vc + h[8];
      }
      const Eigen::Vector3d dir_row = dir_base + vc * dir_dv;
      for (int x = 0; x < tw; ++x) {
        const double uc = x + 0.5;
        // World ray direction (not normalized): the plane hit parameters
        // only need its component along the plane normal.
        const Eigen::Vector3d dir = dir_row + uc * dir_du;
        const double m = geom.normal.dot(dir) / dir.norm();
        if (!(std::abs(m) > 1e-12) || !std::isfinite(m)) {
          continue;  // ray never crosses the plane family
        }
        ray_intervals(geom, 1.0 / m, stack, s.data(), delta.data());

        double r = 0.0, g = 0.0, b = 0.0, a = 0.0;
        double remaining = 1.0;
        for (int i = 0; i < n; ++i) {
          if (remaining < 1e-14) break;  // ray is saturated
          if (!(s[static_cast<std::size_t>(i)] > kMinRayDistance)) {
            continue;  // plane behind the target camera for this pixel
          }
          const double* h = homographies[static_cast<std::size_t>(i)].data();
          const double hw = h[6] * uc + row_hw[static_cast<std::size_t>(i)];
          if (!(std::abs(hw) > 1e-300) || !std::isfinite(hw)) continue;
          const double inv = 1.0 / hw;
          const double hx = h[0] * uc + row_hx[static_cast<std::size_t>(i)];
          const double hy = h[3] * uc + row_hy[static_cast<std::size_t>(i)];
          BilinearTaps taps;
          taps.locate(hx * inv, hy * inv, sh, sw);
          const double sigma =
              taps.sample1(density_data[static_cast<std::size_t>(i)], sh, sw);
          if (sigma <= 0.0) continue;  // transparent: color is irrelevant
          double sample[3];
          taps.sample3(color_data[static_cast<std::size_t>(i)], sh, sw,
                       sample);
          // Identical arithmetic either way; the two compositing rules are
          // kept as separate expressions of the same interval opacity.
          double weight;
          if (volumetric) {
            const double decay =
                std::exp(-sigma * delta[static_cast<std::size_t>(i)]);
            weight = remaining * (1.0 - decay);
            remaining *= decay;
          } else {
            const double alpha = -std::expm1(
                -sigma * delta[static_cast<std::size_t>(i)]);
            weight = remaining * alpha;
            remaining *= 1.0 - alpha;
          }
          r += weight * sample[0];
          g += weight * sample[1];
          b += weight * sample[2];
          a += weight;
        }
        double* pixel = image + (static_cast<std::size_t>(y) * tw + x) * 3;
        pixel[0] = r;
        pixel[1] = g;
        pixel[2] = b;
        acc[static_cast<std::size_t>(y) * tw + x] = a;
      }
    }
  });

  out.wall_time_s = now_seconds() - t_start;
  return out;
}

RenderOutput raymarch_oracle(const PlaneStack& stack, const Camera& tgt,
                             int threads) {
  stack.validate();
  tgt.validate();
  const double t_start = now_seconds();

  const int n = stack.plane_count();
  const int sh = stack.height();
  const int sw = stack.width();
  const int th = tgt.intrinsics.height;
  const int tw = tgt.intrinsics.width;
  const Camera& src = stack.source_camera;
  const CameraIntrinsics& ks = src.intrinsics;

  // World-space plane equations, independent of the render_view path.
  const Eigen::Vector3d normal = src.pose.rotation.row(2).transpose();
  std::vector<double> plane_offset(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    plane_offset[static_cast<std::size_t>(i)] =
        stack.planes[static_cast<std::size_t>(i)].depth -
        src.pose.translation.z();
  }

  RenderOutput out;
  out.image = Tensor({th, tw, 3});
  out.acc_alpha = Tensor({th, tw, 1});
  double* image = out.image.data();
  double* acc = out.acc_alpha.data();

  const int workers = resolve_threads(threads);
  parallel_chunks(th, workers, [&](int row_begin, int row_end) {
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<double> delta(static_cast<std::size_t>(n));
    std::vector<DensitySample> samples;
    samples.reserve(static_cast<std::size_t>(n));
    for (int y = row_begin; y < row_end; ++y) {
      for (int x = 0; x < tw; ++x) {
        const Ray ray = pixel_ray(tgt, x + 0.5, y + 0.5);
        const double along_normal = normal.dot(ray.direction);
        const double base = normal.dot(ray.origin);

        samples.clear();
        if (std::abs(along_normal) > 1e-12) {
          for (int i = 0; i < n; ++i) {
            s[static_cast<std::size_t>(i)] =
                (plane_offset[static_cast<std::size_t>(i)] - base) /
                along_normal;
          }
          if (n == 1) {
            delta[0] = stack.planes[0].depth;
          } else {
            for (int i = 0; i + 1 < n; ++i) {
              delta[static_cast<std::size_t>(i)] = std::abs(
                  s[static_cast<std::size_t>(i + 1)] -
                  s[static_cast<std::size_t>(i)]);
            }
            delta[static_cast<std::size_t>(n - 1)] =
                delta[static_cast<std::size_t>(n - 2)];
          }
          for (int i = 0; i < n; ++i) {
            const double si = s[static_cast<std::size_t>(i)];
            if (!(si > kMinRayDistance)) continue;  // behind the camera
            const Eigen::Vector3d hit = ray.origin + si * ray.direction;
            const Eigen::Vector3d in_src =
                src.pose.rotation * hit + src.pose.translation;
            if (!(in_src.z() > kMinRayDistance)) continue;
            const double us = ks.fx * in_src.x() / in_src.z() + ks.cx;
            const double vs = ks.fy * in_src.y() / in_src.z() + ks.cy;
            double color_sample[3];
            double density_sample[1];
            sample_bilinear(
                stack.planes[static_cast<std::size_t>(i)].color.data(), sh,
                sw, 3, us, vs, color_sample);
            sample_bilinear(
                stack.planes[static_cast<std::size_t>(i)].density.data(), sh,
                sw, 1, us, vs, density_sample);
            if (density_sample[0] <= 0.0) continue;
            samples.push_back(DensitySample{
                {color_sample[0], color_sample[1], color_sample[2]},
                density_sample[0],
                delta[static_cast<std::size_t>(i)]});
          }
        }
        const CompositeResult composed = volume_render(samples);
        double* pixel = image + (static_cast<std::size_t>(y) * tw + x) * 3;
        pixel[0] = composed.color[0];
        pixel[1] = composed.color[1];
        pixel[2] = composed.color[2];
        acc[static_cast<std::size_t>(y) * tw + x] = composed.alpha;
      }
    }
  });

  out.wall_time_s = now_seconds() - t_start;
  return out;
}

BenchReport bench_render(const PlaneStack& stack,
                         std::span<const Camera> targets, int reps,
                         int threads, int warmup) {
  if (reps < 1) {
    throw DomainError("bench repetitions must be at least 1");
  }
  if (targets.empty()) {
    throw DomainError("bench needs at least one target camera");
  }
  if (warmup < 0) {
    throw DomainError("warm-up frame count must be non-negative");
  }
  stack.validate();
  const int workers = resolve_threads(threads);

  const auto run = [&](auto&& frame, const char* name) {
    for (int i = 0; i < warmup; ++i) {
      frame(targets[static_cast<std::size_t>(i) % targets.size()]);
    }
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(reps) * targets.size());
    for (int rep = 0; rep < reps; ++rep) {
      for (const Camera& cam : targets) {
        const double t0 = now_seconds();
        frame(cam);
        times.push_back(now_seconds() - t0);
      }
    }
    double mean = 0.0;
    for (double t : times) mean += t;
    mean /= static_cast<double>(times.size());
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    const double median = sorted.size() % 2 == 1
                              ? sorted[mid]
                              : 0.5 * (sorted[mid - 1] + sorted[mid]);
    BenchEntry entry;
    entry.method = name;
    entry.h = targets[0].intrinsics.height;
    entry.w = targets[0].intrinsics.width;
    entry.n_planes = stack.plane_count();
    entry.reps = reps;
    entry.mean_s = mean;
    entry.median_s = median;
    entry.threads = workers;
    entry.warmup_frames = warmup;
    return entry;
  };

  BenchReport report;
  report.entries.push_back(run(
      [&](const Camera& cam) {
        render_view(stack, cam, CompositingMode::kVolumetric, workers);
      },
      "render_view"));
  report.entries.push_back(run(
      [&](const Camera& cam) { raymarch_oracle(stack, cam, workers); },
      "raymarch_oracle"));
  return report;
}

}  // namespace planefield
