#include <benchmark/benchmark.h>

#include <random>

#include "planefield/autodiff.hpp"
#include "planefield/fusion.hpp"
#include "planefield/metrics.hpp"
#include "planefield/renderer.hpp"
#include "planefield/scene_io.hpp"

namespace {

using namespace planefield;

Camera camera_at(int size, double x) {
  Camera cam;
  cam.intrinsics.width = cam.intrinsics.height = size;
  cam.intrinsics.fx = cam.intrinsics.fy = 100.0;
  cam.intrinsics.cx = cam.intrinsics.cy = size / 2.0;
  cam.pose.translation = Eigen::Vector3d(-x, 0.0, 0.0);
  return cam;
}

SceneSpec bench_scene(int size, int planes) {
  SceneSpec spec;
  spec.source_camera = camera_at(size, 0.0);
  spec.plane_count = planes;
  spec.d_min = 0.25;
  spec.d_max = 1.0;
  QuadSpec checker;
  checker.z = 2.0;
  checker.half_width = checker.half_height = 0.6;
  checker.texture = QuadTexture::kChecker;
  checker.checker_size = 0.15;
  spec.quads.push_back(checker);
  QuadSpec backdrop;
  backdrop.z = 3.5;
  backdrop.half_width = backdrop.half_height = 1.2;
  backdrop.texture = QuadTexture::kGradient;
  backdrop.color_a = {1.0, 0.2, 0.1};
  backdrop.color_b = {0.1, 0.9, 0.4};
  spec.quads.push_back(backdrop);
  return spec;
}

void BM_RenderView(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int planes = static_cast<int>(state.range(1));
  const GeneratedScene scene = generate_scene(bench_scene(size, planes));
  const Camera target = camera_at(size, 0.1);
  for (auto _ : state) {
    const RenderOutput out = render_view(scene.stack, target);
    benchmark::DoNotOptimize(out.image.data());
  }
  state.SetItemsProcessed(state.iterations() * size * size * planes);
}
BENCHMARK(BM_RenderView)
    ->Args({64, 8})
    ->Args({128, 32})
    ->Unit(benchmark::kMillisecond);

void BM_RaymarchOracle(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int planes = static_cast<int>(state.range(1));
  const GeneratedScene scene = generate_scene(bench_scene(size, planes));
  const Camera target = camera_at(size, 0.1);
  for (auto _ : state) {
    const RenderOutput out = raymarch_oracle(scene.stack, target);
    benchmark::DoNotOptimize(out.image.data());
  }
  state.SetItemsProcessed(state.iterations() * size * size * planes);
}
BENCHMARK(BM_RaymarchOracle)
    ->Args({64, 8})
    ->Args({128, 32})
    ->Unit(benchmark::kMillisecond);

void BM_WarpPlane(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const GeneratedScene scene = generate_scene(bench_scene(size, 4));
  const Camera target = camera_at(size, 0.1);
  const Eigen::Matrix3d h =
      plane_homography(scene.stack.source_camera, target, 2.0);
  for (auto _ : state) {
    const Tensor out = warp_plane(scene.stack.planes[0].color, h, size, size);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_WarpPlane)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  Tensor a({size, size, 3});
  Tensor b({size, size, 3});
  for (std::int64_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    b[i] = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(ssim(a, b));
  }
}
BENCHMARK(BM_Ssim)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_AttentionFusion(benchmark::State& state) {
  const int views = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  FeaturePlaneSet set;
  set.source_index = 0;
  for (int b = 0; b < views; ++b) {
    Tensor features({16, 16, 8});
    for (std::int64_t i = 0; i < features.size(); ++i) {
      features[i] = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
    }
    set.features.push_back(std::move(features));
    set.cameras.push_back(camera_at(16, 0.1 * b));
  }
  AttentionFusionConfig config;
  config.feature_channels = 8;
  const LayerParams params = init_attention_fusion_params(config, 3);
  for (auto _ : state) {
    const FusionResult out = fuse_pre_attention(set, params);
    benchmark::DoNotOptimize(out.fused.data());
  }
}
BENCHMARK(BM_AttentionFusion)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
