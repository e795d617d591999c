#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "planefield/errors.hpp"
#include "planefield/fusion.hpp"
#include "planefield/image_io.hpp"
#include "planefield/metrics.hpp"
#include "planefield/parallel.hpp"
#include "planefield/renderer.hpp"
#include "planefield/scene_io.hpp"

namespace planefield::cli {

namespace {

using nlohmann::json;

constexpr int kOk = 0;
constexpr int kValidationError = 1;
constexpr int kIoError = 2;

// Source-camera resolution for a bare stack: explicit flag, then the
// "<stack>.cam.json" sidecar, then the canonical camera read_stack attached.
PlaneStack load_stack(const std::string& stack_path,
                      const std::string& camera_flag) {
  PlaneStack stack = read_stack(stack_path);
  if (!camera_flag.empty()) {
    stack.source_camera = read_camera(camera_flag);
  } else {
    const std::filesystem::path sidecar = stack_camera_sidecar(stack_path);
    if (std::filesystem::exists(sidecar)) {
      stack.source_camera = read_camera(sidecar);
    }
  }
  if (stack.source_camera.intrinsics.width != stack.width() ||
      stack.source_camera.intrinsics.height != stack.height()) {
    throw DomainError("source camera dimensions do not match the stack");
  }
  return stack;
}

json bench_entry_json(const BenchEntry& entry) {
  json j;
  j["method"] = entry.method;
  j["h"] = entry.h;
  j["w"] = entry.w;
  j["n_planes"] = entry.n_planes;
  j["reps"] = entry.reps;
  j["mean_s"] = entry.mean_s;
  j["median_s"] = entry.median_s;
  j["threads"] = entry.threads;
  j["warmup_frames"] = entry.warmup_frames;
  return j;
}

struct RenderArgs {
  std::string stack_path;
  std::string target_camera_path;
  std::string source_camera_path;
  std::string output_path;
  std::string acc_output_path;
  std::string mode = "volumetric";
  bool oracle = false;
  int threads = 0;
};

int cmd_render(const RenderArgs& args) {
  const PlaneStack stack = load_stack(args.stack_path, args.source_camera_path);
  const Camera target = read_camera(args.target_camera_path);
  RenderOutput out;
  if (args.oracle) {
    out = raymarch_oracle(stack, target, args.threads);
  } else {
    const CompositingMode mode = args.mode == "alpha"
                                     ? CompositingMode::kAlpha
                                     : CompositingMode::kVolumetric;
    out = render_view(stack, target, mode, args.threads);
  }
  write_png(out.image, args.output_path);
  if (!args.acc_output_path.empty()) {
    write_png(out.acc_alpha, args.acc_output_path);
  }
  std::cerr << "rendered " << out.image.dim(1) << "x" << out.image.dim(0)
            << " in " << out.wall_time_s << " s\n";
  return kOk;
}

struct CompareArgs {
  std::string stack_path;
  std::string target_camera_path;
  std::string source_camera_path;
  int threads = 0;
};

int cmd_compare_compositing(const CompareArgs& args) {
  const PlaneStack stack = load_stack(args.stack_path, args.source_camera_path);
  const Camera target = read_camera(args.target_camera_path);
  const RenderOutput alpha =
      render_view(stack, target, CompositingMode::kAlpha, args.threads);
  const RenderOutput volumetric =
      render_view(stack, target, CompositingMode::kVolumetric, args.threads);
  double max_diff = 0.0;
  double sum_diff = 0.0;
  for (std::int64_t i = 0; i < alpha.image.size(); ++i) {
    const double d = std::abs(alpha.image[i] - volumetric.image[i]);
    max_diff = std::max(max_diff, d);
    sum_diff += d;
  }
  json report;
  report["h"] = alpha.image.dim(0);
  report["w"] = alpha.image.dim(1);
  report["n_planes"] = stack.plane_count();
  report["max_abs_diff"] = max_diff;
  report["mean_abs_diff"] = sum_diff / static_cast<double>(alpha.image.size());
  std::cout << report.dump(2) << "\n";
  return kOk;
}

struct FuseArgs {
  std::string method;
  std::vector<std::string> inputs;
  std::vector<std::string> view_camera_paths;
  std::string target_camera_path;
  std::string params_path;
  std::string save_params_path;
  std::string output_path;
  std::string masks_prefix;
  int source_index = 0;
  std::uint64_t seed = 0;
  int threads = 0;
};

std::vector<PlaneStack> load_view_stacks(const FuseArgs& args) {
  if (!args.view_camera_paths.empty() &&
      args.view_camera_paths.size() != args.inputs.size()) {
    throw DomainError("--view-cam must be given once per input");
  }
  std::vector<PlaneStack> stacks;
  stacks.reserve(args.inputs.size());
  for (std::size_t i = 0; i < args.inputs.size(); ++i) {
    const std::string cam_flag = args.view_camera_paths.empty()
                                     ? std::string()
                                     : args.view_camera_paths[i];
    stacks.push_back(load_stack(args.inputs[i], cam_flag));
  }
  return stacks;
}

int cmd_fuse_post(const FuseArgs& args) {
  if (args.target_camera_path.empty()) {
    throw DomainError("post-decoder fusion needs --target-cam");
  }
  const Camera target = read_camera(args.target_camera_path);
  const std::vector<PlaneStack> stacks = load_view_stacks(args);
  std::vector<Camera> view_cams;
  view_cams.reserve(stacks.size());
  std::vector<PlaneStack> warped;
  warped.reserve(stacks.size());
  for (const PlaneStack& stack : stacks) {
    view_cams.push_back(stack.source_camera);
    warped.push_back(warp_stack(stack, target, args.threads));
  }
  const PlaneStack fused =
      args.method == "post-avg"
          ? fuse_post_average(warped)
          : fuse_post_weighted(warped, view_cams, target);
  write_stack(fused, args.output_path);
  write_camera(target, stack_camera_sidecar(args.output_path));
  std::cerr << "fused " << warped.size() << " stacks -> " << args.output_path
            << "\n";
  return kOk;
}

// Pre-decoder fusion consumes stacks as feature maps: the first plane's
// four channels (R, G, B, sigma) of each input become that view's features.
FeaturePlaneSet feature_set_from_stacks(const FuseArgs& args,
                                        const std::vector<PlaneStack>& stacks) {
  FeaturePlaneSet set;
  set.source_index = args.source_index;
  for (const PlaneStack& stack : stacks) {
    set.cameras.push_back(stack.source_camera);
  }
  for (const PlaneStack& stack : stacks) {
    const RadiancePlane& plane = stack.planes.at(0);
    Tensor features({stack.height(), stack.width(), 4});
    for (int y = 0; y < stack.height(); ++y) {
      for (int x = 0; x < stack.width(); ++x) {
        features(y, x, 0) = plane.color(y, x, 0);
        features(y, x, 1) = plane.color(y, x, 1);
        features(y, x, 2) = plane.color(y, x, 2);
        features(y, x, 3) = plane.density(y, x, 0);
      }
    }
    set.features.push_back(std::move(features));
  }
  return set;
}

int cmd_fuse_pre(const FuseArgs& args) {
  const std::vector<PlaneStack> stacks = load_view_stacks(args);
  const FeaturePlaneSet set = feature_set_from_stacks(args, stacks);
  set.validate();

  Tensor fused;
  std::vector<Tensor> masks;
  LayerParams params;
  if (args.method == "pre-fixed") {
    if (!args.params_path.empty()) {
      params = load_params(args.params_path);
    } else {
      FixedFusionConfig config;
      config.view_count = set.view_count();
      config.feature_channels = set.channels();
      params = init_fixed_fusion_params(config, args.seed);
    }
    const auto encodings = make_view_encodings(
        set, static_cast<int>(params.meta.at("frequency_bands")));
    fused = fuse_pre_fixed(set, encodings, params);
  } else {
    if (!args.params_path.empty()) {
      params = load_params(args.params_path);
    } else {
      AttentionFusionConfig config;
      config.feature_channels = set.channels();
      params = init_attention_fusion_params(config, args.seed);
    }
    FusionResult result = fuse_pre_attention(set, params);
    fused = std::move(result.fused);
    masks = std::move(result.masks);
  }

  write_float_tensor(fused, args.output_path);
  const std::string prefix = args.masks_prefix.empty()
                                 ? args.output_path + "_mask_"
                                 : args.masks_prefix;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    write_png(masks[i], prefix + std::to_string(i) + ".png");
  }
  if (!args.save_params_path.empty()) {
    save_params(params, args.save_params_path);
  }
  std::cerr << "fused " << set.view_count() << " views -> "
            << args.output_path << "\n";
  return kOk;
}

struct BenchArgs {
  std::string stack_path;
  std::vector<std::string> target_camera_paths;
  std::string source_camera_path;
  int reps = 10;
  int warmup = 3;
  int threads = -1;  // -1: report single- and multi-threaded modes
};

int cmd_bench(const BenchArgs& args) {
  const PlaneStack stack = load_stack(args.stack_path, args.source_camera_path);
  std::vector<Camera> targets;
  targets.reserve(args.target_camera_paths.size());
  for (const std::string& path : args.target_camera_paths) {
    targets.push_back(read_camera(path));
  }
  std::vector<int> thread_modes;
  if (args.threads >= 0) {
    thread_modes.push_back(args.threads);
  } else {
    thread_modes.push_back(1);
    const int automatic = resolve_threads(0);
    if (automatic != 1) {
      thread_modes.push_back(automatic);
    }
  }
  json entries = json::array();
  for (int mode : thread_modes) {
    const BenchReport report =
        bench_render(stack, targets, args.reps, mode, args.warmup);
    for (const BenchEntry& entry : report.entries) {
      entries.push_back(bench_entry_json(entry));
    }
  }
  std::cout << entries.dump(2) << "\n";
  return kOk;
}

int cmd_metrics(const std::vector<std::string>& images) {
  if (images.size() < 2 || images.size() % 2 != 0) {
    throw DomainError("metrics expects image pairs");
  }
  json pairs = json::array();
  double psnr_sum = 0.0;
  double ssim_sum = 0.0;
  const std::size_t pair_count = images.size() / 2;
  for (std::size_t i = 0; i < images.size(); i += 2) {
    const Tensor a = read_png(images[i]);
    const Tensor b = read_png(images[i + 1]);
    const double p = psnr(a, b);
    const double s = ssim(a, b);
    psnr_sum += p;
    ssim_sum += s;
    json entry;
    entry["a"] = images[i];
    entry["b"] = images[i + 1];
    entry["psnr_db"] = p;
    entry["ssim"] = s;
    entry["lpips"] = nullptr;
    pairs.push_back(entry);
  }
  json report;
  report["psnr_db"] = psnr_sum / static_cast<double>(pair_count);
  report["ssim"] = ssim_sum / static_cast<double>(pair_count);
  report["lpips"] = nullptr;
  report["pairs"] = pairs;
  std::cout << report.dump(2) << "\n";
  return kOk;
}

struct GradcheckArgs {
  std::string method = "pre-attn";
  std::string params_path;
  std::uint64_t seed = 0;
  int views = 3;
  int height = 8;
  int width = 8;
  int channels = 4;
  double step = 1e-5;
  double threshold = 1e-4;
};

int cmd_gradcheck(const GradcheckArgs& args) {
  if (args.views < 1 || args.height < 1 || args.width < 1 ||
      args.channels < 1) {
    throw DomainError("gradcheck dimensions must be positive");
  }
  std::mt19937_64 engine(args.seed ^ 0x9e3779b97f4a7c15ull);
  const auto uniform = [&engine] {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
  };

  FeaturePlaneSet set;
  set.source_index = 0;
  for (int b = 0; b < args.views; ++b) {
    Tensor features({args.height, args.width, args.channels});
    for (std::int64_t i = 0; i < features.size(); ++i) {
      features[i] = 2.0 * uniform() - 1.0;
    }
    set.features.push_back(std::move(features));
    Camera cam = default_camera(args.width, args.height);
    cam.pose.translation =
        Eigen::Vector3d(0.2 * b, -0.1 * b, 0.05 * b);
    set.cameras.push_back(cam);
  }

  FusionProbe probe;
  LayerParams params;
  if (args.method == "pre-fixed") {
    if (!args.params_path.empty()) {
      params = load_params(args.params_path);
    } else {
      FixedFusionConfig config;
      config.view_count = args.views;
      config.feature_channels = args.channels;
      params = init_fixed_fusion_params(config, args.seed);
    }
    const auto encodings = make_view_encodings(
        set, static_cast<int>(params.meta.at("frequency_bands")));
    probe = make_fixed_fusion_probe(set, encodings, params);
  } else if (args.method == "pre-attn") {
    if (!args.params_path.empty()) {
      params = load_params(args.params_path);
    } else {
      AttentionFusionConfig config;
      config.feature_channels = args.channels;
      params = init_attention_fusion_params(config, args.seed);
    }
    probe = make_attention_fusion_probe(set, params);
  } else {
    throw DomainError("gradcheck method must be pre-fixed or pre-attn");
  }

  const GradCheckReport report =
      grad_check(probe.build, probe.leaves, args.step);
  const bool passed = report.max_rel_error < args.threshold;
  json j;
  j["method"] = args.method;
  j["max_rel_error"] = report.max_rel_error;
  j["max_abs_error"] = report.max_abs_error;
  j["elements_checked"] = report.elements_checked;
  j["step"] = args.step;
  j["threshold"] = args.threshold;
  j["passed"] = passed;
  std::cout << j.dump(2) << "\n";
  return passed ? kOk : kValidationError;
}

struct GenSceneArgs {
  std::string spec_path;
  std::string output_path;
  std::string gt_camera_path;
  std::string gt_output_path;
};

int cmd_gen_scene(const GenSceneArgs& args) {
  const SceneSpec spec = read_scene_spec(args.spec_path);
  const GeneratedScene scene = generate_scene(spec);
  write_stack(scene.stack, args.output_path);
  write_camera(spec.source_camera, stack_camera_sidecar(args.output_path));
  if (!args.gt_output_path.empty()) {
    const Camera gt_camera = args.gt_camera_path.empty()
                                 ? spec.source_camera
                                 : read_camera(args.gt_camera_path);
    write_png(scene.ground_truth(gt_camera), args.gt_output_path);
  }
  std::cerr << "generated " << scene.stack.plane_count() << " planes -> "
            << args.output_path << "\n";
  return kOk;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"planefield: multi-plane radiance-field rendering toolkit"};
  app.require_subcommand(1);

  RenderArgs render_args;
  CLI::App* render = app.add_subcommand(
      "render", "Render a plane stack into a target view");
  render->add_option("stack", render_args.stack_path, "Input .plns stack")
      ->required();
  render->add_option("target-camera", render_args.target_camera_path,
                     "Target camera JSON")
      ->required();
  render->add_option("-o,--output", render_args.output_path, "Output PNG")
      ->required();
  render->add_option("--mode", render_args.mode, "Compositing mode")
      ->check(CLI::IsMember({"alpha", "volumetric"}));
  render->add_flag("--oracle", render_args.oracle,
                   "Use the brute-force ray-marching path");
  render->add_option("--source-camera", render_args.source_camera_path,
                     "Source camera JSON (default: <stack>.cam.json sidecar)");
  render->add_option("--acc-out", render_args.acc_output_path,
                     "Write the accumulated-alpha map as a gray PNG");
  render->add_option("--threads", render_args.threads,
                     "Worker threads (0 = auto)");

  CompareArgs compare_args;
  CLI::App* compare = app.add_subcommand(
      "compare-compositing",
      "Render with both compositing rules and report the difference");
  compare->add_option("stack", compare_args.stack_path, "Input .plns stack")
      ->required();
  compare->add_option("target-camera", compare_args.target_camera_path,
                      "Target camera JSON")
      ->required();
  compare->add_option("--source-camera", compare_args.source_camera_path,
                      "Source camera JSON");
  compare->add_option("--threads", compare_args.threads,
                      "Worker threads (0 = auto)");

  FuseArgs fuse_args;
  CLI::App* fuse = app.add_subcommand(
      "fuse", "Fuse multiple views (stacks or feature planes)");
  fuse->add_option("--method", fuse_args.method, "Fusion method")
      ->required()
      ->check(CLI::IsMember(
          {"post-avg", "post-weighted", "pre-fixed", "pre-attn"}));
  fuse->add_option("inputs", fuse_args.inputs, "Input .plns files, one per view")
      ->required()
      ->expected(-1);
  fuse->add_option("-o,--output", fuse_args.output_path, "Output path")
      ->required();
  fuse->add_option("--target-cam", fuse_args.target_camera_path,
                   "Target camera JSON (post-decoder methods)");
  fuse->add_option("--view-cam", fuse_args.view_camera_paths,
                   "Per-view camera JSON, once per input");
  fuse->add_option("--source-index", fuse_args.source_index,
                   "Which view is the fusion source");
  fuse->add_option("--params", fuse_args.params_path,
                   "Parameter manifest (pre-decoder methods)");
  fuse->add_option("--seed", fuse_args.seed,
                   "Parameter init seed when --params is absent");
  fuse->add_option("--masks-prefix", fuse_args.masks_prefix,
                   "Attention mask PNG prefix");
  fuse->add_option("--save-params", fuse_args.save_params_path,
                   "Write the parameters that were used");
  fuse->add_option("--threads", fuse_args.threads, "Worker threads (0 = auto)");

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand(
      "bench", "Time render_view against the ray-marching reference");
  bench->add_option("stack", bench_args.stack_path, "Input .plns stack")
      ->required();
  bench->add_option("target-cameras", bench_args.target_camera_paths,
                    "Target camera JSON files")
      ->required()
      ->expected(-1);
  bench->add_option("--source-camera", bench_args.source_camera_path,
                    "Source camera JSON");
  bench->add_option("--reps", bench_args.reps, "Repetitions per target");
  bench->add_option("--warmup", bench_args.warmup, "Discarded warm-up frames");
  bench->add_option("--threads", bench_args.threads,
                    "Fix one thread count (default: report 1 and auto)");

  std::vector<std::string> metric_images;
  CLI::App* metrics_cmd =
      app.add_subcommand("metrics", "PSNR/SSIM for image pairs");
  metrics_cmd->add_option("images", metric_images, "PNG files, in pairs")
      ->required()
      ->expected(-1);

  GradcheckArgs gradcheck_args;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck",
      "Verify fusion gradients against central finite differences");
  gradcheck->add_option("--method", gradcheck_args.method, "Fusion method")
      ->check(CLI::IsMember({"pre-fixed", "pre-attn"}));
  gradcheck->add_option("--params", gradcheck_args.params_path,
                        "Parameter manifest (default: seeded init)");
  gradcheck->add_option("--seed", gradcheck_args.seed, "Init seed");
  gradcheck->add_option("--views", gradcheck_args.views, "View count B");
  gradcheck->add_option("--height", gradcheck_args.height, "Feature height");
  gradcheck->add_option("--width", gradcheck_args.width, "Feature width");
  gradcheck->add_option("--channels", gradcheck_args.channels,
                        "Feature channels");
  gradcheck->add_option("--step", gradcheck_args.step,
                        "Finite-difference step");
  gradcheck->add_option("--threshold", gradcheck_args.threshold,
                        "Maximum allowed relative error");

  GenSceneArgs gen_args;
  CLI::App* gen = app.add_subcommand(
      "gen-scene", "Generate a synthetic stack with analytic ground truth");
  gen->add_option("spec", gen_args.spec_path, "Scene spec JSON")->required();
  gen->add_option("-o,--output", gen_args.output_path, "Output .plns")
      ->required();
  gen->add_option("--gt-camera", gen_args.gt_camera_path,
                  "Camera for the ground-truth render (default: source)");
  gen->add_option("--gt-out", gen_args.gt_output_path,
                  "Ground-truth PNG output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message and usage hint
    return kValidationError;
  }

  if (render->parsed()) return cmd_render(render_args);
  if (compare->parsed()) return cmd_compare_compositing(compare_args);
  if (fuse->parsed()) {
    if (fuse_args.method == "post-avg" || fuse_args.method == "post-weighted") {
      return cmd_fuse_post(fuse_args);
    }
    return cmd_fuse_pre(fuse_args);
  }
  if (bench->parsed()) return cmd_bench(bench_args);
  if (metrics_cmd->parsed()) return cmd_metrics(metric_images);
  if (gradcheck->parsed()) return cmd_gradcheck(gradcheck_args);
  if (gen->parsed()) return cmd_gen_scene(gen_args);
  return kValidationError;
}

}  // namespace

int run(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kIoError;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationError;
  }
}

}  // namespace planefield::cli
