#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "planefield/geometry.hpp"
#include "planefield/renderer.hpp"
#include "planefield/tensor.hpp"

namespace planefield {

// ---------------------------------------------------------------------------
// Plane-stack container (.plns)
//
//   bytes 0..3    magic "PLNS"
//   bytes 4..5    version  u16 = 1
//   bytes 6..9    H        u32
//   bytes 10..13  W        u32
//   bytes 14..17  N        u32
//   then N float32 disparities, strictly descending (near-to-far), positive
//   then N planes of H*W*4 float32 (R, G, B, sigma), row-major
//
// Everything little-endian. Colors must land in [0, 1] and densities must be
// non-negative; violations are format errors reported with their byte
// offset. The container carries no camera: read_stack attaches the canonical
// camera (see default_camera), callers override it from a sidecar or flag.
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kPlnsVersion = 1;

/// Canonical camera for a bare stack: fx = fy = max(W, H), principal point
/// at the image center, identity pose.
Camera default_camera(int width, int height);

/// Conventional sidecar path holding a stack's source camera: "<stack>.cam.json".
std::filesystem::path stack_camera_sidecar(const std::filesystem::path& stack_path);

PlaneStack read_stack(const std::filesystem::path& path);
void write_stack(const PlaneStack& stack, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Camera JSON: {"fx","fy","cx","cy","width","height","R":[9 row-major],"t":[3]}
// [R|t] maps world coordinates to camera coordinates.
// ---------------------------------------------------------------------------

Camera parse_camera_json(const std::string& json_text);
std::string camera_json(const Camera& cam);
Camera read_camera(const std::filesystem::path& path);
void write_camera(const Camera& cam, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic scenes: textured fronto-parallel quads in the source camera
// frame, with an analytic ground-truth projection for any camera.
// ---------------------------------------------------------------------------

enum class QuadTexture { kChecker, kGradient, kSolid };

struct QuadSpec {
  double z = 1.0;           // depth in the source camera frame
  double center_x = 0.0;    // quad center, source camera frame
  double center_y = 0.0;
  double half_width = 0.5;  // extents in scene units
  double half_height = 0.5;
  QuadTexture texture = QuadTexture::kSolid;
  double checker_size = 0.25;  // cell edge for kChecker, scene units
  std::array<double, 3> color_a = {1.0, 1.0, 1.0};
  std::array<double, 3> color_b = {0.0, 0.0, 0.0};
  double opacity = 1.0;  // (0, 1]
};

enum class SamplingMode { kFixed, kStratified };

struct SceneSpec {
  Camera source_camera;
  int plane_count = 8;
  double d_min = 0.25;
  double d_max = 1.0;
  SamplingMode sampling = SamplingMode::kFixed;
  std::uint64_t seed = 0;
  std::vector<QuadSpec> quads;
};

SceneSpec parse_scene_spec_json(const std::string& json_text);
SceneSpec read_scene_spec(const std::filesystem::path& path);

struct GeneratedScene {
  PlaneStack stack;
  /// Analytic projection of the quads (painter's order, near over far) into
  /// any camera; returns an (H, W, 3) image.
  std::function<Tensor(const Camera&)> ground_truth;
};

/// Rasterizes each quad into the stack plane nearest to its depth (ties go
/// to the nearer plane), opaque quads with enough density to saturate an
/// interval (sigma * delta >= 50), and returns the stack together with the
/// analytic ground-truth renderer. Quads outside the stack's depth range
/// throw DomainError.
GeneratedScene generate_scene(const SceneSpec& spec);

}  // namespace planefield
