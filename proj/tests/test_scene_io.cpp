#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "planefield/image_io.hpp"
#include "planefield/metrics.hpp"
#include "planefield/renderer.hpp"
#include "planefield/scene_io.hpp"
#include "test_util.hpp"

using namespace planefield;
using test::make_camera;
using test::make_camera_at;
using test::uniform;
using test::uniform01;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("pf_scene_io_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

// Stack with float32-representable values so round trips are bit-exact.
PlaneStack random_f32_stack(std::mt19937_64& rng, int h, int w, int n) {
  PlaneStack stack;
  stack.source_camera = default_camera(w, h);
  stack.schedule = fixed_disparities(n, 0.25f, 1.0f);
  for (double& d : stack.schedule.disparities) {
    d = static_cast<double>(static_cast<float>(d));
  }
  stack.schedule.d_max = stack.schedule.disparities.front();
  stack.schedule.d_min = stack.schedule.disparities.back();
  for (int i = 0; i < n; ++i) {
    RadiancePlane plane;
    plane.disparity = stack.schedule.disparities[static_cast<std::size_t>(i)];
    plane.depth = 1.0 / plane.disparity;
    plane.color = Tensor({h, w, 3});
    plane.density = Tensor({h, w, 1});
    for (std::int64_t j = 0; j < plane.color.size(); ++j) {
      plane.color[j] = static_cast<float>(uniform01(rng));
    }
    for (std::int64_t j = 0; j < plane.density.size(); ++j) {
      plane.density[j] = static_cast<float>(uniform(rng, 0.0, 8.0));
    }
    stack.planes.push_back(std::move(plane));
  }
  return stack;
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

void spit(const std::filesystem::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

bool stacks_equal(const PlaneStack& a, const PlaneStack& b) {
  if (a.planes.size() != b.planes.size()) return false;
  if (a.schedule.disparities != b.schedule.disparities) return false;
  for (std::size_t i = 0; i < a.planes.size(); ++i) {
    if (std::memcmp(a.planes[i].color.data(), b.planes[i].color.data(),
                    static_cast<std::size_t>(a.planes[i].color.size()) *
                        sizeof(double)) != 0) {
      return false;
    }
    if (std::memcmp(a.planes[i].density.data(), b.planes[i].density.data(),
                    static_cast<std::size_t>(a.planes[i].density.size()) *
                        sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

SceneSpec checker_scene(int n = 8) {
  SceneSpec spec;
  spec.source_camera = make_camera(64, 64);
  spec.plane_count = n;
  spec.d_min = 0.25;
  spec.d_max = 1.0;
  QuadSpec quad;
  quad.z = 2.0;
  quad.half_width = quad.half_height = 0.6;
  quad.texture = QuadTexture::kChecker;
  quad.checker_size = 0.15;
  quad.color_a = {1.0, 1.0, 1.0};
  quad.color_b = {0.1, 0.2, 0.8};
  spec.quads.push_back(quad);
  return spec;
}

}  // namespace

TEST_SUITE("scene_io") {

TEST_CASE("stack files round-trip bit-exactly") {
  TempDir dir;
  std::mt19937_64 rng(301);
  for (int trial = 0; trial < 10; ++trial) {
    const int h = 2 + static_cast<int>(uniform01(rng) * 14);
    const int w = 2 + static_cast<int>(uniform01(rng) * 14);
    const int n = 1 + static_cast<int>(uniform01(rng) * 6);
    const PlaneStack stack = random_f32_stack(rng, h, w, n);
    const auto path = dir.path / "stack.plns";
    write_stack(stack, path);
    const PlaneStack loaded = read_stack(path);
    CHECK(stacks_equal(stack, loaded));
    // Re-serializing the loaded stack reproduces the file byte for byte.
    const auto again = dir.path / "stack2.plns";
    write_stack(loaded, again);
    CHECK(slurp(path) == slurp(again));
  }
}

TEST_CASE("corrupted magic is reported at byte zero") {
  TempDir dir;
  std::mt19937_64 rng(302);
  const auto path = dir.path / "stack.plns";
  write_stack(random_f32_stack(rng, 4, 4, 2), path);
  auto bytes = slurp(path);
  bytes[0] = 'X';
  spit(path, bytes);
  try {
    read_stack(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.byte_offset() == 0);
  }
}

TEST_CASE("every corruption class raises a FormatError") {
  TempDir dir;
  std::mt19937_64 rng(303);
  const auto path = dir.path / "stack.plns";
  write_stack(random_f32_stack(rng, 4, 4, 2), path);
  const std::vector<char> good = slurp(path);

  SUBCASE("unsupported version") {
    auto bytes = good;
    bytes[4] = 9;
    spit(path, bytes);
    try {
      read_stack(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset() == 4);
    }
  }
  SUBCASE("zero plane count") {
    auto bytes = good;
    bytes[14] = bytes[15] = bytes[16] = bytes[17] = 0;
    spit(path, bytes);
    try {
      read_stack(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset() == 14);
    }
  }
  SUBCASE("truncated payload") {
    auto bytes = good;
    bytes.resize(bytes.size() - 7);
    spit(path, bytes);
    CHECK_THROWS_AS(read_stack(path), FormatError);
  }
  SUBCASE("trailing bytes") {
    auto bytes = good;
    bytes.push_back(0);
    spit(path, bytes);
    CHECK_THROWS_AS(read_stack(path), FormatError);
  }
  SUBCASE("non-monotone disparities") {
    auto bytes = good;
    // Swap the two float32 disparities at offsets 18 and 22.
    std::swap_ranges(bytes.begin() + 18, bytes.begin() + 22,
                     bytes.begin() + 22);
    spit(path, bytes);
    try {
      read_stack(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset() == 22);
    }
  }
  SUBCASE("negative density") {
    auto bytes = good;
    const float bad = -1.0f;
    // First texel's sigma channel: header + 2 disparities + 3 colors.
    const std::size_t offset = 18 + 8 + 12;
    std::memcpy(bytes.data() + offset, &bad, sizeof(bad));
    spit(path, bytes);
    try {
      read_stack(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset() == offset);
    }
  }
  SUBCASE("color outside the unit range") {
    auto bytes = good;
    const float bad = 1.5f;
    const std::size_t offset = 18 + 8;  // first texel, red channel
    std::memcpy(bytes.data() + offset, &bad, sizeof(bad));
    spit(path, bytes);
    CHECK_THROWS_AS(read_stack(path), FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_stack(dir.path / "nope.plns"), IoError);
  }
}

TEST_CASE("camera JSON round-trips and validates") {
  std::mt19937_64 rng(304);
  const Camera cam = make_camera_at(64, 48, 123.0, {0.2, -0.4, 0.8},
                                    test::random_rotation(rng, 0.5));
  const Camera back = parse_camera_json(camera_json(cam));
  CHECK((back.pose.rotation - cam.pose.rotation).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.pose.translation == cam.pose.translation);
  CHECK(back.intrinsics.fx == cam.intrinsics.fx);
  CHECK(back.intrinsics.width == cam.intrinsics.width);

  CHECK_THROWS_AS(parse_camera_json("not json"), FormatError);
  CHECK_THROWS_AS(parse_camera_json("{\"fx\": 1.0}"), FormatError);
  // Structurally valid JSON with a non-orthonormal rotation.
  CHECK_THROWS_AS(
      parse_camera_json(R"({"fx":100,"fy":100,"cx":32,"cy":32,
        "width":64,"height":64,
        "R":[2,0,0, 0,1,0, 0,0,1], "t":[0,0,0]})"),
      DomainError);
}

TEST_CASE("scene specs parse with defaults and validate quads") {
  const std::string text = R"({
    "source_camera": {"fx":100,"fy":100,"cx":32,"cy":32,"width":64,"height":64,
                      "R":[1,0,0, 0,1,0, 0,0,1], "t":[0,0,0]},
    "stack": {"planes": 4, "d_min": 0.25, "d_max": 1.0},
    "quads": [{"z": 2.0, "center": [0, 0], "half_size": [0.5, 0.5]}]
  })";
  const SceneSpec spec = parse_scene_spec_json(text);
  CHECK(spec.plane_count == 4);
  CHECK(spec.sampling == SamplingMode::kFixed);
  CHECK(spec.quads[0].texture == QuadTexture::kSolid);
  CHECK(spec.quads[0].opacity == 1.0);
  CHECK_THROWS_AS(parse_scene_spec_json("{}"), FormatError);
}

TEST_CASE("quads outside the depth range are rejected") {
  SceneSpec spec = checker_scene();
  spec.quads[0].z = 9.0;  // beyond 1/d_min = 4
  CHECK_THROWS_AS(generate_scene(spec), DomainError);
  spec.quads[0].z = 0.5;  // nearer than 1/d_max = 1
  CHECK_THROWS_AS(generate_scene(spec), DomainError);
}

TEST_CASE("the source view reproduces the rasterized planes") {
  const SceneSpec spec = checker_scene();
  const GeneratedScene scene = generate_scene(spec);
  const Tensor truth = scene.ground_truth(spec.source_camera);
  const RenderOutput render = render_view(scene.stack, spec.source_camera);
  CHECK(psnr(render.image, truth) > 40.0);
}

TEST_CASE("nearer quads occlude farther ones in the ground truth") {
  SceneSpec spec = checker_scene();
  spec.quads.clear();
  QuadSpec near;
  near.z = 1.5;
  near.half_width = near.half_height = 0.3;
  near.texture = QuadTexture::kSolid;
  near.color_a = {1.0, 0.0, 0.0};
  QuadSpec far = near;
  far.z = 3.0;
  far.half_width = far.half_height = 1.0;
  far.color_a = {0.0, 1.0, 0.0};
  spec.quads = {far, near};  // listed far first on purpose
  const GeneratedScene scene = generate_scene(spec);
  const Tensor truth = scene.ground_truth(spec.source_camera);
  // Center pixel: near quad (red) wins; corner: far quad (green) shows.
  CHECK(truth(32, 32, 0) == 1.0);
  CHECK(truth(32, 32, 1) == 0.0);
  const int edge = 4;  // inside far quad's footprint, outside near quad's
  CHECK(truth(edge, 32, 0) == 0.0);
  CHECK(truth(edge, 32, 1) == 1.0);
}

TEST_CASE("generated stacks saturate rendered opacity inside quads") {
  const SceneSpec spec = checker_scene();
  const GeneratedScene scene = generate_scene(spec);
  const RenderOutput out = render_view(scene.stack, spec.source_camera);
  CHECK(out.acc_alpha(32, 32, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("PNG round trip is exact at 8 bits") {
  TempDir dir;
  Tensor img({5, 6, 3});
  for (std::int64_t i = 0; i < img.size(); ++i) {
    img[i] = static_cast<double>((i * 7) % 256) / 255.0;
  }
  const auto path = dir.path / "img.png";
  write_png(img, path);
  const Tensor back = read_png(path);
  REQUIRE(back.same_shape(img));
  for (std::int64_t i = 0; i < img.size(); ++i) {
    CHECK(back[i] == img[i]);
  }
  CHECK_THROWS_AS(read_png(dir.path / "missing.png"), IoError);
}

TEST_CASE("quantization rounds half to even") {
  TempDir dir;
  // 0.5/255 and 1.5/255 both sit exactly between two 8-bit codes.
  Tensor img({1, 2, 3});
  for (int c = 0; c < 3; ++c) {
    img(0, 0, c) = 0.5 / 255.0;
    img(0, 1, c) = 1.5 / 255.0;
  }
  const auto path = dir.path / "half.png";
  write_png(img, path);
  const Tensor back = read_png(path);
  CHECK(back(0, 0, 0) == 0.0);          // ties to 0 (even)
  CHECK(back(0, 1, 0) == 2.0 / 255.0);  // ties to 2 (even)
}

TEST_CASE("float tensors round-trip through the manifest format") {
  TempDir dir;
  std::mt19937_64 rng(305);
  Tensor t({3, 4, 2});
  for (std::int64_t i = 0; i < t.size(); ++i) {
    t[i] = uniform(rng, -5.0, 5.0);
  }
  const auto path = dir.path / "tensor.f64";
  write_float_tensor(t, path);
  const Tensor back = read_float_tensor(path);
  REQUIRE(back.same_shape(t));
  for (std::int64_t i = 0; i < t.size(); ++i) {
    CHECK(back[i] == t[i]);
  }
}

TEST_CASE("canonical cameras and sidecar paths") {
  const Camera cam = default_camera(64, 48);
  CHECK(cam.intrinsics.fx == 64.0);
  CHECK(cam.intrinsics.cx == 32.0);
  CHECK_NOTHROW(cam.validate());
  CHECK(stack_camera_sidecar("a/b/stack.plns") ==
        std::filesystem::path("a/b/stack.plns.cam.json"));
}

}  // TEST_SUITE
