#include "planefield/scene_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "planefield/sampling.hpp"

namespace planefield {

static_assert(std::endian::native == std::endian::little,
              "the stack container is little-endian");

namespace {

constexpr char kMagic[4] = {'P', 'L', 'N', 'S'};
constexpr std::size_t kHeaderBytes = 18;
constexpr double kOpaqueOpticalDepth = 50.0;  // sigma * delta for opaque quads

template <typename T>
T read_le(const std::vector<char>& buffer, std::size_t offset) {
  T value;
  std::memcpy(&value, buffer.data() + offset, sizeof(T));
  return value;
}

template <typename T>
void append_le(std::vector<char>& buffer, T value) {
  const std::size_t offset = buffer.size();
  buffer.resize(offset + sizeof(T));
  std::memcpy(buffer.data() + offset, &value, sizeof(T));
}

nlohmann::json parse_json(const std::string& text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid ") + what + ": " + e.what(), 0);
  }
}

// The compositing interval the renderer assigns to plane `i` for the source
// camera's central ray: the gap to the next plane, the previous gap for the
// last plane, the plane depth when the stack has one plane. Off-axis rays
// only see longer intervals, so densities derived from this bound saturate
// everywhere.
double axial_interval(const DisparitySchedule& schedule, int i) {
  const int n = schedule.count();
  if (n == 1) {
    return schedule.depth(0);
  }
  if (i + 1 < n) {
    return schedule.depth(i + 1) - schedule.depth(i);
  }
  return schedule.depth(n - 1) - schedule.depth(n - 2);
}

struct QuadHit {
  bool inside = false;
  std::array<double, 3> color = {0.0, 0.0, 0.0};
};

QuadHit sample_quad(const QuadSpec& quad, double x, double y) {
  QuadHit hit;
  const double lx = x - quad.center_x;
  const double ly = y - quad.center_y;
  if (std::abs(lx) > quad.half_width || std::abs(ly) > quad.half_height) {
    return hit;
  }
  hit.inside = true;
  switch (quad.texture) {
    case QuadTexture::kChecker: {
      const auto cell = [&](double v) {
        return static_cast<long long>(std::floor(v / quad.checker_size));
      };
      const bool even = ((cell(lx) + cell(ly)) % 2 + 2) % 2 == 0;
      hit.color = even ? quad.color_a : quad.color_b;
      break;
    }
    case QuadTexture::kGradient: {
      const double t = (lx + quad.half_width) / (2.0 * quad.half_width);
      for (int c = 0; c < 3; ++c) {
        hit.color[static_cast<std::size_t>(c)] =
            (1.0 - t) * quad.color_a[static_cast<std::size_t>(c)] +
            t * quad.color_b[static_cast<std::size_t>(c)];
      }
      break;
    }
    case QuadTexture::kSolid:
      hit.color = quad.color_a;
      break;
  }
  return hit;
}

}  // namespace

Camera default_camera(int width, int height) {
  Camera cam;
  cam.intrinsics.width = width;
  cam.intrinsics.height = height;
  cam.intrinsics.fx = cam.intrinsics.fy =
      static_cast<double>(std::max(width, height));
  cam.intrinsics.cx = width / 2.0;
  cam.intrinsics.cy = height / 2.0;
  return cam;
}

std::filesystem::path stack_camera_sidecar(
    const std::filesystem::path& stack_path) {
  return std::filesystem::path(stack_path.string() + ".cam.json");
}

PlaneStack read_stack(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open stack file: " + path.string());
  }
  std::vector<char> buffer((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());

  if (buffer.size() < kHeaderBytes) {
    throw FormatError("truncated stack header", buffer.size());
  }
  if (std::memcmp(buffer.data(), kMagic, 4) != 0) {
    throw FormatError("bad stack magic", 0);
  }
  const auto version = read_le<std::uint16_t>(buffer, 4);
  if (version != kPlnsVersion) {
    throw FormatError("unsupported stack version", 4);
  }
  const auto h = read_le<std::uint32_t>(buffer, 6);
  const auto w = read_le<std::uint32_t>(buffer, 10);
  const auto n = read_le<std::uint32_t>(buffer, 14);
  if (h == 0) throw FormatError("zero stack height", 6);
  if (w == 0) throw FormatError("zero stack width", 10);
  if (n == 0) throw FormatError("zero plane count", 14);
  constexpr std::uint32_t kMaxDim = 1u << 20;
  if (h > kMaxDim || w > kMaxDim || n > kMaxDim ||
      static_cast<std::uint64_t>(h) * w * n > (1ull << 32)) {
    throw FormatError("implausible stack dimensions", 6);
  }

  const std::size_t disparity_bytes = static_cast<std::size_t>(n) * 4;
  const std::size_t plane_bytes =
      static_cast<std::size_t>(h) * w * 4 * sizeof(float);
  const std::size_t expected =
      kHeaderBytes + disparity_bytes + static_cast<std::size_t>(n) * plane_bytes;
  if (buffer.size() < expected) {
    throw FormatError("truncated stack payload", buffer.size());
  }
  if (buffer.size() > expected) {
    throw FormatError("trailing data after stack payload", expected);
  }

  PlaneStack stack;
  stack.source_camera = default_camera(static_cast<int>(w),
                                       static_cast<int>(h));
  stack.schedule.disparities.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t offset = kHeaderBytes + static_cast<std::size_t>(i) * 4;
    const float d = read_le<float>(buffer, offset);
    if (!std::isfinite(d) || !(d > 0.0f)) {
      throw FormatError("disparities must be positive", offset);
    }
    if (i > 0 && !(d < stack.schedule.disparities[i - 1])) {
      throw FormatError("disparities must be strictly descending", offset);
    }
    stack.schedule.disparities[i] = static_cast<double>(d);
  }
  stack.schedule.d_max = stack.schedule.disparities.front();
  stack.schedule.d_min = stack.schedule.disparities.back();

  stack.planes.resize(n);
  const int hi = static_cast<int>(h);
  const int wi = static_cast<int>(w);
  for (std::uint32_t i = 0; i < n; ++i) {
    RadiancePlane& plane = stack.planes[i];
    plane.disparity = stack.schedule.disparities[i];
    plane.depth = 1.0 / plane.disparity;
    plane.color = Tensor({hi, wi, 3});
    plane.density = Tensor({hi, wi, 1});
    const std::size_t base =
        kHeaderBytes + disparity_bytes + static_cast<std::size_t>(i) * plane_bytes;
    const std::size_t texels = static_cast<std::size_t>(h) * w;
    for (std::size_t t = 0; t < texels; ++t) {
      const std::size_t offset = base + t * 16;
      for (int c = 0; c < 3; ++c) {
        const float v = read_le<float>(
            buffer, offset + static_cast<std::size_t>(c) * 4);
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
          throw FormatError("color sample outside [0, 1]",
                            offset + static_cast<std::size_t>(c) * 4);
        }
        plane.color[static_cast<std::int64_t>(t) * 3 + c] =
            static_cast<double>(v);
      }
      const float sigma = read_le<float>(buffer, offset + 12);
      if (!std::isfinite(sigma) || sigma < 0.0f) {
        throw FormatError("density must be non-negative", offset + 12);
      }
      plane.density[static_cast<std::int64_t>(t)] = static_cast<double>(sigma);
    }
  }
  return stack;
}

void write_stack(const PlaneStack& stack, const std::filesystem::path& path) {
  if (stack.planes.empty()) {
    throw DomainError("cannot write an empty plane stack");
  }
  stack.schedule.validate();
  if (static_cast<int>(stack.planes.size()) != stack.schedule.count()) {
    throw ShapeError("plane count does not match the disparity schedule");
  }

  const int h = stack.height();
  const int w = stack.width();
  std::vector<char> buffer;
  buffer.reserve(kHeaderBytes +
                 stack.planes.size() * (4 + static_cast<std::size_t>(h) * w * 16));
  buffer.insert(buffer.end(), kMagic, kMagic + 4);
  append_le<std::uint16_t>(buffer, kPlnsVersion);
  append_le<std::uint32_t>(buffer, static_cast<std::uint32_t>(h));
  append_le<std::uint32_t>(buffer, static_cast<std::uint32_t>(w));
  append_le<std::uint32_t>(buffer,
                           static_cast<std::uint32_t>(stack.planes.size()));
  for (const RadiancePlane& plane : stack.planes) {
    append_le<float>(buffer, static_cast<float>(plane.disparity));
  }
  for (const RadiancePlane& plane : stack.planes) {
    if (plane.color.dim(0) != h || plane.color.dim(1) != w) {
      throw ShapeError("all planes must share dimensions");
    }
    const std::size_t texels = static_cast<std::size_t>(h) * w;
    for (std::size_t t = 0; t < texels; ++t) {
      for (int c = 0; c < 3; ++c) {
        append_le<float>(buffer,
                         static_cast<float>(
                             plane.color[static_cast<std::int64_t>(t) * 3 + c]));
      }
      append_le<float>(buffer, static_cast<float>(
                                   plane.density[static_cast<std::int64_t>(t)]));
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open stack file for writing: " + path.string());
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) {
    throw IoError("failed writing stack file: " + path.string());
  }
}

// ---------------------------------------------------------------------------
// Camera JSON
// ---------------------------------------------------------------------------

Camera parse_camera_json(const std::string& json_text) {
  const nlohmann::json j = parse_json(json_text, "camera JSON");
  Camera cam;
  try {
    cam.intrinsics.fx = j.at("fx").get<double>();
    cam.intrinsics.fy = j.at("fy").get<double>();
    cam.intrinsics.cx = j.at("cx").get<double>();
    cam.intrinsics.cy = j.at("cy").get<double>();
    cam.intrinsics.width = j.at("width").get<int>();
    cam.intrinsics.height = j.at("height").get<int>();
    const auto r = j.at("R").get<std::vector<double>>();
    const auto t = j.at("t").get<std::vector<double>>();
    if (r.size() != 9) {
      throw FormatError("camera R must hold 9 row-major numbers", 0);
    }
    if (t.size() != 3) {
      throw FormatError("camera t must hold 3 numbers", 0);
    }
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) {
        cam.pose.rotation(row, col) =
            r[static_cast<std::size_t>(row) * 3 + col];
      }
      cam.pose.translation(row) = t[static_cast<std::size_t>(row)];
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid camera JSON: ") + e.what(), 0);
  }
  cam.validate();
  return cam;
}

std::string camera_json(const Camera& cam) {
  nlohmann::json j;
  j["fx"] = cam.intrinsics.fx;
  j["fy"] = cam.intrinsics.fy;
  j["cx"] = cam.intrinsics.cx;
  j["cy"] = cam.intrinsics.cy;
  j["width"] = cam.intrinsics.width;
  j["height"] = cam.intrinsics.height;
  std::vector<double> r(9);
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) {
      r[static_cast<std::size_t>(row) * 3 + col] = cam.pose.rotation(row, col);
    }
  }
  j["R"] = r;
  j["t"] = std::vector<double>{cam.pose.translation.x(),
                               cam.pose.translation.y(),
                               cam.pose.translation.z()};
  return j.dump(2);
}

Camera read_camera(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open camera file: " + path.string());
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_camera_json(text);
}

void write_camera(const Camera& cam, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open camera file for writing: " + path.string());
  }
  out << camera_json(cam) << "\n";
}

// ---------------------------------------------------------------------------
// Scene specs
// ---------------------------------------------------------------------------

SceneSpec parse_scene_spec_json(const std::string& json_text) {
  const nlohmann::json j = parse_json(json_text, "scene spec");
  SceneSpec spec;
  try {
    spec.source_camera =
        parse_camera_json(j.at("source_camera").dump());
    const auto& stack = j.at("stack");
    spec.plane_count = stack.at("planes").get<int>();
    spec.d_min = stack.at("d_min").get<double>();
    spec.d_max = stack.at("d_max").get<double>();
    const auto sampling = stack.value("sampling", std::string("fixed"));
    if (sampling == "fixed") {
      spec.sampling = SamplingMode::kFixed;
    } else if (sampling == "stratified") {
      spec.sampling = SamplingMode::kStratified;
    } else {
      throw FormatError("sampling must be \"fixed\" or \"stratified\"", 0);
    }
    spec.seed = stack.value("seed", std::uint64_t{0});
    for (const auto& q : j.at("quads")) {
      QuadSpec quad;
      quad.z = q.at("z").get<double>();
      const auto center = q.at("center").get<std::vector<double>>();
      const auto half = q.at("half_size").get<std::vector<double>>();
      if (center.size() != 2 || half.size() != 2) {
        throw FormatError("quad center/half_size must hold 2 numbers", 0);
      }
      quad.center_x = center[0];
      quad.center_y = center[1];
      quad.half_width = half[0];
      quad.half_height = half[1];
      const auto texture = q.value("texture", std::string("solid"));
      if (texture == "checker") {
        quad.texture = QuadTexture::kChecker;
        quad.checker_size = q.at("checker_size").get<double>();
      } else if (texture == "gradient") {
        quad.texture = QuadTexture::kGradient;
      } else if (texture == "solid") {
        quad.texture = QuadTexture::kSolid;
      } else {
        throw FormatError("unknown quad texture: " + texture, 0);
      }
      if (q.contains("color_a")) {
        const auto c = q.at("color_a").get<std::vector<double>>();
        if (c.size() != 3) throw FormatError("color_a must hold 3 numbers", 0);
        quad.color_a = {c[0], c[1], c[2]};
      }
      if (q.contains("color_b")) {
        const auto c = q.at("color_b").get<std::vector<double>>();
        if (c.size() != 3) throw FormatError("color_b must hold 3 numbers", 0);
        quad.color_b = {c[0], c[1], c[2]};
      }
      quad.opacity = q.value("opacity", 1.0);
      spec.quads.push_back(quad);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid scene spec: ") + e.what(), 0);
  }
  return spec;
}

SceneSpec read_scene_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open scene spec: " + path.string());
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_scene_spec_json(text);
}

// ---------------------------------------------------------------------------
// Synthetic scene generation
// ---------------------------------------------------------------------------

namespace {

void validate_spec(const SceneSpec& spec) {
  spec.source_camera.validate();
  if (spec.quads.empty()) {
    throw DomainError("scene spec needs at least one quad");
  }
  const double z_min = 1.0 / spec.d_max;
  const double z_max = 1.0 / spec.d_min;
  for (const QuadSpec& quad : spec.quads) {
    if (!(quad.z >= z_min && quad.z <= z_max)) {
      throw DomainError("quad depth outside the stack's depth range");
    }
    if (!(quad.half_width > 0.0) || !(quad.half_height > 0.0)) {
      throw DomainError("quad extents must be positive");
    }
    if (!(quad.opacity > 0.0 && quad.opacity <= 1.0)) {
      throw DomainError("quad opacity must lie in (0, 1]");
    }
    if (quad.texture == QuadTexture::kChecker && !(quad.checker_size > 0.0)) {
      throw DomainError("checker cell size must be positive");
    }
  }
}

// Painter's-order projection of the quads into an arbitrary camera. Quads
// live in the source camera frame; rays are transformed there and
// intersected front to back with over-blending of quad opacities.
Tensor project_quads(const SceneSpec& spec,
                     const std::vector<const QuadSpec*>& by_depth,
                     const Camera& cam) {
  cam.validate();
  const int h = cam.intrinsics.height;
  const int w = cam.intrinsics.width;
  Tensor image({h, w, 3});

  // cam pixel -> world -> source camera frame
  const Eigen::Matrix3d to_world = cam.pose.rotation.transpose();
  const Eigen::Vector3d cam_center = cam.pose.center();
  const Eigen::Matrix3d& rs = spec.source_camera.pose.rotation;
  const Eigen::Vector3d& ts = spec.source_camera.pose.translation;
  const Eigen::Vector3d origin_src = rs * cam_center + ts;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d dir_cam((x + 0.5 - cam.intrinsics.cx) /
                                        cam.intrinsics.fx,
                                    (y + 0.5 - cam.intrinsics.cy) /
                                        cam.intrinsics.fy,
                                    1.0);
      const Eigen::Vector3d dir_src = rs * (to_world * dir_cam);
      double r = 0.0, g = 0.0, b = 0.0;
      double remaining = 1.0;
      for (const QuadSpec* quad : by_depth) {
        if (remaining < 1e-12) break;
        if (std::abs(dir_src.z()) < 1e-12) continue;
        const double s = (quad->z - origin_src.z()) / dir_src.z();
        if (!(s > 1e-9)) continue;
        const Eigen::Vector3d hit = origin_src + s * dir_src;
        const QuadHit sample = sample_quad(*quad, hit.x(), hit.y());
        if (!sample.inside) continue;
        const double weight = remaining * quad->opacity;
        r += weight * sample.color[0];
        g += weight * sample.color[1];
        b += weight * sample.color[2];
        remaining *= 1.0 - quad->opacity;
      }
      image(y, x, 0) = r;
      image(y, x, 1) = g;
      image(y, x, 2) = b;
    }
  }
  return image;
}

}  // namespace

GeneratedScene generate_scene(const SceneSpec& spec) {
  validate_spec(spec);

  DisparitySchedule schedule;
  if (spec.sampling == SamplingMode::kFixed) {
    schedule = fixed_disparities(spec.plane_count, spec.d_min, spec.d_max);
  } else {
    UniformRng rng(spec.seed);
    schedule =
        stratified_disparities(spec.plane_count, spec.d_min, spec.d_max, rng);
  }

  const Camera& cam = spec.source_camera;
  const int h = cam.intrinsics.height;
  const int w = cam.intrinsics.width;

  PlaneStack stack;
  stack.source_camera = cam;
  stack.schedule = schedule;
  stack.planes.resize(static_cast<std::size_t>(schedule.count()));
  for (int i = 0; i < schedule.count(); ++i) {
    RadiancePlane& plane = stack.planes[static_cast<std::size_t>(i)];
    plane.disparity = schedule.disparities[static_cast<std::size_t>(i)];
    plane.depth = 1.0 / plane.disparity;
    plane.color = Tensor({h, w, 3});
    plane.density = Tensor({h, w, 1});
  }

  // Depth order, nearest first; within a plane a nearer quad wins, equal
  // depths keep the spec order.
  std::vector<const QuadSpec*> by_depth;
  by_depth.reserve(spec.quads.size());
  for (const QuadSpec& quad : spec.quads) {
    by_depth.push_back(&quad);
  }
  std::stable_sort(by_depth.begin(), by_depth.end(),
                   [](const QuadSpec* a, const QuadSpec* b) {
                     return a->z < b->z;
                   });

  // Rasterize far to near so nearer quads overwrite shared texels.
  for (auto it = by_depth.rbegin(); it != by_depth.rend(); ++it) {
    const QuadSpec& quad = **it;
    int nearest = 0;
    double best = std::abs(schedule.depth(0) - quad.z);
    for (int i = 1; i < schedule.count(); ++i) {
      const double d = std::abs(schedule.depth(i) - quad.z);
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    RadiancePlane& plane = stack.planes[static_cast<std::size_t>(nearest)];
    const double delta = axial_interval(schedule, nearest);
    const double sigma =
        quad.opacity >= 1.0
            ? kOpaqueOpticalDepth / (0.5 * delta)
            : -std::log1p(-quad.opacity) / delta;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Source ray through the pixel center, evaluated at the quad's own
        // depth: the plane stores the quad's appearance from the source
        // view even when the quad snaps to a different depth.
        const double px =
            (x + 0.5 - cam.intrinsics.cx) / cam.intrinsics.fx * quad.z;
        const double py =
            (y + 0.5 - cam.intrinsics.cy) / cam.intrinsics.fy * quad.z;
        const QuadHit hit = sample_quad(quad, px, py);
        if (!hit.inside) continue;
        plane.color(y, x, 0) = hit.color[0];
        plane.color(y, x, 1) = hit.color[1];
        plane.color(y, x, 2) = hit.color[2];
        plane.density(y, x, 0) = sigma;
      }
    }
  }

  GeneratedScene scene;
  scene.stack = std::move(stack);
  std::vector<QuadSpec> quads_by_depth;
  quads_by_depth.reserve(by_depth.size());
  for (const QuadSpec* quad : by_depth) {
    quads_by_depth.push_back(*quad);
  }
  scene.ground_truth = [spec, quads_by_depth](const Camera& camera) {
    std::vector<const QuadSpec*> ordered;
    ordered.reserve(quads_by_depth.size());
    for (const QuadSpec& quad : quads_by_depth) {
      ordered.push_back(&quad);
    }
    return project_quads(spec, ordered, camera);
  };
  return scene;
}

}  // namespace planefield
