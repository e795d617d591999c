#include "planefield/fusion.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace planefield {

namespace {

constexpr int kPoseParams = 6;  // axis-angle rotation + translation
constexpr double kDistanceEpsilon = 1e-6;

double uniform_symmetric(std::mt19937_64& engine, double bound) {
  const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * bound;
}

Tensor init_tensor(std::vector<int> shape, double bound,
                   std::mt19937_64& engine) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) {
    t[i] = uniform_symmetric(engine, bound);
  }
  return t;
}

std::int64_t meta_value(const LayerParams& params, const std::string& key) {
  auto it = params.meta.find(key);
  if (it == params.meta.end()) {
    throw DomainError("fusion parameters lack meta key: " + key);
  }
  return it->second;
}

// Parameter leaves in name order followed by the view features in view
// order; shared by the plain forward pass and the gradient probe.
struct LeafLayout {
  std::vector<std::string> param_names;
  int view_count = 0;

  const Var& param(std::span<const Var> leaves, const std::string& name) const {
    for (std::size_t i = 0; i < param_names.size(); ++i) {
      if (param_names[i] == name) return leaves[i];
    }
    throw DomainError("missing parameter tensor: " + name);
  }
  const Var& feature(std::span<const Var> leaves, int view) const {
    return leaves[param_names.size() + static_cast<std::size_t>(view)];
  }
};

LeafLayout layout_for(const LayerParams& params, int view_count) {
  LeafLayout layout;
  for (const auto& [name, tensor] : params.entries) {
    layout.param_names.push_back(name);
  }
  layout.view_count = view_count;
  return layout;
}

std::vector<Tensor> collect_leaves(const LayerParams& params,
                                   const FeaturePlaneSet& set) {
  std::vector<Tensor> leaves;
  leaves.reserve(params.entries.size() + set.features.size());
  for (const auto& [name, tensor] : params.entries) {
    leaves.push_back(tensor);
  }
  for (const Tensor& f : set.features) {
    leaves.push_back(f);
  }
  return leaves;
}

std::vector<Var> constant_leaves(std::span<const Tensor> tensors) {
  std::vector<Var> vars;
  vars.reserve(tensors.size());
  for (const Tensor& t : tensors) {
    vars.push_back(make_constant(t));
  }
  return vars;
}

Tensor broadcast_encoding(const ViewEncoding& encoding, int h, int w) {
  const int e = static_cast<int>(encoding.size());
  Tensor t({h, w, e});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < e; ++c) {
        t(y, x, c) = encoding[static_cast<std::size_t>(c)];
      }
    }
  }
  return t;
}

Var build_fixed_fusion(std::span<const Var> leaves, const LeafLayout& layout,
                       const std::vector<Tensor>& broadcast_encodings,
                       int source_index) {
  std::vector<Var> pieces;
  pieces.reserve(static_cast<std::size_t>(layout.view_count) * 2);
  for (int b = 0; b < layout.view_count; ++b) {
    pieces.push_back(layout.feature(leaves, b));
    pieces.push_back(
        make_constant(broadcast_encodings[static_cast<std::size_t>(b)]));
  }
  const Var cat = concat_channels(pieces);
  const Var hidden = relu(conv2d(cat, layout.param(leaves, "conv1x1.weight"),
                                 layout.param(leaves, "conv1x1.bias")));
  const Var mixed = conv2d(hidden, layout.param(leaves, "conv3x3.weight"),
                           layout.param(leaves, "conv3x3.bias"));
  return add(layout.feature(leaves, source_index), mixed);
}

struct AttentionGraph {
  Var fused;
  std::vector<Var> masks;
};

AttentionGraph build_attention_fusion(std::span<const Var> leaves,
                                      const LeafLayout& layout,
                                      int source_index, int residual_units,
                                      int h, int w) {
  AttentionGraph graph;
  const Var& source = layout.feature(leaves, source_index);
  if (layout.view_count == 1) {
    graph.fused = source;
    return graph;
  }
  std::vector<ResidualUnitParams> units;
  units.reserve(static_cast<std::size_t>(residual_units));
  for (int u = 0; u < residual_units; ++u) {
    const std::string prefix = "res" + std::to_string(u);
    units.push_back(ResidualUnitParams{
        layout.param(leaves, prefix + ".conv1.weight"),
        layout.param(leaves, prefix + ".conv1.bias"),
        layout.param(leaves, prefix + ".conv2.weight"),
        layout.param(leaves, prefix + ".conv2.bias")});
  }
  const Var& mask_w = layout.param(leaves, "mask.weight");
  const Var& mask_b = layout.param(leaves, "mask.bias");

  Var total;
  bool have_total = false;
  for (int b = 0; b < layout.view_count; ++b) {
    if (b == source_index) continue;
    const Var& view = layout.feature(leaves, b);
    const std::array<Var, 2> pair = {view, source};
    Var branch = maxpool2(concat_channels(pair));
    for (const ResidualUnitParams& unit : units) {
      branch = residual_unit(branch, unit);
    }
    branch = upsample_bilinear(branch, h, w);
    const Var mask = sigmoid(conv2d(branch, mask_w, mask_b));
    graph.masks.push_back(mask);
    const Var contribution = mul_mask(mask, view);
    total = have_total ? add(total, contribution) : contribution;
    have_total = true;
  }
  graph.fused =
      add(source, scale(total, 1.0 / (layout.view_count - 1)));
  return graph;
}

}  // namespace

void FeaturePlaneSet::validate() const {
  if (features.empty()) {
    throw DomainError("feature set needs at least one view");
  }
  if (cameras.size() != features.size()) {
    throw ShapeError("feature set needs one camera per view");
  }
  if (source_index < 0 || source_index >= view_count()) {
    throw DomainError("source view index out of range");
  }
  for (const Tensor& f : features) {
    if (f.rank() != 3) {
      throw ShapeError("view features must be (H, W, C)");
    }
    if (f.dim(0) != height() || f.dim(1) != width() ||
        f.dim(2) != channels()) {
      throw ShapeError("all views must share feature dimensions");
    }
  }
}

ViewEncoding encode_view_pose(const Camera& view, const Camera& source,
                              int frequency_bands) {
  if (frequency_bands < 1) {
    throw DomainError("pose encoding needs at least one frequency band");
  }
  const CameraPose rel = relative_pose(source, view);
  const Eigen::AngleAxisd aa(rel.rotation);
  const Eigen::Vector3d rotation = aa.axis() * aa.angle();
  std::array<double, kPoseParams> p = {
      rotation.x(), rotation.y(),         rotation.z(),
      rel.translation.x(), rel.translation.y(), rel.translation.z()};

  ViewEncoding enc;
  enc.reserve(static_cast<std::size_t>(2 * frequency_bands * kPoseParams));
  for (int l = 0; l < frequency_bands; ++l) {
    const double freq = std::ldexp(std::numbers::pi, l);  // 2^l * pi
    for (double v : p) enc.push_back(std::sin(freq * v));
    for (double v : p) enc.push_back(std::cos(freq * v));
  }
  return enc;
}

std::vector<ViewEncoding> make_view_encodings(const FeaturePlaneSet& set,
                                              int frequency_bands) {
  set.validate();
  const Camera& source =
      set.cameras[static_cast<std::size_t>(set.source_index)];
  std::vector<ViewEncoding> encodings;
  encodings.reserve(set.cameras.size());
  for (const Camera& cam : set.cameras) {
    encodings.push_back(encode_view_pose(cam, source, frequency_bands));
  }
  return encodings;
}

// ---------------------------------------------------------------------------
// Post-decoder fusion
// ---------------------------------------------------------------------------

namespace {

void check_aligned_stacks(std::span<const PlaneStack> warped) {
  if (warped.empty()) {
    throw DomainError("post-decoder fusion needs at least one stack");
  }
  const PlaneStack& first = warped[0];
  first.validate();
  for (std::size_t b = 1; b < warped.size(); ++b) {
    const PlaneStack& s = warped[b];
    s.validate();
    if (s.plane_count() != first.plane_count() ||
        s.height() != first.height() || s.width() != first.width()) {
      throw ShapeError("fused stacks must share dimensions and plane count");
    }
    if (s.schedule.disparities != first.schedule.disparities) {
      throw ShapeError("fused stacks must share the disparity schedule");
    }
  }
}

PlaneStack blend_stacks(std::span<const PlaneStack> warped,
                        std::span<const double> weights) {
  PlaneStack out;
  out.source_camera = warped[0].source_camera;
  out.schedule = warped[0].schedule;
  out.planes.resize(warped[0].planes.size());
  for (std::size_t i = 0; i < out.planes.size(); ++i) {
    RadiancePlane blended;
    blended.disparity = warped[0].planes[i].disparity;
    blended.depth = warped[0].planes[i].depth;
    blended.color = Tensor(warped[0].planes[i].color.shape());
    blended.density = Tensor(warped[0].planes[i].density.shape());
    for (std::size_t b = 0; b < warped.size(); ++b) {
      const double w = weights[b];
      const Tensor& color = warped[b].planes[i].color;
      const Tensor& density = warped[b].planes[i].density;
      for (std::int64_t j = 0; j < color.size(); ++j) {
        blended.color[j] += w * color[j];
      }
      for (std::int64_t j = 0; j < density.size(); ++j) {
        blended.density[j] += w * density[j];
      }
    }
    out.planes[i] = std::move(blended);
  }
  return out;
}

}  // namespace

PlaneStack fuse_post_average(std::span<const PlaneStack> warped) {
  check_aligned_stacks(warped);
  const std::vector<double> weights(warped.size(),
                                    1.0 / static_cast<double>(warped.size()));
  return blend_stacks(warped, weights);
}

std::vector<double> post_fusion_weights(std::span<const Camera> view_cams,
                                        const Camera& target) {
  if (view_cams.empty()) {
    throw DomainError("weighting needs at least one view camera");
  }
  const Eigen::Vector3d target_center = target.pose.center();
  std::vector<double> weights(view_cams.size());
  double total = 0.0;
  for (std::size_t b = 0; b < view_cams.size(); ++b) {
    const double distance =
        (view_cams[b].pose.center() - target_center).norm();
    weights[b] = 1.0 / (kDistanceEpsilon + distance);
    total += weights[b];
  }
  for (double& w : weights) {
    w /= total;
  }
  return weights;
}

PlaneStack fuse_post_weighted(std::span<const PlaneStack> warped,
                              std::span<const Camera> view_cams,
                              const Camera& target) {
  check_aligned_stacks(warped);
  if (view_cams.size() != warped.size()) {
    throw DomainError("one view camera per stack is required");
  }
  const std::vector<double> weights = post_fusion_weights(view_cams, target);
  return blend_stacks(warped, weights);
}

// ---------------------------------------------------------------------------
// Pre-decoder fusion
// ---------------------------------------------------------------------------

LayerParams init_fixed_fusion_params(const FixedFusionConfig& config,
                                     std::uint64_t seed) {
  if (config.view_count < 1 || config.feature_channels < 1) {
    throw DomainError("fixed fusion needs a positive view and channel count");
  }
  if (config.frequency_bands < 1) {
    throw DomainError("fixed fusion needs at least one frequency band");
  }
  const int hidden = config.hidden_channels > 0 ? config.hidden_channels
                                                : config.feature_channels;
  const int encoding = 2 * config.frequency_bands * kPoseParams;
  const int cat_channels =
      config.view_count * (config.feature_channels + encoding);

  std::mt19937_64 engine(seed);
  LayerParams params;
  params.module = "pre-fixed";
  params.seed = seed;
  params.meta["view_count"] = config.view_count;
  params.meta["feature_channels"] = config.feature_channels;
  params.meta["hidden_channels"] = hidden;
  params.meta["frequency_bands"] = config.frequency_bands;

  const double s1 = std::sqrt(1.0 / cat_channels);
  params.entries["conv1x1.weight"] =
      init_tensor({1, 1, cat_channels, hidden}, s1, engine);
  params.entries["conv1x1.bias"] = init_tensor({hidden}, s1, engine);
  const double s3 = std::sqrt(1.0 / (9.0 * hidden));
  params.entries["conv3x3.weight"] =
      init_tensor({3, 3, hidden, config.feature_channels}, s3, engine);
  params.entries["conv3x3.bias"] =
      init_tensor({config.feature_channels}, s3, engine);
  return params;
}

Tensor fuse_pre_fixed(const FeaturePlaneSet& set,
                      const std::vector<ViewEncoding>& encodings,
                      const LayerParams& params) {
  const FusionProbe probe = make_fixed_fusion_probe(set, encodings, params);
  const std::vector<Var> leaves = constant_leaves(probe.leaves);
  return probe.build(leaves).value();
}

FusionProbe make_fixed_fusion_probe(const FeaturePlaneSet& set,
                                    const std::vector<ViewEncoding>& encodings,
                                    const LayerParams& params) {
  set.validate();
  if (params.module != "pre-fixed") {
    throw DomainError("parameters are not for fixed-view fusion");
  }
  if (meta_value(params, "view_count") != set.view_count()) {
    throw DomainError("fixed-view fusion built for a different view count");
  }
  if (meta_value(params, "feature_channels") != set.channels()) {
    throw ShapeError("fusion parameters expect a different channel count");
  }
  if (encodings.size() != static_cast<std::size_t>(set.view_count())) {
    throw DomainError("one pose encoding per view is required");
  }
  const std::size_t encoding_len = static_cast<std::size_t>(
      2 * meta_value(params, "frequency_bands") * kPoseParams);
  std::vector<Tensor> broadcast;
  broadcast.reserve(encodings.size());
  for (const ViewEncoding& enc : encodings) {
    if (enc.size() != encoding_len) {
      throw DomainError("pose encoding length mismatch");
    }
    for (double v : enc) {
      if (!std::isfinite(v)) {
        throw DomainError("pose encoding must be finite");
      }
    }
    broadcast.push_back(broadcast_encoding(enc, set.height(), set.width()));
  }

  FusionProbe probe;
  probe.leaves = collect_leaves(params, set);
  const LeafLayout layout = layout_for(params, set.view_count());
  const int source_index = set.source_index;
  probe.build = [layout, broadcast = std::move(broadcast),
                 source_index](std::span<const Var> leaves) {
    return build_fixed_fusion(leaves, layout, broadcast, source_index);
  };
  return probe;
}

LayerParams init_attention_fusion_params(const AttentionFusionConfig& config,
                                         std::uint64_t seed) {
  if (config.feature_channels < 1) {
    throw DomainError("attention fusion needs a positive channel count");
  }
  if (config.residual_units < 0) {
    throw DomainError("residual unit count must be non-negative");
  }
  const int branch_channels = 2 * config.feature_channels;
  const double s = std::sqrt(1.0 / (9.0 * branch_channels));

  std::mt19937_64 engine(seed);
  LayerParams params;
  params.module = "pre-attention";
  params.seed = seed;
  params.meta["feature_channels"] = config.feature_channels;
  params.meta["residual_units"] = config.residual_units;

  for (int u = 0; u < config.residual_units; ++u) {
    const std::string prefix = "res" + std::to_string(u);
    params.entries[prefix + ".conv1.weight"] =
        init_tensor({3, 3, branch_channels, branch_channels}, s, engine);
    params.entries[prefix + ".conv1.bias"] =
        init_tensor({branch_channels}, s, engine);
    params.entries[prefix + ".conv2.weight"] =
        init_tensor({3, 3, branch_channels, branch_channels}, s, engine);
    params.entries[prefix + ".conv2.bias"] =
        init_tensor({branch_channels}, s, engine);
  }
  params.entries["mask.weight"] =
      init_tensor({3, 3, branch_channels, 1}, s, engine);
  params.entries["mask.bias"] = init_tensor({1}, s, engine);
  return params;
}

FusionResult fuse_pre_attention(const FeaturePlaneSet& set,
                                const LayerParams& params) {
  set.validate();
  if (params.module != "pre-attention") {
    throw DomainError("parameters are not for attention fusion");
  }
  if (meta_value(params, "feature_channels") != set.channels()) {
    throw ShapeError("fusion parameters expect a different channel count");
  }
  const int units = static_cast<int>(meta_value(params, "residual_units"));
  const std::vector<Tensor> tensors = collect_leaves(params, set);
  const std::vector<Var> leaves = constant_leaves(tensors);
  const LeafLayout layout = layout_for(params, set.view_count());
  const AttentionGraph graph =
      build_attention_fusion(leaves, layout, set.source_index, units,
                             set.height(), set.width());
  FusionResult result;
  result.fused = graph.fused.value();
  result.masks.reserve(graph.masks.size());
  for (const Var& mask : graph.masks) {
    result.masks.push_back(mask.value());
  }
  return result;
}

FusionProbe make_attention_fusion_probe(const FeaturePlaneSet& set,
                                        const LayerParams& params) {
  set.validate();
  if (params.module != "pre-attention") {
    throw DomainError("parameters are not for attention fusion");
  }
  if (meta_value(params, "feature_channels") != set.channels()) {
    throw ShapeError("fusion parameters expect a different channel count");
  }
  const int units = static_cast<int>(meta_value(params, "residual_units"));
  FusionProbe probe;
  probe.leaves = collect_leaves(params, set);
  const LeafLayout layout = layout_for(params, set.view_count());
  const int source_index = set.source_index;
  const int h = set.height();
  const int w = set.width();
  probe.build = [layout, source_index, units, h,
                 w](std::span<const Var> leaves) {
    return build_attention_fusion(leaves, layout, source_index, units, h, w)
        .fused;
  };
  return probe;
}

}  // namespace planefield
