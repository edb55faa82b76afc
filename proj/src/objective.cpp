#include "splatalign/objective.hpp"

#include <cmath>

namespace splatalign {

Attribute attribute_for(LossKind kind) {
  return kind == LossKind::kPhotometricL1 ? Attribute::kColor : Attribute::kFeature;
}

const FeatureImage& target_for(const MetaView& view, LossKind kind) {
  if (kind == LossKind::kPhotometricL1) {
    if (view.color_target.channels == 0) {
      throw ShapeMismatch("image " + view.name + " has no color target");
    }
    return view.color_target;
  }
  return view.target;
}

namespace {

void check_shapes(const FeatureImage& rendered, const FeatureImage& target) {
  if (!rendered.same_shape(target)) {
    throw ShapeMismatch("rendered " + std::to_string(rendered.width) + "x" +
                        std::to_string(rendered.height) + "x" + std::to_string(rendered.channels) +
                        " vs target " + std::to_string(target.width) + "x" +
                        std::to_string(target.height) + "x" + std::to_string(target.channels));
  }
}

bool is_l2(LossKind kind) { return kind == LossKind::kSemanticL2; }

}  // namespace

double image_loss(const FeatureImage& rendered, const FeatureImage& target, LossKind kind) {
  check_shapes(rendered, target);
  const auto residual = (rendered.data - target.data).array();
  const double count = static_cast<double>(residual.size());
  if (count == 0) return 0.0;
  return is_l2(kind) ? residual.square().sum() / count : residual.abs().sum() / count;
}

LossGradient image_loss_and_grad(const GaussianScene& scene, const Camera& cam, const Sim3d& T,
                                 const FeatureImage& target, LossKind kind) {
  const int expected_channels = attribute_for(kind) == Attribute::kColor ? 3 : scene.feature_dim;
  if (target.width != cam.intrinsics.width || target.height != cam.intrinsics.height ||
      target.channels != expected_channels) {
    check_shapes(FeatureImage(cam.intrinsics.width, cam.intrinsics.height, expected_channels), target);
  }
  const bool l2 = is_l2(kind);
  const double n = static_cast<double>(target.data.size());
  const int channels = target.channels;
  auto cotangent = [&](Eigen::Index pixel, const double* value, double* g) {
    const double* t = target.data.col(pixel).data();
    for (int c = 0; c < channels; ++c) {
      const double r = value[c] - t[c];
      g[c] = l2 ? 2.0 * r / n : (r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0)) / n;
    }
  };
  auto [rendered, gradient] = render_with_vjp(scene, cam, T, attribute_for(kind), cotangent);
  LossGradient out;
  out.loss = image_loss(rendered, target, kind);
  out.gradient = gradient;
  return out;
}

MetaLoss meta_loss(const GaussianScene& scene, const MetaImage& meta, const Sim3d& T, LossKind kind,
                   const std::vector<bool>& active, std::span<const double> weights) {
  if (active.size() != meta.size()) {
    throw ShapeMismatch("active mask size differs from image count");
  }
  if (!weights.empty() && weights.size() != meta.size()) {
    throw ShapeMismatch("weight count differs from image count");
  }
  std::size_t n_active = 0;
  for (bool a : active) n_active += a ? 1 : 0;
  if (n_active == 0) throw EmptyActiveSet();

  MetaLoss out;
  out.table.losses.resize(meta.size());
  for (std::size_t i = 0; i < meta.size(); ++i) {
    const MetaView& view = meta.views[i];
    const FeatureImage& target = target_for(view, kind);
    if (active[i]) {
      const LossGradient lg = image_loss_and_grad(scene, view.camera, T, target, kind);
      out.table.losses[i] = lg.loss;
      const double w = weights.empty() ? 1.0 : weights[i];
      out.gradient += w * lg.gradient;
    } else {
      out.table.losses[i] = image_loss(render(scene, view.camera, T, attribute_for(kind)), target, kind);
    }
  }
  out.gradient /= static_cast<double>(n_active);
  return out;
}

}  // namespace splatalign
