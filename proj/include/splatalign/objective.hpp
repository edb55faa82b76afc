#pragma once

#include <span>
#include <vector>

#include "splatalign/feature_image.hpp"
#include "splatalign/geometry.hpp"
#include "splatalign/meta_image.hpp"
#include "splatalign/renderer.hpp"
#include "splatalign/scene.hpp"

namespace splatalign {

enum class LossKind { kSemanticL1, kSemanticL2, kPhotometricL1 };

/// Photometric losses composite splat colors against color targets; the
/// semantic ones composite features against feature targets.
Attribute attribute_for(LossKind kind);
const FeatureImage& target_for(const MetaView& view, LossKind kind);

/// Per-image losses of one meta-image at one iteration.
struct LossTable {
  std::vector<double> losses;
  long iteration = 0;
};

/// Mean over all pixels and channels of |r - t| (L1) or (r - t)^2 (L2).
/// Background pixels take part with a zero feature.
double image_loss(const FeatureImage& rendered, const FeatureImage& target, LossKind kind);

struct LossGradient {
  double loss = 0.0;
  Tangent7d gradient = Tangent7d::Zero();
};

/// Loss of render(scene, cam, T) against `target` and its gradient with
/// respect to the right perturbation T * exp(xi). sign(0) = 0 for L1.
LossGradient image_loss_and_grad(const GaussianScene& scene, const Camera& cam, const Sim3d& T,
                                 const FeatureImage& target, LossKind kind);

struct MetaLoss {
  LossTable table;
  Tangent7d gradient = Tangent7d::Zero();
};

/// Loss of every image (active or not) and the mean gradient over active
/// images, summed in ascending image order. Optional `weights` scale each
/// image's gradient (IRLS).
MetaLoss meta_loss(const GaussianScene& scene, const MetaImage& meta, const Sim3d& T, LossKind kind,
                   const std::vector<bool>& active, std::span<const double> weights = {});

}  // namespace splatalign
