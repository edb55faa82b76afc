#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "splatalign/feature_image.hpp"
#include "splatalign/geometry.hpp"
#include "splatalign/scene.hpp"

namespace splatalign {

enum class DistillNorm { kL1, kL2 };

struct DistillOptions {
  int steps = 3000;
  double learning_rate = 0.05;
  // Exponential decay from learning_rate to final_learning_rate.
  double final_learning_rate = 1e-4;
  DistillNorm norm = DistillNorm::kL1;
  // Fixed per-pixel linear map applied after compositing, splat channels
  // x target channels. Identity when absent.
  std::optional<Eigen::MatrixXd> decoder;
};

/// A target feature image seen by a camera posed in the reference frame.
struct PosedTarget {
  Camera camera;
  FeatureImage target;
};

/// Fits splat features to the targets with geometry frozen. Starts from the
/// scene's current features; splats never seen keep them.
GaussianScene distill_features(const GaussianScene& scene, const std::vector<PosedTarget>& targets,
                               const DistillOptions& options);

/// Sum over images of the per-image mean loss of the scene's current
/// features, as minimized by distill_features.
double distill_loss(const GaussianScene& scene, const std::vector<PosedTarget>& targets,
                    const DistillOptions& options);

}  // namespace splatalign
