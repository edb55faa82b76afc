#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <functional>
#include <utility>
#include <vector>

#include "splatalign/feature_image.hpp"
#include "splatalign/geometry.hpp"
#include "splatalign/scene.hpp"

namespace splatalign {

// Rasterizer constants (3DGS defaults).
inline constexpr double kBlurFloor = 0.3;            // px^2 added to cov2d
inline constexpr double kAlphaCeiling = 0.999;
inline constexpr double kMinAlpha = 1.0 / 255.0;     // weaker splats skipped
inline constexpr double kTransmittanceStop = 1e-4;

/// Which per-splat vector gets composited.
enum class Attribute { kFeature, kColor };

struct Splat2D {
  Eigen::Vector2d mean2d;
  Eigen::Matrix2d cov2d;
  double depth = 0.0;
  int index = 0;  // into GaussianScene::splats
};

/// Projects every splat through `cam` (EWA, blur floor included). Splats
/// with camera-z <= near_plane are culled. Sorted by depth, then index.
std::vector<Splat2D> project_splats(const GaussianScene& scene, const Camera& cam);

/// Composites the scene through transform_camera(T, cam).
FeatureImage render(const GaussianScene& scene, const Camera& cam, const Sim3d& T,
                    Attribute attribute = Attribute::kFeature);

/// d(pixel feature)/d(xi) for the right perturbation T * exp(xi) at xi = 0.
/// Row pixel * channels + c holds the 7-vector of channel c.
struct RenderJacobian {
  int width = 0;
  int height = 0;
  int channels = 0;
  Eigen::Matrix<double, Eigen::Dynamic, 7, Eigen::RowMajor> data;

  auto at(Eigen::Index pixel, int channel) const {
    return data.row(pixel * channels + channel);
  }
};

/// Forward-mode derivative of render. The returned image is bitwise equal
/// to render(); sort order and cull set are held fixed.
std::pair<FeatureImage, RenderJacobian> render_with_jacobian(
    const GaussianScene& scene, const Camera& cam, const Sim3d& T,
    Attribute attribute = Attribute::kFeature);

/// Receives a pixel index and its composited values (one per channel) and
/// writes d(loss)/d(value) for each channel.
using CotangentFn = std::function<void(Eigen::Index pixel, const double* value, double* cotangent)>;

/// Renders and returns sum over pixels of cotangent^T * d(pixel)/d(xi),
/// the same quantity as J^T g for the RenderJacobian J, without storing J.
std::pair<FeatureImage, Tangent7d> render_with_vjp(const GaussianScene& scene, const Camera& cam,
                                                   const Sim3d& T, Attribute attribute,
                                                   const CotangentFn& cotangent);

/// Per-pixel compositing weights alpha_k * prod_{j<k}(1 - alpha_j): a
/// (pixels x splats) matrix W with render(...).data == (W * features^T)^T
/// up to summation order. Depends on geometry and opacity only.
Eigen::SparseMatrix<double, Eigen::RowMajor> compositing_weights(const GaussianScene& scene,
                                                                 const Camera& cam, const Sim3d& T);

}  // namespace splatalign
