#include "splatalign/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splatalign {
namespace {

using Matrix27 = Eigen::Matrix<double, 2, 7>;
using Matrix37 = Eigen::Matrix<double, 3, 7>;
using Row7 = Eigen::Matrix<double, 1, 7>;

constexpr int kTileSize = 8;

struct Projected {
  std::vector<Splat2D> splats;
  // Filled only when derivatives are requested; same order as `splats`.
  std::vector<Matrix27> dmean;
  std::vector<Matrix37> dconic;
};

Eigen::Matrix<double, 2, 3> projection_jacobian(const Intrinsics& k, const Eigen::Vector3d& x) {
  const double z = x.z();
  const double z2 = z * z;
  Eigen::Matrix<double, 2, 3> J;
  J << k.fx / z, 0.0, -k.fx * x.x() / z2,  //
      0.0, k.fy / z, -k.fy * x.y() / z2;
  return J;
}

// Derivative of the projection Jacobian along a camera-frame direction dx.
Eigen::Matrix<double, 2, 3> projection_jacobian_dot(const Intrinsics& k, const Eigen::Vector3d& x,
                                                    const Eigen::Vector3d& dx) {
  const double z = x.z();
  const double z2 = z * z;
  const double z3 = z2 * z;
  Eigen::Matrix<double, 2, 3> dJ;
  dJ << -k.fx * dx.z() / z2, 0.0, -k.fx * (dx.x() * z - 2.0 * x.x() * dx.z()) / z3,  //
      0.0, -k.fy * dx.z() / z2, -k.fy * (dx.y() * z - 2.0 * x.y() * dx.z()) / z3;
  return dJ;
}

// Projects the scene through transform_camera(T, cam). With derivatives,
// also returns d(mean2d)/d(xi) and d(conic)/d(xi) for T * exp(xi) at 0.
//
// In the meta frame a reference point X sits at p = T^-1(X) and its camera
// coordinates are x_c = s_T R_c (p - C). Perturbing T on the right gives
//   dx_c/dxi = s_T R_c [ -I | [p]x | -C ],
// and the camera-frame covariance rotates as
//   dSigma_c/domega_i = Sigma_c [r_i]x - [r_i]x Sigma_c, r_i = R_c e_i.
Projected project_impl(const GaussianScene& scene, const Camera& cam, const Sim3d& T,
                       bool with_derivatives) {
  const Camera rc = transform_camera(T, cam);
  const Intrinsics& k = rc.intrinsics;
  const Sim3d T_inv = inverse(T);
  const Eigen::Vector3d meta_center = cam.center();
  const double s_T = T.scale();

  std::vector<Splat2D> raw;
  std::vector<Matrix27> raw_dmean;
  std::vector<Matrix37> raw_dconic;
  raw.reserve(scene.splats.size());

  for (std::size_t i = 0; i < scene.splats.size(); ++i) {
    const GaussianSplat& g = scene.splats[i];
    const Eigen::Vector3d xc = rc.to_camera(g.mean);
    if (!(xc.z() > rc.near_plane)) continue;

    const Eigen::Matrix3d sigma_c = rc.rotation * g.covariance() * rc.rotation.transpose();
    const Eigen::Matrix<double, 2, 3> J = projection_jacobian(k, xc);
    const Eigen::Matrix2d cov_raw = J * sigma_c * J.transpose();

    Splat2D s;
    s.mean2d = {k.fx * xc.x() / xc.z() + k.cx, k.fy * xc.y() / xc.z() + k.cy};
    s.cov2d = cov_raw + kBlurFloor * Eigen::Matrix2d::Identity();
    s.depth = xc.z();
    s.index = static_cast<int>(i);
    raw.push_back(s);

    if (!with_derivatives) continue;

    const Eigen::Vector3d p = T_inv * g.mean;
    Eigen::Matrix<double, 3, 7> G;
    G.block<3, 3>(0, 0) = -Eigen::Matrix3d::Identity();
    G.block<3, 3>(0, 3) = hat<double>(p);
    G.col(6) = -meta_center;
    G = (s_T * cam.rotation) * G;

    const Eigen::Matrix2d A = s.cov2d.inverse();
    Matrix27 dmean;
    Matrix37 dconic;
    for (int c = 0; c < 7; ++c) {
      const Eigen::Vector3d dx = G.col(c);
      dmean(0, c) = k.fx * (dx.x() / xc.z() - xc.x() * dx.z() / (xc.z() * xc.z()));
      dmean(1, c) = k.fy * (dx.y() / xc.z() - xc.y() * dx.z() / (xc.z() * xc.z()));

      const Eigen::Matrix<double, 2, 3> dJ = projection_jacobian_dot(k, xc, dx);
      Eigen::Matrix2d dcov = dJ * sigma_c * J.transpose();
      dcov += dcov.transpose().eval();
      if (c >= 3 && c < 6) {
        const Eigen::Matrix3d K = hat<double>(Eigen::Vector3d(cam.rotation.col(c - 3)));
        const Eigen::Matrix3d dsigma = sigma_c * K - K * sigma_c;
        dcov += J * dsigma * J.transpose();
      }
      const Eigen::Matrix2d dA = -A * dcov * A;
      dconic(0, c) = dA(0, 0);
      dconic(1, c) = dA(0, 1);
      dconic(2, c) = dA(1, 1);
    }
    raw_dmean.push_back(dmean);
    raw_dconic.push_back(dconic);
  }

  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (raw[a].depth != raw[b].depth) return raw[a].depth < raw[b].depth;
    return raw[a].index < raw[b].index;
  });

  Projected out;
  out.splats.reserve(raw.size());
  for (std::size_t o : order) out.splats.push_back(raw[o]);
  if (with_derivatives) {
    out.dmean.reserve(raw.size());
    out.dconic.reserve(raw.size());
    for (std::size_t o : order) {
      out.dmean.push_back(raw_dmean[o]);
      out.dconic.push_back(raw_dconic[o]);
    }
  }
  return out;
}

Eigen::MatrixXd attribute_matrix(const GaussianScene& scene, Attribute attribute) {
  const int channels = attribute == Attribute::kColor ? 3 : scene.feature_dim;
  Eigen::MatrixXd m(channels, static_cast<Eigen::Index>(scene.splats.size()));
  for (std::size_t i = 0; i < scene.splats.size(); ++i) {
    const auto& g = scene.splats[i];
    if (attribute == Attribute::kColor) {
      m.col(static_cast<Eigen::Index>(i)) = g.color;
    } else {
      if (g.feature.size() != channels) {
        throw DimensionMismatch("splat feature size differs from scene feature_dim");
      }
      m.col(static_cast<Eigen::Index>(i)) = g.feature;
    }
  }
  return m;
}

// Per-splat rasterization data in depth order.
struct RasterSplat {
  Eigen::Vector2d mean;
  double a, b, c;  // conic = inverse(cov2d) = [[a, b], [b, c]]
  double opacity;
  double q_cut;  // beyond this alpha is surely below kMinAlpha
  int index;
};

// Scratch and accumulator for render_with_vjp.
struct Vjp {
  const CotangentFn& cotangent_fn;
  std::vector<std::pair<const double*, Row7>> contributions{};
  std::vector<double> cotangent{};
  Row7 gradient = Row7::Zero();
};

class Rasterizer {
 public:
  Rasterizer(const GaussianScene& scene, const Camera& cam, const Projected& projected,
             Attribute attribute)
      : width_(cam.intrinsics.width),
        height_(cam.intrinsics.height),
        features_(attribute_matrix(scene, attribute)),
        projected_(projected) {
    tiles_x_ = (width_ + kTileSize - 1) / kTileSize;
    tiles_y_ = (height_ + kTileSize - 1) / kTileSize;
    tiles_.assign(static_cast<std::size_t>(tiles_x_) * tiles_y_, {});

    splats_.reserve(projected.splats.size());
    for (std::size_t n = 0; n < projected.splats.size(); ++n) {
      const Splat2D& s = projected.splats[n];
      const double opacity = scene.splats[static_cast<std::size_t>(s.index)].opacity();
      const Eigen::Matrix2d A = s.cov2d.inverse();
      // alpha >= kMinAlpha requires q <= 2 ln(opacity / kMinAlpha), and
      // q >= |d|^2 / lambda_max, which bounds the footprint radius.
      const double q_max = 2.0 * std::log(opacity / kMinAlpha);
      RasterSplat r{s.mean2d, A(0, 0), A(0, 1), A(1, 1), opacity, q_max * 1.0001 + 1e-6, s.index};
      splats_.push_back(r);
      if (!(q_max > 0.0)) continue;
      const double tr = s.cov2d.trace();
      const double det = s.cov2d.determinant();
      const double lambda_max = 0.5 * tr + std::sqrt(std::max(0.25 * tr * tr - det, 0.0));
      const double radius = std::sqrt(q_max * lambda_max) * 1.0001 + 1e-6;
      const int x0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.x() - radius - 0.5)));
      const int x1 = std::min(width_ - 1, static_cast<int>(std::floor(s.mean2d.x() + radius - 0.5)));
      const int y0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.y() - radius - 0.5)));
      const int y1 = std::min(height_ - 1, static_cast<int>(std::floor(s.mean2d.y() + radius - 0.5)));
      if (x0 > x1 || y0 > y1) continue;
      for (int ty = y0 / kTileSize; ty <= y1 / kTileSize; ++ty) {
        for (int tx = x0 / kTileSize; tx <= x1 / kTileSize; ++tx) {
          tiles_[static_cast<std::size_t>(ty) * tiles_x_ + tx].push_back(static_cast<int>(n));
        }
      }
    }
  }

  // Composites every pixel front to back. `jacobian` may be null.
  void run(FeatureImage& image, RenderJacobian* jacobian,
           std::vector<Eigen::Triplet<double>>* weights = nullptr, Vjp* vjp = nullptr) const {
    const int channels = static_cast<int>(features_.rows());
    image = FeatureImage(width_, height_, channels);
    if (jacobian != nullptr) {
      jacobian->width = width_;
      jacobian->height = height_;
      jacobian->channels = channels;
      jacobian->data.setZero(image.pixel_count() * channels, 7);
    }
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        composite_pixel(x, y, image, jacobian, weights, vjp);
      }
    }
  }

 private:
  void composite_pixel(int x, int y, FeatureImage& image, RenderJacobian* jacobian,
                       std::vector<Eigen::Triplet<double>>* weights, Vjp* vjp) const {
    const int channels = static_cast<int>(features_.rows());
    const Eigen::Index pix = image.index(x, y);
    const std::vector<int>& list =
        tiles_[static_cast<std::size_t>(y / kTileSize) * tiles_x_ + x / kTileSize];
    const double px = x + 0.5;
    const double py = y + 0.5;

    double* feature = image.data.col(pix).data();
    double* dfeature = jacobian != nullptr ? jacobian->data.row(pix * channels).data() : nullptr;
    double transmittance = 1.0;
    double alpha_sum = 0.0;
    Row7 dtransmittance = Row7::Zero();
    const bool derivatives = dfeature != nullptr || vjp != nullptr;
    if (vjp != nullptr) vjp->contributions.clear();

    for (int n : list) {
      const RasterSplat& s = splats_[static_cast<std::size_t>(n)];
      const double dx = px - s.mean.x();
      const double dy = py - s.mean.y();
      const double q = s.a * dx * dx + 2.0 * s.b * dx * dy + s.c * dy * dy;
      if (q > s.q_cut) continue;
      double alpha = s.opacity * std::exp(-0.5 * q);
      if (alpha < kMinAlpha) continue;
      const bool clamped = alpha > kAlphaCeiling;
      if (clamped) alpha = kAlphaCeiling;

      const double weight = alpha * transmittance;
      const double* f = features_.col(s.index).data();
      for (int c = 0; c < channels; ++c) feature[c] += weight * f[c];
      alpha_sum += weight;
      if (weights != nullptr) weights->emplace_back(static_cast<int>(pix), s.index, weight);

      if (derivatives) {
        Row7 dalpha = Row7::Zero();
        if (!clamped) {
          const Matrix27& dmean = projected_.dmean[static_cast<std::size_t>(n)];
          const Matrix37& dconic = projected_.dconic[static_cast<std::size_t>(n)];
          const double ad_x = s.a * dx + s.b * dy;
          const double ad_y = s.b * dx + s.c * dy;
          const Row7 dq = dx * dx * dconic.row(0) + 2.0 * dx * dy * dconic.row(1) +
                          dy * dy * dconic.row(2) - 2.0 * (ad_x * dmean.row(0) + ad_y * dmean.row(1));
          dalpha = -0.5 * alpha * dq;
        }
        const Row7 dweight = transmittance * dalpha + alpha * dtransmittance;
        if (vjp != nullptr) {
          vjp->contributions.emplace_back(f, dweight);
        } else {
          for (int c = 0; c < channels; ++c) {
            Eigen::Map<Row7> row(dfeature + 7 * c);
            row += f[c] * dweight;
          }
        }
        dtransmittance = (1.0 - alpha) * dtransmittance - transmittance * dalpha;
      }

      transmittance *= 1.0 - alpha;
      if (transmittance < kTransmittanceStop) break;
    }
    image.alpha(pix) = alpha_sum;

    if (vjp != nullptr) {
      vjp->cotangent.resize(channels);
      vjp->cotangent_fn(pix, feature, vjp->cotangent.data());
      for (const auto& [f, dweight] : vjp->contributions) {
        double g = 0.0;
        for (int c = 0; c < channels; ++c) g += vjp->cotangent[c] * f[c];
        if (g != 0.0) vjp->gradient += g * dweight;
      }
    }
  }

  int width_;
  int height_;
  int tiles_x_ = 0;
  int tiles_y_ = 0;
  Eigen::MatrixXd features_;
  const Projected& projected_;
  std::vector<RasterSplat> splats_;
  std::vector<std::vector<int>> tiles_;
};

}  // namespace

std::vector<Splat2D> project_splats(const GaussianScene& scene, const Camera& cam) {
  return project_impl(scene, cam, Sim3d::identity(), false).splats;
}

FeatureImage render(const GaussianScene& scene, const Camera& cam, const Sim3d& T,
                    Attribute attribute) {
  const Projected projected = project_impl(scene, cam, T, false);
  const Rasterizer raster(scene, cam, projected, attribute);
  FeatureImage image;
  raster.run(image, nullptr);
  return image;
}

std::pair<FeatureImage, RenderJacobian> render_with_jacobian(const GaussianScene& scene,
                                                             const Camera& cam, const Sim3d& T,
                                                             Attribute attribute) {
  const Projected projected = project_impl(scene, cam, T, true);
  const Rasterizer raster(scene, cam, projected, attribute);
  FeatureImage image;
  RenderJacobian jacobian;
  raster.run(image, &jacobian);
  return {std::move(image), std::move(jacobian)};
}

std::pair<FeatureImage, Tangent7d> render_with_vjp(const GaussianScene& scene, const Camera& cam,
                                                   const Sim3d& T, Attribute attribute,
                                                   const CotangentFn& cotangent) {
  const Projected projected = project_impl(scene, cam, T, true);
  const Rasterizer raster(scene, cam, projected, attribute);
  FeatureImage image;
  Vjp vjp{cotangent};
  raster.run(image, nullptr, nullptr, &vjp);
  return {std::move(image), vjp.gradient.transpose()};
}

Eigen::SparseMatrix<double, Eigen::RowMajor> compositing_weights(const GaussianScene& scene,
                                                                 const Camera& cam, const Sim3d& T) {
  const Projected projected = project_impl(scene, cam, T, false);
  const Rasterizer raster(scene, cam, projected, Attribute::kColor);
  FeatureImage image;
  std::vector<Eigen::Triplet<double>> triplets;
  raster.run(image, nullptr, &triplets);
  Eigen::SparseMatrix<double, Eigen::RowMajor> W(image.pixel_count(),
                                                 static_cast<Eigen::Index>(scene.splats.size()));
  W.setFromTriplets(triplets.begin(), triplets.end());
  return W;
}

}  // namespace splatalign
