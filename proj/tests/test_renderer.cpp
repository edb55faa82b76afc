#include <gtest/gtest.h>

#include <random>

#include "splatalign/renderer.hpp"
#include "test_util.hpp"

namespace splatalign {
namespace {

using testing::axis_camera;
using testing::random_scene;

GaussianSplat isotropic_splat(const Eigen::Vector3d& mean, double sigma, double opacity, Eigen::VectorXd feature) {
  GaussianSplat g;
  g.mean = mean;
  g.log_scales = Eigen::Vector3d::Constant(std::log(sigma));
  g.opacity_logit = logit(opacity);
  g.feature = std::move(feature);
  return g;
}

GaussianScene single_splat_scene(const GaussianSplat& g) {
  GaussianScene scene;
  scene.feature_dim = static_cast<int>(g.feature.size());
  scene.splats.push_back(g);
  return scene;
}

TEST(Project, CullsSplatsBehindOrNearCamera) {
  GaussianScene scene;
  scene.feature_dim = 1;
  for (double z : {-2.0, 0.5, 0.75, 3.0}) {
    scene.splats.push_back(isotropic_splat({0, 0, z}, 0.1, 0.5, Eigen::VectorXd::Ones(1)));
  }
  const auto projected = project_splats(scene, axis_camera(16, 16, 16));
  ASSERT_EQ(projected.size(), 2u);
  EXPECT_EQ(projected[0].index, 2);
  EXPECT_EQ(projected[1].index, 3);
}

TEST(Project, OnAxisIsotropicSplatClosedForm) {
  const double f = 20.0, sigma = 0.3, d = 2.5;
  Camera cam = axis_camera(32, 24, f);
  const auto projected =
      project_splats(single_splat_scene(isotropic_splat({0, 0, d}, sigma, 0.5, Eigen::VectorXd::Ones(1))), cam);
  ASSERT_EQ(projected.size(), 1u);
  EXPECT_LT((projected[0].mean2d - Eigen::Vector2d(16, 12)).norm(), 1e-12);
  const double var = std::pow(f * sigma / d, 2) + kBlurFloor;
  EXPECT_NEAR(projected[0].cov2d(0, 0), var, 1e-12);
  EXPECT_NEAR(projected[0].cov2d(1, 1), var, 1e-12);
  EXPECT_NEAR(projected[0].cov2d(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(projected[0].depth, d, 1e-15);
}

TEST(Project, SortedByDepthThenIndex) {
  GaussianScene scene;
  scene.feature_dim = 1;
  for (double z : {3.0, 2.0, 3.0, 1.5, 2.0}) {
    scene.splats.push_back(isotropic_splat({0.1, 0, z}, 0.1, 0.5, Eigen::VectorXd::Ones(1)));
  }
  const auto projected = project_splats(scene, axis_camera(16, 16, 16));
  std::vector<int> order;
  for (const auto& s : projected) order.push_back(s.index);
  EXPECT_EQ(order, (std::vector<int>{3, 1, 4, 0, 2}));
}

TEST(Project, ScaleAboutCameraMovesOnlyMetaDepth) {
  // T maps the meta frame into the reference frame. Scaling about a camera
  // at the origin leaves the rendered splat in place; measured in meta-frame
  // units its depth changes at rate -d per unit lambda.
  const double d = 3.0;
  const Eigen::Vector3d X(0.2, -0.1, d);
  const GaussianScene scene = single_splat_scene(isotropic_splat(X, 0.2, 0.5, Eigen::VectorXd::Ones(1)));
  const Camera cam = axis_camera(16, 16, 16);
  const double h = 1e-6;
  auto scaled = [](double lam) {
    Sim3d T;
    T.log_scale = lam;
    return T;
  };
  const Splat2D base = project_splats(scene, cam)[0];
  const Splat2D moved = project_splats(scene, transform_camera(scaled(h), cam))[0];
  EXPECT_LT((moved.mean2d - base.mean2d).norm(), 1e-12);
  EXPECT_NEAR(moved.depth, base.depth, 1e-12);
  auto meta_depth = [&](double lam) { return cam.to_camera(inverse(scaled(lam)) * X).z(); };
  EXPECT_NEAR((meta_depth(h) - meta_depth(-h)) / (2 * h), -d, 1e-6);
}

TEST(Render, EmptyPixelIsZero) {
  const GaussianScene scene =
      single_splat_scene(isotropic_splat({0, 0, 3}, 0.05, 0.9, Eigen::Vector2d(1, 2)));
  const FeatureImage image = render(scene, axis_camera(32, 32, 16), Sim3d::identity());
  EXPECT_EQ(image.pixel(0, 0), Eigen::Vector2d::Zero());
  EXPECT_EQ(image.alpha(image.index(0, 0)), 0.0);
  EXPECT_GT(image.alpha(image.index(16, 16)), 0.0);
}

TEST(Render, SingleSplatMatchesScalarOracle) {
  const Eigen::Vector3d f(0.25, -1.0, 2.0);
  for (double opacity : {0.4, 0.9999}) {
    const GaussianScene scene = single_splat_scene(isotropic_splat({0.05, -0.03, 2.0}, 0.25, opacity, f));
    const Camera cam = axis_camera(16, 16, 16);
    const FeatureImage image = render(scene, cam, Sim3d::identity());
    const Splat2D s = project_splats(scene, cam)[0];
    const Eigen::Matrix2d A = s.cov2d.inverse();
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        const Eigen::Vector2d dvec = Eigen::Vector2d(x + 0.5, y + 0.5) - s.mean2d;
        double alpha = std::min(kAlphaCeiling, opacity * std::exp(-0.5 * dvec.dot(A * dvec)));
        if (alpha < kMinAlpha) alpha = 0.0;
        EXPECT_NEAR(image.alpha(image.index(x, y)), alpha, 1e-14);
        EXPECT_LT((image.pixel(x, y) - alpha * f).cwiseAbs().maxCoeff(), 1e-14);
      }
    }
  }
}

TEST(Render, ConstantFeatureFactorizes) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GaussianScene scene = random_scene(30, 3, seed);
    const Eigen::Vector3d f(0.7, -0.2, 1.3);
    for (auto& g : scene.splats) g.feature = f;
    const FeatureImage image = render(scene, axis_camera(24, 24, 24), Sim3d::identity());
    EXPECT_TRUE(image.data.allFinite());
    EXPECT_GE(image.alpha.minCoeff(), 0.0);
    EXPECT_LE(image.alpha.maxCoeff(), 1.0);
    for (Eigen::Index p = 0; p < image.pixel_count(); ++p) {
      EXPECT_LT((image.data.col(p) - image.alpha(p) * f).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(Render, DenseOpaqueStackStopsEarly) {
  GaussianScene scene;
  scene.feature_dim = 1;
  for (int i = 0; i < 40; ++i) {
    scene.splats.push_back(isotropic_splat({0, 0, 2.0 + 0.01 * i}, 1.0, 0.99, Eigen::VectorXd::Constant(1, i)));
  }
  const FeatureImage image = render(scene, axis_camera(8, 8, 8), Sim3d::identity());
  EXPECT_LE(image.alpha.maxCoeff(), 1.0);
  EXPECT_GT(image.alpha.maxCoeff(), 1.0 - 1e-4 * 1.01);
  // Only the first few splats contribute, so the feature stays small.
  EXPECT_LT(image.data.maxCoeff(), 2.0);
}

TEST(Jacobian, ImageMatchesPlainRender) {
  const GaussianScene scene = random_scene(20, 4, 3);
  const Camera cam = axis_camera(16, 16, 16);
  std::mt19937_64 rng(3);
  const Sim3d T = compose(exp_sim3<double>(Tangent7d::Constant(0.02)), Sim3d::identity());
  const auto [image, jacobian] = render_with_jacobian(scene, cam, T);
  const FeatureImage plain = render(scene, cam, T);
  EXPECT_EQ(image.data, plain.data);
  EXPECT_EQ(image.alpha, plain.alpha);
  EXPECT_EQ(jacobian.data.rows(), image.pixel_count() * 4);
}

TEST(Jacobian, ZeroAtTransparentPixels) {
  const GaussianScene scene = single_splat_scene(isotropic_splat({0, 0, 3}, 0.05, 0.9, Eigen::Vector2d(1, 2)));
  const auto [image, jacobian] = render_with_jacobian(scene, axis_camera(32, 32, 16), Sim3d::identity());
  for (Eigen::Index p = 0; p < image.pixel_count(); ++p) {
    if (image.alpha(p) == 0.0) {
      EXPECT_TRUE(jacobian.data.middleRows(p * 2, 2).isZero(0.0));
    }
  }
}

TEST(Jacobian, ScaleColumnVanishesForCameraAtScaleCenter) {
  const GaussianScene scene = random_scene(10, 3, 4);
  const auto [image, jacobian] = render_with_jacobian(scene, axis_camera(16, 16, 16), Sim3d::identity());
  EXPECT_GT(image.alpha.maxCoeff(), 0.1);
  EXPECT_LT(jacobian.data.col(6).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Jacobian, MatchesCentralDifferences) {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GaussianScene scene = random_scene(10, 4, 100 + seed);
    Camera cam = axis_camera(16, 16, 16);
    cam.translation = Eigen::Vector3d(0.1, -0.05, 0.3);
    const Sim3d T = exp_sim3<double>(Tangent7d::NullaryExpr([&] { return 0.05 * std::normal_distribution<>()(rng); }));
    const testing::JacobianCheck check = testing::check_jacobian(scene, cam, T);
    EXPECT_GT(check.checked, 20);
    EXPECT_GE(check.pass_fraction(), 0.99) << "seed " << seed << " worst " << check.worst;
  }
}

TEST(Vjp, EqualsJacobianTransposeProduct) {
  const GaussianScene scene = random_scene(25, 3, 6);
  const Camera cam = axis_camera(16, 16, 16);
  const Sim3d T = exp_sim3<double>(Tangent7d::Constant(0.01));
  const auto [image, jacobian] = render_with_jacobian(scene, cam, T);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  const Eigen::VectorXd g = Eigen::VectorXd::NullaryExpr(image.data.size(), [&] { return n(rng); });
  const auto [vjp_image, gradient] = render_with_vjp(scene, cam, T, Attribute::kFeature,
                                                     [&](Eigen::Index p, const double* value, double* out) {
                                                       for (int c = 0; c < 3; ++c) {
                                                         EXPECT_EQ(value[c], image.data(c, p));
                                                         out[c] = g(p * 3 + c);
                                                       }
                                                     });
  const Tangent7d expected = jacobian.data.transpose() * g;
  EXPECT_EQ(vjp_image.data, image.data);
  EXPECT_LT((gradient - expected).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, expected.cwiseAbs().maxCoeff()));
}

TEST(CompositingWeights, ReproduceRenderAndAlpha) {
  const GaussianScene scene = random_scene(40, 5, 7);
  const Camera cam = axis_camera(20, 16, 18);
  const Sim3d T = exp_sim3<double>(Tangent7d::Constant(-0.01));
  const auto W = compositing_weights(scene, cam, T);
  Eigen::MatrixXd F(scene.splats.size(), 5);
  for (std::size_t i = 0; i < scene.splats.size(); ++i) F.row(static_cast<Eigen::Index>(i)) = scene.splats[i].feature;
  const FeatureImage image = render(scene, cam, T);
  EXPECT_LT((Eigen::MatrixXd(W * F).transpose() - image.data).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::VectorXd row_sums = W * Eigen::VectorXd::Ones(W.cols());
  EXPECT_LT((row_sums - image.alpha).cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace
}  // namespace splatalign
