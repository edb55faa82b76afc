#include <gtest/gtest.h>

#include <random>

#include "splatalign/objective.hpp"
#include "test_util.hpp"

namespace splatalign {
namespace {

using testing::axis_camera;
using testing::random_scene;

FeatureImage image_from(int w, int h, std::initializer_list<double> values) {
  FeatureImage image(w, h, 1);
  Eigen::Index i = 0;
  for (double v : values) image.data(0, i++) = v;
  return image;
}

MetaImage random_meta(const GaussianScene& scene, int n_images, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.05);
  MetaImage meta;
  meta.id = "meta";
  for (int i = 0; i < n_images; ++i) {
    MetaView view;
    view.name = "img_" + std::to_string(i);
    view.camera = axis_camera(16, 16, 16);
    view.camera.rotation = exp_so3<double>(Eigen::Vector3d(n(rng), n(rng), n(rng)));
    view.camera.translation = Eigen::Vector3d(n(rng), n(rng), n(rng));
    // Targets from a slightly different pose plus noise so residuals are nonzero.
    const Sim3d offset = exp_sim3<double>(Tangent7d::NullaryExpr([&] { return 0.3 * n(rng); }));
    view.target = render(scene, view.camera, offset);
    view.target.data.array() += Eigen::ArrayXXd::NullaryExpr(view.target.channels, view.target.pixel_count(),
                                                             [&] { return n(rng); });
    view.color_target = render(scene, view.camera, offset, Attribute::kColor);
    meta.views.push_back(std::move(view));
  }
  return meta;
}

TEST(ImageLoss, IdenticalImagesGiveZero) {
  const FeatureImage a = render(random_scene(10, 3, 1), axis_camera(8, 8, 8), Sim3d::identity());
  EXPECT_EQ(image_loss(a, a, LossKind::kSemanticL1), 0.0);
  EXPECT_EQ(image_loss(a, a, LossKind::kSemanticL2), 0.0);
}

TEST(ImageLoss, ConstantResidual) {
  FeatureImage r(4, 3, 2), t(4, 3, 2);
  r.data.setConstant(1.0);
  t.data.setConstant(1.75);
  EXPECT_DOUBLE_EQ(image_loss(r, t, LossKind::kSemanticL1), 0.75);
  EXPECT_DOUBLE_EQ(image_loss(r, t, LossKind::kSemanticL2), 0.5625);
}

TEST(ImageLoss, HandEvaluatedTwoPixels) {
  EXPECT_DOUBLE_EQ(image_loss(image_from(2, 1, {1, 3}), image_from(2, 1, {0, 1}), LossKind::kSemanticL1), 1.5);
  EXPECT_DOUBLE_EQ(image_loss(image_from(2, 1, {1, 3}), image_from(2, 1, {0, 1}), LossKind::kSemanticL2), 2.5);
}

TEST(ImageLoss, ShapeMismatchThrows) {
  EXPECT_THROW(image_loss(FeatureImage(2, 2, 1), FeatureImage(2, 2, 2), LossKind::kSemanticL1), ShapeMismatch);
  EXPECT_THROW(image_loss(FeatureImage(2, 2, 1), FeatureImage(2, 3, 1), LossKind::kSemanticL1), ShapeMismatch);
}

TEST(ImageLossGrad, ShapeMismatchThrowsBeforeRendering) {
  const GaussianScene scene = random_scene(5, 3, 2);
  EXPECT_THROW(image_loss_and_grad(scene, axis_camera(8, 8, 8), Sim3d::identity(), FeatureImage(8, 7, 3),
                                   LossKind::kSemanticL1),
               ShapeMismatch);
  EXPECT_THROW(image_loss_and_grad(scene, axis_camera(8, 8, 8), Sim3d::identity(), FeatureImage(8, 8, 2),
                                   LossKind::kPhotometricL1),
               ShapeMismatch);
}

TEST(ImageLossGrad, ZeroResidualGivesZeroGradient) {
  const GaussianScene scene = random_scene(15, 3, 3);
  const Camera cam = axis_camera(16, 16, 16);
  const Sim3d T = exp_sim3<double>(Tangent7d::Constant(0.02));
  const FeatureImage target = render(scene, cam, T);
  for (LossKind kind : {LossKind::kSemanticL1, LossKind::kSemanticL2}) {
    const LossGradient lg = image_loss_and_grad(scene, cam, T, target, kind);
    EXPECT_EQ(lg.loss, 0.0);
    EXPECT_TRUE(lg.gradient.isZero(0.0));
  }
}

TEST(ImageLossGrad, MatchesFiniteDifferences) {
  for (LossKind kind : {LossKind::kSemanticL1, LossKind::kSemanticL2, LossKind::kPhotometricL1}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const GaussianScene scene = random_scene(12, 3, 40 + seed);
      const MetaImage meta = random_meta(scene, 1, seed);
      const MetaView& view = meta.views[0];
      const FeatureImage& target = target_for(view, kind);
      const Sim3d T = exp_sim3<double>(Tangent7d::Constant(0.01));
      const LossGradient lg = image_loss_and_grad(scene, view.camera, T, target, kind);
      const double h = 1e-6;
      Tangent7d fd;
      for (int k = 0; k < 7; ++k) {
        Tangent7d xi = Tangent7d::Zero();
        xi(k) = h;
        auto loss_at = [&](const Tangent7d& d) {
          return image_loss(render(scene, view.camera, compose(T, exp_sim3(d)), attribute_for(kind)), target, kind);
        };
        fd(k) = (loss_at(xi) - loss_at(-xi)) / (2 * h);
      }
      EXPECT_LT((lg.gradient - fd).norm(), 1e-3 * std::max(fd.norm(), 1e-9))
          << "kind " << static_cast<int>(kind) << " seed " << seed << "\n" << lg.gradient.transpose() << "\n" << fd.transpose();
    }
  }
}

TEST(ImageLossGrad, L2GradientIsTwiceMeanResidualTimesJacobian) {
  const GaussianScene scene = random_scene(12, 3, 50);
  const MetaImage meta = random_meta(scene, 1, 50);
  const MetaView& view = meta.views[0];
  const Sim3d T = exp_sim3<double>(Tangent7d::Constant(-0.01));
  const auto [image, jacobian] = render_with_jacobian(scene, view.camera, T);
  const Eigen::MatrixXd residual = image.data - view.target.data;
  const Eigen::Map<const Eigen::VectorXd> r(residual.data(), residual.size());
  const double n = static_cast<double>(residual.size());
  const Tangent7d l2 = 2.0 * jacobian.data.transpose() * r / n;
  const Tangent7d l1 = jacobian.data.transpose() * r.unaryExpr([](double v) { return double((v > 0) - (v < 0)); }) / n;
  const LossGradient g2 = image_loss_and_grad(scene, view.camera, T, view.target, LossKind::kSemanticL2);
  const LossGradient g1 = image_loss_and_grad(scene, view.camera, T, view.target, LossKind::kSemanticL1);
  EXPECT_LT((g2.gradient - l2).cwiseAbs().maxCoeff(), 1e-12 * l2.cwiseAbs().maxCoeff());
  EXPECT_LT((g1.gradient - l1).cwiseAbs().maxCoeff(), 1e-12 * l1.cwiseAbs().maxCoeff());
}

TEST(MetaLoss, IdenticalImagesGiveTheSameGradient) {
  const GaussianScene scene = random_scene(12, 3, 60);
  MetaImage meta = random_meta(scene, 1, 60);
  for (int i = 0; i < 3; ++i) meta.views.push_back(meta.views[0]);
  const Sim3d T = exp_sim3<double>(Tangent7d::Constant(0.01));
  const MetaLoss all = meta_loss(scene, meta, T, LossKind::kSemanticL1, std::vector<bool>(4, true));
  const LossGradient single = image_loss_and_grad(scene, meta.views[0].camera, T, meta.views[0].target,
                                                  LossKind::kSemanticL1);
  EXPECT_LT((all.gradient - single.gradient).cwiseAbs().maxCoeff(), 1e-15);
  for (double l : all.table.losses) EXPECT_EQ(l, single.loss);
}

TEST(MetaLoss, MeanOfPerImageGradients) {
  const GaussianScene scene = random_scene(15, 3, 61);
  const MetaImage meta = random_meta(scene, 4, 61);
  const Sim3d T = exp_sim3<double>(Tangent7d::Constant(0.005));
  for (LossKind kind : {LossKind::kSemanticL1, LossKind::kSemanticL2}) {
    const MetaLoss ml = meta_loss(scene, meta, T, kind, std::vector<bool>(4, true));
    Tangent7d expected = Tangent7d::Zero();
    for (int i = 0; i < 4; ++i) {
      const LossGradient lg = image_loss_and_grad(scene, meta.views[i].camera, T, meta.views[i].target, kind);
      expected += lg.gradient;
      EXPECT_EQ(ml.table.losses[static_cast<std::size_t>(i)], lg.loss);
    }
    expected /= 4.0;
    EXPECT_LT((ml.gradient - expected).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(MetaLoss, InactiveImageDoesNotAffectGradient) {
  const GaussianScene scene = random_scene(15, 3, 62);
  MetaImage meta = random_meta(scene, 4, 62);
  const Sim3d T = exp_sim3<double>(Tangent7d::Constant(0.005));
  const std::vector<bool> mask{true, true, false, true};
  const MetaLoss before = meta_loss(scene, meta, T, LossKind::kSemanticL1, mask);
  meta.views[2].target.data.setRandom();
  const MetaLoss after = meta_loss(scene, meta, T, LossKind::kSemanticL1, mask);
  EXPECT_EQ(before.gradient, after.gradient);
  EXPECT_NE(before.table.losses[2], after.table.losses[2]);
  EXPECT_EQ(after.table.losses[2],
            image_loss(render(scene, meta.views[2].camera, T), meta.views[2].target, LossKind::kSemanticL1));
}

TEST(MetaLoss, WeightsScaleImageGradients) {
  const GaussianScene scene = random_scene(15, 3, 63);
  const MetaImage meta = random_meta(scene, 3, 63);
  const Sim3d T = exp_sim3<double>(Tangent7d::Constant(0.005));
  const std::vector<double> w{0.5, 2.0, 0.5};
  const MetaLoss ml = meta_loss(scene, meta, T, LossKind::kSemanticL1, std::vector<bool>(3, true), w);
  Tangent7d expected = Tangent7d::Zero();
  for (int i = 0; i < 3; ++i) {
    expected += w[static_cast<std::size_t>(i)] *
                image_loss_and_grad(scene, meta.views[i].camera, T, meta.views[i].target, LossKind::kSemanticL1).gradient;
  }
  EXPECT_LT((ml.gradient - expected / 3.0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MetaLoss, Errors) {
  const GaussianScene scene = random_scene(5, 3, 64);
  MetaImage meta = random_meta(scene, 2, 64);
  EXPECT_THROW(meta_loss(scene, meta, Sim3d::identity(), LossKind::kSemanticL1, {false, false}), EmptyActiveSet);
  EXPECT_THROW(meta_loss(scene, meta, Sim3d::identity(), LossKind::kSemanticL1, {true}), ShapeMismatch);
  meta.views[1].color_target = FeatureImage();
  EXPECT_THROW(meta_loss(scene, meta, Sim3d::identity(), LossKind::kPhotometricL1, {true, true}), ShapeMismatch);
}

}  // namespace
}  // namespace splatalign
