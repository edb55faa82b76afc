#include "splatalign/distill.hpp"

#include <cmath>

#include "splatalign/renderer.hpp"

namespace splatalign {
namespace {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Problem {
  std::vector<SparseRows> weights;      // pixels x splats
  std::vector<Eigen::MatrixXd> targets; // pixels x target channels
  Eigen::MatrixXd decoder;              // splat channels x target channels
};

Problem build_problem(const GaussianScene& scene, const std::vector<PosedTarget>& targets,
                      const DistillOptions& options) {
  if (targets.empty()) throw NoTargets();
  Problem p;
  const int c_splat = scene.feature_dim;
  p.decoder = options.decoder ? *options.decoder : Eigen::MatrixXd::Identity(c_splat, c_splat);
  if (p.decoder.rows() != c_splat) {
    throw DecoderShapeMismatch("decoder has " + std::to_string(p.decoder.rows()) +
                               " rows but splats carry " + std::to_string(c_splat) + " channels");
  }
  for (const PosedTarget& t : targets) {
    if (t.target.channels != p.decoder.cols()) {
      throw DecoderShapeMismatch("target has " + std::to_string(t.target.channels) +
                                 " channels but the decoder produces " + std::to_string(p.decoder.cols()));
    }
    if (t.target.width != t.camera.intrinsics.width || t.target.height != t.camera.intrinsics.height) {
      throw ShapeMismatch("target size differs from its camera");
    }
    p.weights.push_back(compositing_weights(scene, t.camera, Sim3d::identity()));
    p.targets.push_back(t.target.data.transpose());
  }
  return p;
}

Eigen::MatrixXd feature_matrix(const GaussianScene& scene) {
  Eigen::MatrixXd f(static_cast<Eigen::Index>(scene.splats.size()), scene.feature_dim);
  for (std::size_t i = 0; i < scene.splats.size(); ++i) f.row(static_cast<Eigen::Index>(i)) = scene.splats[i].feature.transpose();
  return f;
}

// Loss and gradient with respect to the (splats x channels) features.
double evaluate(const Problem& p, const Eigen::MatrixXd& features, DistillNorm norm, Eigen::MatrixXd* grad) {
  double loss = 0.0;
  if (grad != nullptr) grad->setZero(features.rows(), features.cols());
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    const Eigen::MatrixXd residual = p.weights[i] * features * p.decoder - p.targets[i];
    const double count = static_cast<double>(residual.size());
    if (norm == DistillNorm::kL2) {
      loss += residual.squaredNorm() / count;
      if (grad != nullptr) *grad += (p.weights[i].transpose() * (2.0 * residual / count)) * p.decoder.transpose();
    } else {
      loss += residual.cwiseAbs().sum() / count;
      if (grad != nullptr) {
        const Eigen::MatrixXd sign = residual.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
        *grad += (p.weights[i].transpose() * (sign / count)) * p.decoder.transpose();
      }
    }
  }
  return loss;
}

}  // namespace

GaussianScene distill_features(const GaussianScene& scene, const std::vector<PosedTarget>& targets,
                               const DistillOptions& options) {
  if (options.steps < 0) throw SpecInvalid("steps must be >= 0");
  const Problem problem = build_problem(scene, targets, options);
  Eigen::MatrixXd features = feature_matrix(scene);

  // Adam on the features; the gradient is the adjoint of the fixed weights.
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(features.rows(), features.cols());
  Eigen::MatrixXd v = m;
  Eigen::MatrixXd grad;
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-15;
  const double decay = options.steps > 1
                           ? std::pow(options.final_learning_rate / options.learning_rate, 1.0 / (options.steps - 1))
                           : 1.0;
  double lr = options.learning_rate;
  for (int step = 1; step <= options.steps; ++step) {
    evaluate(problem, features, options.norm, &grad);
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(beta1, step);
    const double bc2 = 1.0 - std::pow(beta2, step);
    features.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    lr *= decay;
  }

  GaussianScene out = scene;
  for (std::size_t i = 0; i < out.splats.size(); ++i) out.splats[i].feature = features.row(static_cast<Eigen::Index>(i)).transpose();
  return out;
}

double distill_loss(const GaussianScene& scene, const std::vector<PosedTarget>& targets,
                    const DistillOptions& options) {
  const Problem problem = build_problem(scene, targets, options);
  return evaluate(problem, feature_matrix(scene), options.norm, nullptr);
}

}  // namespace splatalign
