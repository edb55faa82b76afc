#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "splatalign/geometry.hpp"
#include "splatalign/feature_image.hpp"
#include "splatalign/meta_image.hpp"

namespace splatalign {

struct GaussianSplat {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d log_scales = Eigen::Vector3d::Zero();
  Eigen::Vector4d rotation_q{1.0, 0.0, 0.0, 0.0};  // (w, x, y, z)
  double opacity_logit = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  Eigen::VectorXd feature;

  double opacity() const;
  Eigen::Matrix3d covariance() const;

  bool operator==(const GaussianSplat&) const = default;
};

/// Frozen reference model. `scene_unit` is the translation-error unit, the
/// RMS distance of the reference camera centers from their centroid.
struct GaussianScene {
  std::vector<GaussianSplat> splats;
  int feature_dim = 1;
  double scene_unit = 1.0;

  bool operator==(const GaussianScene&) const = default;
};

void validate(const GaussianScene& scene);

double sigmoid(double x);
double logit(double p);

// ---------------------------------------------------------------------------
// Synthetic benchmark

struct SyntheticBenchSpec {
  int n_splats = 500;
  int feature_dim = 8;
  int n_reference_cameras = 24;
  int n_meta_images = 1;
  int images_per_meta = 8;
  double outlier_fraction = 0.0;
  double occluder_coverage = 0.25;
  double floater_fraction = 0.0;
  // Init noise: per-axis rotation bound, translation norm bound (in scene
  // units) and the scale interval. Alignment is only expected to converge
  // for rotation offsets up to roughly 10 degrees per axis.
  double rotation_noise_deg = 10.0;
  double translation_noise = 0.05;
  double scale_min = 0.9;
  double scale_max = 1.1;
  // Per-image, per-channel gain range applied to color targets only, so
  // photometric targets differ in appearance from the reference colors.
  double color_gain_jitter = 0.2;
  // Std of Gaussian noise added to every feature target value, so inlier
  // targets never match the reference exactly.
  double feature_noise = 0.0;
  int image_width = 32;
  int image_height = 24;
  double near_plane = kDefaultNearPlane;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticBench {
  GaussianScene scene;  // reference model, floaters included
  std::vector<MetaImage> metas;  // ground truth set on each
  std::vector<Sim3d> inits;
  // outliers[m][i] is true when image i of meta m carries an occluder.
  std::vector<std::vector<bool>> outliers;
};

SyntheticBench generate_synthetic_bench(const SyntheticBenchSpec& spec);

// ---------------------------------------------------------------------------
// PLY (binary little endian)

std::string scene_to_ply(const GaussianScene& scene);
GaussianScene scene_from_ply(const std::string& bytes);
void save_scene_ply(const GaussianScene& scene, const std::filesystem::path& path);
GaussianScene load_scene_ply(const std::filesystem::path& path);

}  // namespace splatalign
