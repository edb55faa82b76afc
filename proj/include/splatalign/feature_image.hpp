#pragma once

#include <Eigen/Core>

namespace splatalign {

/// H x W grid of C-dimensional feature vectors plus accumulated opacity.
/// Pixel (x, y) lives in column y * width + x of `data`, so the flattened
/// buffer is row-major with channels fastest.
struct FeatureImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  Eigen::MatrixXd data;
  Eigen::VectorXd alpha;

  FeatureImage() = default;
  FeatureImage(int w, int h, int c)
      : width(w),
        height(h),
        channels(c),
        data(Eigen::MatrixXd::Zero(c, static_cast<Eigen::Index>(w) * h)),
        alpha(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(w) * h)) {}

  Eigen::Index pixel_count() const { return static_cast<Eigen::Index>(width) * height; }
  Eigen::Index index(int x, int y) const { return static_cast<Eigen::Index>(y) * width + x; }

  auto pixel(int x, int y) { return data.col(index(x, y)); }
  auto pixel(int x, int y) const { return data.col(index(x, y)); }

  bool same_shape(const FeatureImage& other) const {
    return width == other.width && height == other.height && channels == other.channels;
  }
};

}  // namespace splatalign
