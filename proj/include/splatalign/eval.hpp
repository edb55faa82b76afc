#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splatalign/geometry.hpp"
#include "splatalign/meta_image.hpp"

namespace splatalign {

/// RMS over the images of a meta-image of the per-camera rotation error
/// (degrees) and camera-center error (scene units).
struct MetaImageErrors {
  double dR = 0.0;
  double dT = 0.0;
};

struct ThresholdPair {
  double r_deg = 0.0;
  double t = 0.0;
};

struct Thresholds {
  ThresholdPair mta{5.0, 0.2};      // accurate if dR < r and dT < t
  ThresholdPair outlier{10.0, 0.5}; // outlier if dR > r or dT > t
};

struct Classification {
  bool accurate = false;
  bool outlier = false;
};

MetaImageErrors meta_errors(const Sim3d& predicted, const Sim3d& ground_truth, const MetaImage& meta,
                            double scene_unit);

Classification classify(const MetaImageErrors& errors, const Thresholds& thresholds);

struct MetricsReport {
  std::vector<std::optional<MetaImageErrors>> entries;
  std::optional<double> mean_dR;  // unset when every entry failed
  std::optional<double> mean_dT;
  double mta_percent = 0.0;       // of successful entries
  double outlier_percent = 0.0;
  long failures = 0;

  long mta_rounded() const;
  long outlier_rounded() const;
};

MetricsReport aggregate(const std::vector<std::optional<MetaImageErrors>>& entries,
                        const Thresholds& thresholds);

/// Mean, over all cross pairs (i in A, j in B), of the angle between the
/// predicted relative rotation R_i R_j^T and the ground-truth one.
double pairwise_geodesic(const std::vector<Eigen::Matrix3d>& pred_a, const std::vector<Eigen::Matrix3d>& pred_b,
                         const std::vector<Eigen::Matrix3d>& gt_a, const std::vector<Eigen::Matrix3d>& gt_b);

/// MTA / O% over a grid of thresholds: one row per (r, t) pair.
struct SweepRow {
  std::string metric;  // "MTA" or "O%"
  ThresholdPair threshold;
  double percent = 0.0;
};

std::vector<SweepRow> threshold_sweep(const std::vector<std::optional<MetaImageErrors>>& entries,
                                      const std::vector<double>& r_values, const std::vector<double>& t_values);

}  // namespace splatalign
