#include "splatalign/eval.hpp"

#include <cmath>

namespace splatalign {

MetaImageErrors meta_errors(const Sim3d& predicted, const Sim3d& ground_truth, const MetaImage& meta,
                            double scene_unit) {
  if (meta.size() == 0) throw EmptyMetaImage();
  if (!(scene_unit > 0.0)) throw SpecInvalid("scene_unit must be positive");
  double sum_r = 0.0;
  double sum_t = 0.0;
  for (const MetaView& view : meta.views) {
    const Camera pred = transform_camera(predicted, view.camera);
    const Camera gt = transform_camera(ground_truth, view.camera);
    const double angle = geodesic_angle_deg<double>(pred.rotation, gt.rotation);
    sum_r += angle * angle;
    sum_t += (pred.center() - gt.center()).squaredNorm();
  }
  const double n = static_cast<double>(meta.size());
  return {std::sqrt(sum_r / n), std::sqrt(sum_t / n) / scene_unit};
}

Classification classify(const MetaImageErrors& e, const Thresholds& th) {
  return {e.dR < th.mta.r_deg && e.dT < th.mta.t, e.dR > th.outlier.r_deg || e.dT > th.outlier.t};
}

long MetricsReport::mta_rounded() const { return std::lround(mta_percent); }
long MetricsReport::outlier_rounded() const { return std::lround(outlier_percent); }

MetricsReport aggregate(const std::vector<std::optional<MetaImageErrors>>& entries, const Thresholds& th) {
  MetricsReport report;
  report.entries = entries;
  double sum_r = 0.0, sum_t = 0.0;
  long present = 0, accurate = 0, outliers = 0;
  for (const auto& e : entries) {
    if (!e) {
      ++report.failures;
      continue;
    }
    ++present;
    sum_r += e->dR;
    sum_t += e->dT;
    const Classification c = classify(*e, th);
    accurate += c.accurate ? 1 : 0;
    outliers += c.outlier ? 1 : 0;
  }
  if (present > 0) {
    report.mean_dR = sum_r / static_cast<double>(present);
    report.mean_dT = sum_t / static_cast<double>(present);
    report.mta_percent = 100.0 * static_cast<double>(accurate) / static_cast<double>(present);
    report.outlier_percent = 100.0 * static_cast<double>(outliers) / static_cast<double>(present);
  }
  return report;
}

double pairwise_geodesic(const std::vector<Eigen::Matrix3d>& pred_a, const std::vector<Eigen::Matrix3d>& pred_b,
                         const std::vector<Eigen::Matrix3d>& gt_a, const std::vector<Eigen::Matrix3d>& gt_b) {
  if (pred_a.size() != gt_a.size() || pred_b.size() != gt_b.size()) {
    throw LengthMismatch("prediction and ground-truth groups differ in length");
  }
  if (pred_a.empty() || pred_b.empty()) throw LengthMismatch("empty rotation group");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred_a.size(); ++i) {
    for (std::size_t j = 0; j < pred_b.size(); ++j) {
      const Eigen::Matrix3d rel_pred = pred_a[i] * pred_b[j].transpose();
      const Eigen::Matrix3d rel_gt = gt_a[i] * gt_b[j].transpose();
      sum += geodesic_angle_deg<double>(rel_pred, rel_gt);
    }
  }
  return sum / static_cast<double>(pred_a.size() * pred_b.size());
}

std::vector<SweepRow> threshold_sweep(const std::vector<std::optional<MetaImageErrors>>& entries,
                                      const std::vector<double>& r_values, const std::vector<double>& t_values) {
  std::vector<SweepRow> rows;
  for (const char* metric : {"MTA", "O%"}) {
    for (double r : r_values) {
      for (double t : t_values) {
        Thresholds th;
        th.mta = {r, t};
        th.outlier = {r, t};
        const MetricsReport report = aggregate(entries, th);
        const bool is_mta = std::string(metric) == "MTA";
        rows.push_back({metric, {r, t}, is_mta ? report.mta_percent : report.outlier_percent});
      }
    }
  }
  return rows;
}

}  // namespace splatalign
