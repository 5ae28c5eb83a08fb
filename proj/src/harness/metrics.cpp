#include "handreg/harness/metrics.hpp"

#include <algorithm>

#include "handreg/common/error.hpp"

namespace handreg::harness {

std::vector<double> keypoint_errors(const hand::Points& pred, const hand::Points& gt) {
  HANDREG_THROW_IF(pred.rows() != hand::kNumKeypoints || gt.rows() != hand::kNumKeypoints,
                   ErrorCode::ShapeMismatch,
                   "expected 21 keypoints, got " + std::to_string(pred.rows()) + " and " +
                       std::to_string(gt.rows()));
  std::vector<double> e(hand::kNumKeypoints);
  for (int k = 0; k < hand::kNumKeypoints; ++k) e[k] = (pred.row(k) - gt.row(k)).norm();
  return e;
}

double compute_mkpe(const hand::Points& pred, const hand::Points& gt) {
  const auto e = keypoint_errors(pred, gt);
  double sum = 0.0;
  for (double v : e) sum += v;
  return sum / static_cast<double>(e.size());
}

PckCurve pck_curve(std::span<const double> errors, double max_mm) {
  HANDREG_THROW_IF(errors.empty(), ErrorCode::EmptyInput, "no keypoint errors");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  PckCurve curve{};
  for (int i = 0; i < kPckSamples; ++i) {
    const double tau = max_mm * i / (kPckSamples - 1);
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), tau) - sorted.begin();
    curve[i] = static_cast<double>(below) / static_cast<double>(sorted.size());
  }
  return curve;
}

double auc_from_curve(std::span<const double> curve) {
  HANDREG_THROW_IF(curve.size() < 2, ErrorCode::EmptyInput, "PCK curve needs two samples");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) area += 0.5 * (curve[i - 1] + curve[i]);
  return area / static_cast<double>(curve.size() - 1);
}

double compute_auc(std::span<const double> errors, double max_mm) {
  return auc_from_curve(pck_curve(errors, max_mm));
}

}  // namespace handreg::harness
