#pragma once
// Keypoint error metrics: MKPE, PCK curve and its normalized area.

#include <array>
#include <span>
#include <vector>

#include "handreg/hand_model/hand_model.hpp"

namespace handreg::harness {

inline constexpr double kAucMaxMm = 50.0;
inline constexpr int kPckSamples = 51;  // thresholds 0, 1, ..., 50 mm
using PckCurve = std::array<double, kPckSamples>;

/// Euclidean distance per keypoint. Throws ShapeMismatch unless both are 21 x 3.
std::vector<double> keypoint_errors(const hand::Points& pred, const hand::Points& gt);
/// Mean of keypoint_errors.
double compute_mkpe(const hand::Points& pred, const hand::Points& gt);

/// Fraction of errors <= max_mm * i / 50 for i = 0..50. Throws EmptyInput.
PckCurve pck_curve(std::span<const double> errors, double max_mm = kAucMaxMm);
/// Trapezoidal integral of a PCK curve over [0, max_mm], divided by max_mm.
double auc_from_curve(std::span<const double> curve);
double compute_auc(std::span<const double> errors, double max_mm = kAucMaxMm);

}  // namespace handreg::harness
