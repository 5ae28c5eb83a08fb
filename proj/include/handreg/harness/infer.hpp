#pragma once
// Single-sample inference from one or two crops with their crop boxes.

#include <optional>
#include <string>

#include "handreg/geometry/rig_io.hpp"
#include "handreg/harness/model.hpp"
#include "handreg/synth/render.hpp"

namespace handreg::harness {

struct InferView {
  synth::GrayImage crop;
  geometry::BoundingBox box;  // crop box in full-frame pixels
};

/// Reads "box x_min y_min x_max y_max" from the image comments, if present.
std::optional<geometry::BoundingBox> box_from_comments(const synth::GrayImage& img);
/// Comment line that box_from_comments understands.
std::string box_comment(const geometry::BoundingBox& box);

enum class Route { MonoLeft, MonoRight, Stereo };
std::string_view route_name(Route r);

struct InferResult {
  Route route = Route::MonoLeft;
  regressor::Prediction prediction;
};

/// Stereo path when both views are given, mono path otherwise.
InferResult infer(const Model& model, const geometry::StereoRig& rig,
                  const std::optional<InferView>& left, const std::optional<InferView>& right);

std::string prediction_to_json(const InferResult& result);

}  // namespace handreg::harness
