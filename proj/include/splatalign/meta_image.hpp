#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splatalign/feature_image.hpp"
#include "splatalign/geometry.hpp"

namespace splatalign {

/// One posed image of a meta-image: a camera in the meta frame and its
/// alignment targets. `color_target` is empty unless color images exist.
struct MetaView {
  std::string name;
  Camera camera;
  FeatureImage target;
  FeatureImage color_target;
};

/// A rigid bundle of posed images sharing one unknown similarity transform
/// into the reference frame.
struct MetaImage {
  std::string id;
  std::vector<MetaView> views;
  std::optional<Sim3d> ground_truth;

  std::size_t size() const { return views.size(); }
};

}  // namespace splatalign
