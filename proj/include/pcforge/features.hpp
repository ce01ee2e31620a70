#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcforge/grid.hpp"
#include "pcforge/io.hpp"
#include "pcforge/raster.hpp"

namespace pcforge {

enum class ChannelRole { intensity, mask, sobel, external };

std::string to_string(ChannelRole r);

// H x W x C condition grid stored in HWC order.
struct FeatureImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<ChannelRole> roles;
  std::vector<double> data;

  std::span<const double> at(int x, int y) const {
    return {data.data() + (static_cast<std::size_t>(y) * width + x) * channels, static_cast<std::size_t>(channels)};
  }
  int channel_of(ChannelRole r) const;
};

// Per-point feature rows aligned by index with a PointCloud.
struct FeatureCloud {
  std::size_t points = 0;
  int channels = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * static_cast<std::size_t>(channels), static_cast<std::size_t>(channels)};
  }
};

// Channel order: [intensity, mask, sobel, external...].
FeatureImage build_condition_image(const GrayImage& intensity, const BinaryMask& mask, const GrayImage& edges,
                                   const std::optional<io::FloatGrid>& external = std::nullopt);

// Points that own at least one pixel of the z-buffered splat raster read the
// feature vector at their rounded projected pixel; occluded, culled and
// out-of-frame points get `fill` in every channel.
FeatureCloud project_features(const PointCloud& x_t, const CameraPose& pose, const Intrinsics& k,
                              const FeatureImage& fi, double fill = 0.0, int splat_radius = 1);

}  // namespace pcforge
