#include "pcforge/features.hpp"

#include <algorithm>
#include <cmath>

namespace pcforge {

std::string to_string(ChannelRole r) {
  switch (r) {
    case ChannelRole::intensity: return "intensity";
    case ChannelRole::mask: return "mask";
    case ChannelRole::sobel: return "sobel";
    case ChannelRole::external: return "external";
  }
  return "?";
}

int FeatureImage::channel_of(ChannelRole r) const {
  const auto it = std::find(roles.begin(), roles.end(), r);
  return it == roles.end() ? -1 : static_cast<int>(it - roles.begin());
}

FeatureImage build_condition_image(const GrayImage& intensity, const BinaryMask& mask, const GrayImage& edges,
                                   const std::optional<io::FloatGrid>& external) {
  if (!intensity.same_shape(mask) || !intensity.same_shape(edges))
    throw ShapeError("condition inputs must share dimensions");
  if (external && (external->width != intensity.width || external->height != intensity.height))
    throw ShapeError("external feature grid dimensions differ from the image");

  FeatureImage fi;
  fi.width = intensity.width;
  fi.height = intensity.height;
  fi.roles = {ChannelRole::intensity, ChannelRole::mask, ChannelRole::sobel};
  const int extra = external ? external->channels : 0;
  for (int c = 0; c < extra; ++c) fi.roles.push_back(ChannelRole::external);
  fi.channels = static_cast<int>(fi.roles.size());
  fi.data.resize(static_cast<std::size_t>(fi.width) * fi.height * fi.channels);

  for (int y = 0; y < fi.height; ++y) {
    for (int x = 0; x < fi.width; ++x) {
      double* px = fi.data.data() + (static_cast<std::size_t>(y) * fi.width + x) * fi.channels;
      px[0] = intensity(x, y);
      px[1] = mask(x, y) ? 1.0 : 0.0;
      px[2] = edges(x, y);
      for (int c = 0; c < extra; ++c) px[3 + c] = external->at(x, y, c);
    }
  }
  for (double v : fi.data)
    if (!std::isfinite(v)) throw ShapeError("condition image has non-finite values");
  return fi;
}

FeatureCloud project_features(const PointCloud& x_t, const CameraPose& pose, const Intrinsics& k,
                              const FeatureImage& fi, double fill, int splat_radius) {
  if (fi.width != k.width || fi.height != k.height) throw ShapeError("feature image does not match intrinsics");
  const std::size_t n = x_t.size();
  const int c = fi.channels;

  // Ownership is settled by the sequential z-buffer before any assignment.
  const Rasterization r = rasterize_points(x_t, pose, k, splat_radius);
  std::vector<unsigned char> owns(n, 0);
  for (auto o : r.depth.owner)
    if (o != DepthMap::kNoOwner) owns[static_cast<std::size_t>(o)] = 1;

  FeatureCloud fc{n, c, std::vector<double>(n * static_cast<std::size_t>(c), fill)};
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    if (!owns[i]) continue;
    const Point3 cam = pose.to_camera(x_t[i]);
    const int px = round_pixel(k.focal * cam.x / cam.z + k.cx);
    const int py = round_pixel(k.focal * cam.y / cam.z + k.cy);
    if (px < 0 || py < 0 || px >= k.width || py >= k.height) continue;
    const auto src = fi.at(px, py);
    std::copy(src.begin(), src.end(), fc.data.begin() + i * c);
  }
  return fc;
}

}  // namespace pcforge
