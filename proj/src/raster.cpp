#include "pcforge/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>

#include "pcforge/errors.hpp"

namespace pcforge {

void CameraPose::validate() const {
  const Eigen::Matrix3d should_be_identity = rotation.transpose() * rotation;
  if (!should_be_identity.isApprox(Eigen::Matrix3d::Identity(), 1e-9))
    throw ConfigError("camera rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) throw ConfigError("camera rotation has determinant != +1");
  if (!translation.finite()) throw ConfigError("camera translation is not finite");
}

Point3 CameraPose::to_camera(const Point3& p) const {
  const auto& r = rotation;
  return {r(0, 0) * p.x + r(0, 1) * p.y + r(0, 2) * p.z + translation.x,
          r(1, 0) * p.x + r(1, 1) * p.y + r(1, 2) * p.z + translation.y,
          r(2, 0) * p.x + r(2, 1) * p.y + r(2, 2) * p.z + translation.z};
}

void Intrinsics::validate() const {
  if (!(focal > 0.0)) throw ConfigError("focal length must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("image size must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
    throw ConfigError("principal point outside the image");
}

DepthMap::DepthMap(int w, int h)
    : width(w),
      height(h),
      depth(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity()),
      owner(static_cast<std::size_t>(w) * h, kNoOwner) {}

std::vector<Projection> project_points(const PointCloud& pc, const CameraPose& pose, const Intrinsics& k) {
  const std::size_t n = pc.size();
  std::vector<Projection> all(n);
  std::vector<unsigned char> keep(n, 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const Point3 c = pose.to_camera(pc[i]);
    if (c.z > 0.0) {
      all[i] = {static_cast<std::size_t>(i), {k.focal * c.x / c.z + k.cx, k.focal * c.y / c.z + k.cy}, c.z};
      keep[i] = 1;
    }
  }
  std::vector<Projection> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) out.push_back(all[i]);
  return out;
}

std::vector<std::size_t> culled_points(const PointCloud& pc, const CameraPose& pose) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pc.size(); ++i)
    if (!(pose.to_camera(pc[i]).z > 0.0)) out.push_back(i);
  return out;
}

Rasterization rasterize_points(const PointCloud& pc, const CameraPose& pose, const Intrinsics& k, int splat_radius) {
  if (splat_radius < 0) throw ConfigError("splat radius must be non-negative");
  Rasterization r{BinaryMask(k.width, k.height), DepthMap(k.width, k.height)};
  for (const auto& p : project_points(pc, pose, k)) {
    const int px = round_pixel(p.pixel.u);
    const int py = round_pixel(p.pixel.v);
    const int x0 = std::max(px - splat_radius, 0), x1 = std::min(px + splat_radius, k.width - 1);
    const int y0 = std::max(py - splat_radius, 0), y1 = std::min(py + splat_radius, k.height - 1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const auto cell = r.depth.idx(x, y);
        if (p.depth < r.depth.depth[cell]) {
          r.depth.depth[cell] = p.depth;
          r.depth.owner[cell] = static_cast<std::int32_t>(p.index);
        }
        r.mask.data[cell] = 1;
      }
    }
  }
  return r;
}

std::optional<BoundingBox2D> splat_bbox(const PointCloud& pc, const CameraPose& pose, const Intrinsics& k,
                                        int splat_radius) {
  if (splat_radius < 0) throw ConfigError("splat radius must be non-negative");
  BoundingBox2D box{std::numeric_limits<int>::max(), std::numeric_limits<int>::min(),
                    std::numeric_limits<int>::max(), std::numeric_limits<int>::min()};
  bool any = false;
  for (const auto& p : pc) {
    const Point3 c = pose.to_camera(p);
    if (!(c.z > 0.0)) continue;
    const double u = k.focal * c.x / c.z + k.cx;
    const double v = k.focal * c.y / c.z + k.cy;
    const int px = round_pixel(u), py = round_pixel(v);
    const int x0 = std::max(px - splat_radius, 0), x1 = std::min(px + splat_radius, k.width - 1);
    const int y0 = std::max(py - splat_radius, 0), y1 = std::min(py + splat_radius, k.height - 1);
    if (x0 > x1 || y0 > y1) continue;
    any = true;
    box.x_min = std::min(box.x_min, x0);
    box.x_max = std::max(box.x_max, x1);
    box.y_min = std::min(box.y_min, y0);
    box.y_max = std::max(box.y_max, y1);
  }
  if (!any) return std::nullopt;
  return box;
}

BinaryMask rasterize_polygon_mask(const std::vector<PixelCoord>& vertices,
                                  const std::vector<std::vector<std::uint32_t>>& faces, int width, int height) {
  BinaryMask mask(width, height);
  std::vector<double> crossings;
  for (const auto& face : faces) {
    if (face.size() < 3) throw ConfigError("polygon face needs at least 3 vertices");
    double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
    for (auto idx : face) {
      if (idx >= vertices.size()) throw ConfigError("polygon vertex index out of range");
      vmin = std::min(vmin, vertices[idx].v);
      vmax = std::max(vmax, vertices[idx].v);
    }
    const int row0 = std::max(0, static_cast<int>(std::floor(vmin)));
    const int row1 = std::min(height - 1, static_cast<int>(std::ceil(vmax)));
    // Scanline form of the crossing-number test: a center (x, y) is inside iff
    // an odd number of edge crossings lie strictly to its right.
    for (int y = row0; y <= row1; ++y) {
      crossings.clear();
      const double yc = y;
      for (std::size_t a = 0, b = face.size() - 1; a < face.size(); b = a++) {
        const PixelCoord& pa = vertices[face[a]];
        const PixelCoord& pb = vertices[face[b]];
        if ((pa.v > yc) != (pb.v > yc)) crossings.push_back((pb.u - pa.u) * (yc - pa.v) / (pb.v - pa.v) + pa.u);
      }
      std::sort(crossings.begin(), crossings.end());
      // On [c[k-1], c[k]) exactly m - k crossings lie to the right.
      const std::size_t m = crossings.size();
      for (std::size_t k = 0; k < m; ++k) {
        if ((m - k) % 2 == 0) continue;
        const double lo = k == 0 ? -std::numeric_limits<double>::infinity() : crossings[k - 1];
        const double hi = crossings[k];
        const int x_start = static_cast<int>(std::clamp(std::ceil(lo), 0.0, static_cast<double>(width)));
        const int x_end = static_cast<int>(std::clamp(std::ceil(hi) - 1.0, -1.0, static_cast<double>(width - 1)));
        for (int x = x_start; x <= x_end; ++x) mask(x, y) = 1;
      }
    }
  }
  return mask;
}

std::optional<BoundingBox2D> try_bbox_of_mask(const BinaryMask& mask) {
  BoundingBox2D box{mask.width, -1, mask.height, -1};
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask(x, y)) continue;
      box.x_min = std::min(box.x_min, x);
      box.x_max = std::max(box.x_max, x);
      box.y_min = std::min(box.y_min, y);
      box.y_max = std::max(box.y_max, y);
    }
  }
  if (box.x_max < 0) return std::nullopt;
  return box;
}

BoundingBox2D bbox_of_mask(const BinaryMask& mask) {
  auto box = try_bbox_of_mask(mask);
  if (!box) throw EmptyMaskError("bounding box of an empty mask");
  return *box;
}

}  // namespace pcforge
