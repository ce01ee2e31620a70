#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "pcforge/geometry.hpp"
#include "pcforge/grid.hpp"

namespace pcforge {

struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Point3 translation{0.0, 0.0, 1.0};

  static CameraPose from_translation(const Point3& t) { return CameraPose{Eigen::Matrix3d::Identity(), t}; }
  // Throws ConfigError unless rotation is orthonormal with determinant +1.
  void validate() const;
  Point3 to_camera(const Point3& p) const;
};

// Pinhole intrinsics. Pixel (x, y) has its center at integer coordinates,
// u grows rightward and v downward.
struct Intrinsics {
  double focal = 56.0;
  double cx = 112.0;
  double cy = 112.0;
  int width = 224;
  int height = 224;

  void validate() const;
};

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

struct Projection {
  std::size_t index;
  PixelCoord pixel;
  double depth;
};

inline int round_pixel(double c) { return static_cast<int>(std::floor(c + 0.5)); }

struct DepthMap {
  static constexpr std::int32_t kNoOwner = -1;

  int width = 0;
  int height = 0;
  std::vector<double> depth;         // +inf where empty
  std::vector<std::int32_t> owner;   // kNoOwner where empty

  DepthMap() = default;
  DepthMap(int w, int h);
  bool occupied(int x, int y) const { return owner[idx(x, y)] != kNoOwner; }
  double depth_at(int x, int y) const { return depth[idx(x, y)]; }
  std::int32_t owner_at(int x, int y) const { return owner[idx(x, y)]; }
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

struct Rasterization {
  BinaryMask mask;
  DepthMap depth;
};

// Inclusive pixel extents.
struct BoundingBox2D {
  int x_min = 0;
  int x_max = 0;
  int y_min = 0;
  int y_max = 0;

  int width() const { return x_max - x_min + 1; }
  int height() const { return y_max - y_min + 1; }
  friend bool operator==(const BoundingBox2D&, const BoundingBox2D&) = default;
};

// c = R x + T; points with c.z <= 0 are culled. Output follows input index order.
std::vector<Projection> project_points(const PointCloud& pc, const CameraPose& pose, const Intrinsics& k);
std::vector<std::size_t> culled_points(const PointCloud& pc, const CameraPose& pose);

// Chebyshev splat of each projected point around its rounded pixel; nearest
// depth owns a pixel, equal depths keep the lower point index.
Rasterization rasterize_points(const PointCloud& pc, const CameraPose& pose, const Intrinsics& k, int splat_radius = 1);

// Equivalent to bbox_of_mask(rasterize_points(...).mask) without building the grid.
std::optional<BoundingBox2D> splat_bbox(const PointCloud& pc, const CameraPose& pose, const Intrinsics& k, int splat_radius = 1);

// Union of even-odd filled polygons, tested at pixel centers.
BinaryMask rasterize_polygon_mask(const std::vector<PixelCoord>& vertices,
                                  const std::vector<std::vector<std::uint32_t>>& faces, int width, int height);

// Throws EmptyMaskError when no pixel is set.
BoundingBox2D bbox_of_mask(const BinaryMask& mask);
std::optional<BoundingBox2D> try_bbox_of_mask(const BinaryMask& mask);

}  // namespace pcforge
