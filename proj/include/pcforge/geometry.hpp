#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace pcforge {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Point3& operator+=(const Point3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Point3& operator-=(const Point3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Point3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  friend Point3 operator+(Point3 a, const Point3& b) { return a += b; }
  friend Point3 operator-(Point3 a, const Point3& b) { return a -= b; }
  friend Point3 operator*(Point3 a, double s) { return a *= s; }
  friend Point3 operator*(double s, Point3 a) { return a *= s; }
  friend bool operator==(const Point3&, const Point3&) = default;

  double dot(const Point3& o) const { return x * o.x + y * o.y + z * o.z; }
  Point3 cross(const Point3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double squared_norm() const { return x * x + y * y + z * z; }
  double norm() const { return std::sqrt(squared_norm()); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

// Ordered points; index i keeps its identity across diffusion steps.
struct PointCloud {
  std::vector<Point3> points;

  PointCloud() = default;
  explicit PointCloud(std::vector<Point3> p) : points(std::move(p)) {}
  explicit PointCloud(std::size_t n) : points(n) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  Point3& operator[](std::size_t i) { return points[i]; }
  const Point3& operator[](std::size_t i) const { return points[i]; }
  auto begin() { return points.begin(); }
  auto end() { return points.end(); }
  auto begin() const { return points.begin(); }
  auto end() const { return points.end(); }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

using Face = std::array<std::uint32_t, 3>;

struct TriangleMesh {
  std::vector<Point3> vertices;
  std::vector<Face> faces;

  double face_area(std::size_t f) const;
  double total_area() const;
  // Throws DegenerateMeshError on bad indices or zero total area.
  void validate() const;
};

struct UnitSphereTransform {
  Point3 center;
  double scale = 1.0;

  Point3 apply(const Point3& p) const { return (p - center) * (1.0 / scale); }
  Point3 invert(const Point3& q) const { return q * scale + center; }
  PointCloud apply(const PointCloud& pc) const;
  PointCloud invert(const PointCloud& pc) const;
};

struct SurfaceSample {
  PointCloud cloud;
  std::vector<std::uint32_t> face_index;
};

// Area-weighted uniform surface sampling; deterministic for a fixed seed.
SurfaceSample sample_mesh_with_faces(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);
PointCloud sample_mesh(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

Point3 centroid(const PointCloud& pc);

// Centroid-centered, scaled so the farthest point has norm 1.
std::pair<PointCloud, UnitSphereTransform> normalize_unit_sphere(const PointCloud& pc);

PointCloud center_cloud(const PointCloud& pc);

// Distance from p to triangle (a, b, c).
double point_triangle_distance(const Point3& p, const Point3& a, const Point3& b, const Point3& c);

}  // namespace pcforge
