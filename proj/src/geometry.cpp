#include "pcforge/geometry.hpp"

#include <algorithm>
#include <random>

#include "pcforge/errors.hpp"

namespace pcforge {

double TriangleMesh::face_area(std::size_t f) const {
  const auto& [i, j, k] = faces[f];
  const Point3 e1 = vertices[j] - vertices[i];
  const Point3 e2 = vertices[k] - vertices[i];
  return 0.5 * e1.cross(e2).norm();
}

double TriangleMesh::total_area() const {
  double total = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) total += face_area(f);
  return total;
}

void TriangleMesh::validate() const {
  for (const auto& v : vertices)
    if (!v.finite()) throw DegenerateMeshError("mesh has a non-finite vertex");
  for (const auto& face : faces)
    for (auto idx : face)
      if (idx >= vertices.size()) throw DegenerateMeshError("face index out of range");
  if (!(total_area() > 0.0)) throw DegenerateMeshError("mesh has zero total area");
}

PointCloud UnitSphereTransform::apply(const PointCloud& pc) const {
  PointCloud out(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) out[i] = apply(pc[i]);
  return out;
}

PointCloud UnitSphereTransform::invert(const PointCloud& pc) const {
  PointCloud out(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) out[i] = invert(pc[i]);
  return out;
}

SurfaceSample sample_mesh_with_faces(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample_mesh: n must be at least 1");
  mesh.validate();

  // Zero-area faces get an empty CDF bucket and are never selected.
  std::vector<double> cdf(mesh.faces.size());
  double running = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    running += mesh.face_area(f);
    cdf[f] = running;
  }
  const double total = running;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  SurfaceSample out;
  out.cloud.points.resize(n);
  out.face_index.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double pick = uniform(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
    if (it == cdf.end()) --it;
    // Skip any trailing zero-width buckets that upper_bound could land on.
    while (it != cdf.begin() && *it == *(it - 1)) --it;
    const auto f = static_cast<std::size_t>(it - cdf.begin());

    const double r1 = uniform(rng);
    const double r2 = uniform(rng);
    const double s1 = std::sqrt(r1);
    const auto& [i, j, k] = mesh.faces[f];
    const double wb = s1 * (1.0 - r2);
    const double wc = s1 * r2;
    const Point3& a = mesh.vertices[i];
    const Point3& b = mesh.vertices[j];
    const Point3& c = mesh.vertices[k];
    // Edge form keeps coordinates shared by all three vertices exact; the
    // clamp removes last-ulp excursions outside the triangle's extent.
    Point3 p = a + wb * (b - a) + wc * (c - a);
    p.x = std::clamp(p.x, std::min({a.x, b.x, c.x}), std::max({a.x, b.x, c.x}));
    p.y = std::clamp(p.y, std::min({a.y, b.y, c.y}), std::max({a.y, b.y, c.y}));
    p.z = std::clamp(p.z, std::min({a.z, b.z, c.z}), std::max({a.z, b.z, c.z}));
    out.cloud[s] = p;
    out.face_index[s] = static_cast<std::uint32_t>(f);
  }
  return out;
}

PointCloud sample_mesh(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  return sample_mesh_with_faces(mesh, n, seed).cloud;
}

Point3 centroid(const PointCloud& pc) {
  if (pc.empty()) throw ShapeError("centroid of an empty cloud");
  Point3 sum;
  for (const auto& p : pc) sum += p;
  return sum * (1.0 / static_cast<double>(pc.size()));
}

std::pair<PointCloud, UnitSphereTransform> normalize_unit_sphere(const PointCloud& pc) {
  const Point3 c = centroid(pc);
  double max_sq = 0.0;
  for (const auto& p : pc) max_sq = std::max(max_sq, squared_distance(p, c));
  if (!(max_sq > 0.0)) throw ZeroScaleError("normalize_unit_sphere: all points identical");

  UnitSphereTransform xf{c, std::sqrt(max_sq)};
  PointCloud out(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) out[i] = (pc[i] - c) * (1.0 / xf.scale);
  return {std::move(out), xf};
}

PointCloud center_cloud(const PointCloud& pc) {
  const Point3 c = centroid(pc);
  PointCloud out(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) out[i] = pc[i] - c;
  return out;
}

double point_triangle_distance(const Point3& p, const Point3& a, const Point3& b, const Point3& c) {
  // Ericson, Real-Time Collision Detection, closest point on triangle.
  const Point3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return (p - a).norm();
  const Point3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return (p - b).norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + ab * (d1 / (d1 - d3)))).norm();
  const Point3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return (p - c).norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + ac * (d2 / (d2 - d6)))).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return (p - (b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6))))).norm();
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return (p - (a + ab * v + ac * w)).norm();
}

}  // namespace pcforge
