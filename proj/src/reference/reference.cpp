#include "pcforge/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pcforge::reference {

std::vector<Neighbor> brute_force_nearest(const PointCloud& query, const PointCloud& target) {
  std::vector<Neighbor> out(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < target.size(); ++j) {
      const double d = squared_distance(query[i], target[j]);
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    out[i] = {best_j, std::sqrt(best)};
  }
  return out;
}

std::vector<double> brute_force_distances(const PointCloud& query, const PointCloud& target) {
  std::vector<double> d;
  for (const auto& n : brute_force_nearest(query, target)) d.push_back(n.distance);
  return d;
}

double brute_force_chamfer(const PointCloud& p, const PointCloud& g, bool squared) {
  double total = 0.0;
  for (const auto* pair : {&p, &g}) {
    const PointCloud& a = *pair;
    const PointCloud& b = pair == &p ? g : p;
    double sum = 0.0;
    for (double d : brute_force_distances(a, b)) sum += squared ? d * d : d;
    total += sum / static_cast<double>(a.size());
  }
  return total;
}

double brute_force_fscore(const PointCloud& p, const PointCloud& g, double tau) {
  auto frac = [tau](const PointCloud& a, const PointCloud& b) {
    std::size_t hit = 0;
    for (double d : brute_force_distances(a, b)) hit += d < tau ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(a.size());
  };
  const double precision = frac(p, g), recall = frac(g, p);
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

GrayImage sobel_direct(const GrayImage& img) {
  // Kernel weights 1, 2, 1 along the smoothing axis, applied to the central
  // difference (+1 tap minus -1 tap) along the gradient axis.
  static constexpr double wt[3] = {1, 2, 1};
  auto at = [&](int x, int y) {
    return img(std::clamp(x, 0, img.width - 1), std::clamp(y, 0, img.height - 1));
  };
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double gx = 0.0, gy = 0.0;
      for (int j = 0; j < 3; ++j) {
        const double dx = at(x + 1, y + j - 1) - at(x - 1, y + j - 1);
        const double dy = at(x + j - 1, y + 1) - at(x + j - 1, y - 1);
        gx += wt[j] * dx;
        gy += wt[j] * dy;
      }
      out(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  double peak = 0.0;
  for (double v : out.data) peak = std::max(peak, v);
  if (peak > 0.0)
    for (double& v : out.data) v = v / peak;
  return out;
}

DepthMap zbuffer_scan(const PointCloud& pc, const CameraPose& pose, const Intrinsics& k, int splat_radius) {
  DepthMap dm(k.width, k.height);
  // Precompute each point's rounded pixel and depth, then scan pixels.
  struct Proj { int px, py; double depth; bool valid; };
  std::vector<Proj> proj(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Point3 c = pose.to_camera(pc[i]);
    if (c.z <= 0.0) {
      proj[i] = {0, 0, 0.0, false};
      continue;
    }
    proj[i] = {static_cast<int>(std::floor(k.focal * c.x / c.z + k.cx + 0.5)),
               static_cast<int>(std::floor(k.focal * c.y / c.z + k.cy + 0.5)), c.z, true};
  }
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      double best = std::numeric_limits<double>::infinity();
      std::int32_t owner = DepthMap::kNoOwner;
      for (std::size_t i = 0; i < pc.size(); ++i) {
        const auto& p = proj[i];
        if (!p.valid || std::abs(p.px - x) > splat_radius || std::abs(p.py - y) > splat_radius) continue;
        if (p.depth < best) {
          best = p.depth;
          owner = static_cast<std::int32_t>(i);
        }
      }
      dm.depth[dm.idx(x, y)] = best;
      dm.owner[dm.idx(x, y)] = owner;
    }
  }
  return dm;
}

bool point_in_polygon(double x, double y, const std::vector<PixelCoord>& v, const std::vector<std::uint32_t>& face) {
  bool inside = false;
  for (std::size_t i = 0, j = face.size() - 1; i < face.size(); j = i++) {
    const auto& a = v[face[i]];
    const auto& b = v[face[j]];
    if (((a.v > y) != (b.v > y)) && (x < (b.u - a.u) * (y - a.v) / (b.v - a.v) + a.u)) inside = !inside;
  }
  return inside;
}

BinaryMask polygon_mask_scan(const std::vector<PixelCoord>& vertices,
                             const std::vector<std::vector<std::uint32_t>>& faces, int width, int height) {
  BinaryMask m(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (const auto& f : faces)
        if (point_in_polygon(x, y, vertices, f)) {
          m(x, y) = 1;
          break;
        }
  return m;
}

}  // namespace pcforge::reference
