#pragma once

// Plain serial implementations used as oracles by the tests and as the
// baseline in the kernel benchmark. Deliberately share no code with the
// optimized paths in the main library.

#include <vector>

#include "pcforge/geometry.hpp"
#include "pcforge/grid.hpp"
#include "pcforge/metrics.hpp"
#include "pcforge/raster.hpp"

namespace pcforge::reference {

// O(N*M) scan; ties resolve to the lowest index.
std::vector<Neighbor> brute_force_nearest(const PointCloud& query, const PointCloud& target);
std::vector<double> brute_force_distances(const PointCloud& query, const PointCloud& target);
double brute_force_chamfer(const PointCloud& p, const PointCloud& g, bool squared);
double brute_force_fscore(const PointCloud& p, const PointCloud& g, double tau);

// Direct 3x3 correlation, kernel rows summed top to bottom, replicate border.
GrayImage sobel_direct(const GrayImage& img);

// Per pixel, the minimum-depth (then lowest index) point among all splats covering it.
DepthMap zbuffer_scan(const PointCloud& pc, const CameraPose& pose, const Intrinsics& k, int splat_radius);

// Crossing-number test of the pixel center (x, y) against one polygon.
bool point_in_polygon(double x, double y, const std::vector<PixelCoord>& vertices,
                      const std::vector<std::uint32_t>& face);
BinaryMask polygon_mask_scan(const std::vector<PixelCoord>& vertices,
                             const std::vector<std::vector<std::uint32_t>>& faces, int width, int height);

}  // namespace pcforge::reference
