#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "pcforge/geometry.hpp"
#include "pcforge/grid.hpp"

namespace testutil {

inline pcforge::PointCloud random_cloud(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  pcforge::PointCloud pc(n);
  for (auto& p : pc.points) p = {u(rng), u(rng), u(rng)};
  return pc;
}

inline pcforge::GrayImage random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  pcforge::GrayImage img(w, h);
  for (auto& v : img.data) v = u(rng);
  return img;
}

// Unit cube [0,1]^3 as 12 triangles.
inline pcforge::TriangleMesh unit_cube() {
  pcforge::TriangleMesh m;
  for (int i = 0; i < 8; ++i) m.vertices.push_back({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)});
  m.faces = {{0, 1, 3}, {0, 3, 2}, {4, 6, 7}, {4, 7, 5}, {0, 4, 5}, {0, 5, 1},
             {2, 3, 7}, {2, 7, 6}, {0, 2, 6}, {0, 6, 4}, {1, 5, 7}, {1, 7, 3}};
  return m;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pcforge_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
