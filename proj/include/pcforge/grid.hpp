#pragma once

#include <cstdint>
#include <vector>

#include "pcforge/errors.hpp"

namespace pcforge {

// Row-major height x width grid; (x, y) = (column, row).
template <class T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
    if (w < 0 || h < 0) throw ShapeError("negative grid dimensions");
  }

  T& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& operator()(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  bool same_shape(int w, int h) const { return width == w && height == h; }
  template <class U>
  bool same_shape(const Grid<U>& o) const { return width == o.width && height == o.height; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using BinaryMask = Grid<std::uint8_t>;
using GrayImage = Grid<double>;

inline std::size_t count_set(const BinaryMask& m) {
  std::size_t n = 0;
  for (auto v : m.data) n += v ? 1 : 0;
  return n;
}

template <class T>
Grid<T> transpose(const Grid<T>& g) {
  Grid<T> out(g.height, g.width);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) out(y, x) = g(x, y);
  return out;
}

}  // namespace pcforge
