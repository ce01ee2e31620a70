#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "pcforge/geometry.hpp"
#include "pcforge/grid.hpp"

namespace pcforge::io {

namespace fs = std::filesystem;

enum class PlyFormat { ascii, binary_little_endian };

// Reads the x/y/z properties of the vertex element; other properties are skipped.
PointCloud read_ply(std::istream& in, const std::string& source = "<stream>");
PointCloud read_ply(const fs::path& path);
void write_ply(std::ostream& out, const PointCloud& pc, PlyFormat format = PlyFormat::binary_little_endian);
void write_ply(const fs::path& path, const PointCloud& pc, PlyFormat format = PlyFormat::binary_little_endian);

// v/f records only; polygonal faces are fan-triangulated.
TriangleMesh read_obj(std::istream& in, const std::string& source = "<stream>");
TriangleMesh read_obj(const fs::path& path);
void write_obj(const fs::path& path, const TriangleMesh& mesh);

// 8-bit PGM (P2/P5). Masks are stored 0/255 and read back as value > 127.
GrayImage read_pgm(const fs::path& path);
// PGM or PPM (P3/P6); color is converted to luminance.
GrayImage read_gray_image(const fs::path& path);
BinaryMask read_mask_pgm(const fs::path& path);
void write_pgm(const fs::path& path, const GrayImage& img);
void write_mask_pgm(const fs::path& path, const BinaryMask& mask);

// Raw little-endian float32 H x W x C grid with a JSON sidecar
// {"height", "width", "channels", "dtype"} stored at sidecar_path(raw).
struct FloatGrid {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;  // HWC order

  double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  double at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

fs::path sidecar_path(const fs::path& raw);
FloatGrid read_float_grid(const fs::path& raw);
void write_float_grid(const fs::path& raw, const FloatGrid& grid);
GrayImage read_gray_raw(const fs::path& raw);
void write_gray_raw(const fs::path& raw, const GrayImage& img);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace pcforge::io
